#pragma once

#include "porbit/geometry.hpp"
#include "porbit/potential.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace porbit {

struct HomologyError : std::runtime_error {
    explicit HomologyError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A cubical cell of the grid complex: base vertex v and an axis mask; the
/// cell extends one grid step along every axis whose mask bit is set.
struct CubicalCell {
    std::array<int, 3> v{0, 0, 0};
    uint8_t mask = 0;

    int dim() const { return __builtin_popcount(mask); }
    uint64_t key() const {
        return static_cast<uint64_t>(mask) |
               (static_cast<uint64_t>(v[0]) << 3) |
               (static_cast<uint64_t>(v[1]) << 23) |
               (static_cast<uint64_t>(v[2]) << 43);
    }
};

/// Cubical approximation of the pair (closure of N_delta, boundary of
/// N_delta): interior top cells have U > delta at every corner; the
/// subcomplex collects the faces on the topological frontier.
struct CubicalPair {
    Box box;
    int grid_n = 0;
    int dim = 0;
    bool periodic = false; // FlatTorus fundamental domain with identifications

    std::vector<CubicalCell> interior_cells;
    /// Relative chain complex cells (closure minus frontier subcomplex),
    /// grouped and deterministically ordered by dimension.
    std::vector<std::vector<CubicalCell>> relative_cells;
    std::vector<long long> subcomplex_count_by_dim;

    long long relative_cell_count(int k) const {
        return k >= 0 && k <= dim ? static_cast<long long>(relative_cells[k].size()) : 0;
    }
    long long euler_characteristic() const {
        long long chi = 0;
        for (int k = 0; k <= dim; ++k)
            chi += (k % 2 == 0 ? 1 : -1) * relative_cell_count(k);
        return chi;
    }
};

struct BettiVector {
    std::vector<int> ranks; // beta_0 .. beta_n, coefficients mod 2

    long long euler_characteristic() const {
        long long chi = 0;
        for (size_t k = 0; k < ranks.size(); ++k)
            chi += (k % 2 == 0 ? 1 : -1) * ranks[k];
        return chi;
    }
};

/// Builds the pair on the grid. Fails when the negative set touches the box
/// boundary (the pair would be truncated); FlatTorus charts must be handed
/// the whole fundamental domain and get periodic identifications.
CubicalPair build_cubical_pair(const PotentialSpec& spec, const MetricChart& chart,
                               double delta, const Box& bbox, int grid_n);

/// Same construction from an arbitrary interior predicate on top cells
/// (cell given by its base multi-index). Used by synthetic tests.
CubicalPair build_cubical_pair_from_mask(int dim, const Box& bbox, int grid_n, bool periodic,
                                         const std::function<bool(const std::array<int, 3>&)>& interior);

/// Ranks of H_k(pair rel subcomplex; F_2) via sparse boundary reduction.
BettiVector relative_betti_mod2(const CubicalPair& pair);

/// (LNK): some beta_k nonzero with 1 <= k <= n.
bool check_lnk(const BettiVector& betti);

} // namespace porbit
