#include "porbit/homology.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace porbit {

namespace {

struct GridShape {
    int dim;
    int grid_n;
    bool periodic;

    int nodes_per_axis() const { return periodic ? grid_n : grid_n + 1; }

    bool wrap_node(std::array<int, 3>& v) const {
        for (int d = 0; d < dim; ++d) {
            if (periodic) {
                v[d] = ((v[d] % grid_n) + grid_n) % grid_n;
            } else if (v[d] < 0 || v[d] > grid_n) {
                return false;
            }
        }
        return true;
    }

    bool wrap_cell(std::array<int, 3>& v) const {
        for (int d = 0; d < dim; ++d) {
            if (periodic) {
                v[d] = ((v[d] % grid_n) + grid_n) % grid_n;
            } else if (v[d] < 0 || v[d] >= grid_n) {
                return false;
            }
        }
        return true;
    }
};

/// Faces of the closed cube with base `base`: pick the extruded submask and
/// a corner offset on the remaining axes.
void enumerate_faces(const GridShape& shape, const std::array<int, 3>& base, uint8_t full_mask,
                     const std::function<void(CubicalCell)>& emit) {
    const int n = shape.dim;
    for (uint8_t sub = 0;; ++sub) {
        if ((sub & ~full_mask) == 0) {
            std::vector<int> fixed_axes;
            for (int d = 0; d < n; ++d)
                if (!(sub & (1 << d))) fixed_axes.push_back(d);
            const int choices = 1 << fixed_axes.size();
            for (int c = 0; c < choices; ++c) {
                CubicalCell cell;
                cell.mask = sub;
                cell.v = base;
                for (size_t i = 0; i < fixed_axes.size(); ++i)
                    if (c & (1 << i)) cell.v[fixed_axes[i]] += 1;
                std::array<int, 3> w = cell.v;
                if (shape.wrap_node(w)) {
                    cell.v = w;
                    emit(cell);
                }
            }
        }
        if (sub == full_mask) break;
    }
}

/// Top grid cells whose closure contains the given face.
bool all_incident_tops_interior(const GridShape& shape, const CubicalCell& cell,
                                const std::unordered_set<uint64_t>& interior) {
    const int n = shape.dim;
    std::vector<int> free_axes;
    for (int d = 0; d < n; ++d)
        if (!(cell.mask & (1 << d))) free_axes.push_back(d);
    const int choices = 1 << free_axes.size();
    for (int c = 0; c < choices; ++c) {
        std::array<int, 3> base = cell.v;
        for (size_t i = 0; i < free_axes.size(); ++i)
            if (c & (1 << i)) base[free_axes[i]] -= 1;
        if (!shape.wrap_cell(base)) return false; // outside the grid counts as exterior
        CubicalCell top;
        top.v = base;
        top.mask = static_cast<uint8_t>((1 << n) - 1);
        if (!interior.count(top.key())) return false;
    }
    return true;
}

CubicalPair assemble(const GridShape& shape, const Box& bbox,
                     std::vector<CubicalCell> interior_cells) {
    CubicalPair pair;
    pair.box = bbox;
    pair.grid_n = shape.grid_n;
    pair.dim = shape.dim;
    pair.periodic = shape.periodic;
    pair.interior_cells = std::move(interior_cells);

    std::unordered_set<uint64_t> interior_keys;
    for (const auto& c : pair.interior_cells) interior_keys.insert(c.key());

    // closure of the interior region
    std::unordered_map<uint64_t, CubicalCell> closure;
    const uint8_t full = static_cast<uint8_t>((1 << shape.dim) - 1);
    for (const auto& top : pair.interior_cells)
        enumerate_faces(shape, top.v, full, [&](CubicalCell f) { closure.emplace(f.key(), f); });

    pair.relative_cells.assign(shape.dim + 1, {});
    pair.subcomplex_count_by_dim.assign(shape.dim + 1, 0);
    for (const auto& [key, cell] : closure) {
        const int k = cell.dim();
        if (k < shape.dim && !all_incident_tops_interior(shape, cell, interior_keys)) {
            pair.subcomplex_count_by_dim[k] += 1;
            continue;
        }
        pair.relative_cells[k].push_back(cell);
    }
    for (auto& cells : pair.relative_cells)
        std::sort(cells.begin(), cells.end(),
                  [](const CubicalCell& a, const CubicalCell& b) { return a.key() < b.key(); });
    return pair;
}

long long rank_mod2(std::vector<std::vector<int>> columns) {
    // sparse column reduction; pivot is the largest row index of a column
    std::unordered_map<int, int> pivot_owner;
    long long rank = 0;
    std::vector<int> merged;
    for (size_t j = 0; j < columns.size(); ++j) {
        auto& col = columns[j];
        while (!col.empty()) {
            auto it = pivot_owner.find(col.back());
            if (it == pivot_owner.end()) break;
            const auto& other = columns[it->second];
            merged.clear();
            std::set_symmetric_difference(col.begin(), col.end(), other.begin(), other.end(),
                                          std::back_inserter(merged));
            col.swap(merged);
        }
        if (!col.empty()) {
            pivot_owner[col.back()] = static_cast<int>(j);
            ++rank;
        }
    }
    return rank;
}

} // namespace

CubicalPair build_cubical_pair_from_mask(int dim, const Box& bbox, int grid_n, bool periodic,
                                         const std::function<bool(const std::array<int, 3>&)>& interior) {
    if (dim < 1 || dim > 3) throw HomologyError("cubical pairs support dimensions 1..3");
    if (grid_n < 2) throw HomologyError("grid_n must be >= 2");
    GridShape shape{dim, grid_n, periodic};

    std::vector<CubicalCell> cells;
    std::array<int, 3> idx{0, 0, 0};
    const long long total = [&] {
        long long t = 1;
        for (int d = 0; d < dim; ++d) t *= grid_n;
        return t;
    }();
    for (long long f = 0; f < total; ++f) {
        long long rest = f;
        for (int d = dim - 1; d >= 0; --d) {
            idx[d] = static_cast<int>(rest % grid_n);
            rest /= grid_n;
        }
        if (!interior(idx)) continue;
        if (!periodic)
            for (int d = 0; d < dim; ++d)
                if (idx[d] == 0 || idx[d] == grid_n - 1)
                    throw HomologyError("box too small: negative set touches the box boundary");
        CubicalCell top;
        top.v = idx;
        top.mask = static_cast<uint8_t>((1 << dim) - 1);
        cells.push_back(top);
    }
    return assemble(shape, bbox, std::move(cells));
}

CubicalPair build_cubical_pair(const PotentialSpec& spec, const MetricChart& chart,
                               double delta, const Box& bbox, int grid_n) {
    const int dim = bbox.dim();
    if (dim != spec.dim) throw HomologyError("box dimension does not match the potential");
    const bool periodic = chart.family() == MetricFamily::FlatTorus;
    if (periodic)
        for (int d = 0; d < dim; ++d)
            if (std::abs((bbox.hi[d] - bbox.lo[d]) - chart.periods()[d]) > 1e-9 * chart.periods()[d])
                throw HomologyError("flat torus grid must span the fundamental domain exactly");

    GridShape shape{dim, grid_n, periodic};
    const int nodes = shape.nodes_per_axis();
    long long node_total = 1;
    for (int d = 0; d < dim; ++d) node_total *= nodes;
    std::vector<double> u(node_total);
    std::array<int, 3> idx{0, 0, 0};
    auto node_flat = [&](const std::array<int, 3>& v) {
        long long f = 0;
        for (int d = 0; d < dim; ++d) f = f * nodes + v[d];
        return f;
    };
    for (long long f = 0; f < node_total; ++f) {
        long long rest = f;
        for (int d = dim - 1; d >= 0; --d) {
            idx[d] = static_cast<int>(rest % nodes);
            rest /= nodes;
        }
        Vec q(dim);
        for (int d = 0; d < dim; ++d)
            q[d] = bbox.lo[d] + (bbox.hi[d] - bbox.lo[d]) * idx[d] / grid_n;
        u[f] = eval_U(spec, q);
    }

    auto interior = [&](const std::array<int, 3>& cell) {
        const int corners = 1 << dim;
        for (int c = 0; c < corners; ++c) {
            std::array<int, 3> v = cell;
            for (int d = 0; d < dim; ++d)
                if (c & (1 << d)) v[d] += 1;
            if (periodic)
                for (int d = 0; d < dim; ++d) v[d] %= grid_n;
            if (u[node_flat(v)] <= delta) return false;
        }
        return true;
    };
    return build_cubical_pair_from_mask(dim, bbox, grid_n, periodic, interior);
}

BettiVector relative_betti_mod2(const CubicalPair& pair) {
    const int n = pair.dim;
    // index maps per dimension
    std::vector<std::unordered_map<uint64_t, int>> index(n + 1);
    for (int k = 0; k <= n; ++k)
        for (size_t i = 0; i < pair.relative_cells[k].size(); ++i)
            index[k].emplace(pair.relative_cells[k][i].key(), static_cast<int>(i));

    GridShape shape{n, pair.grid_n, pair.periodic};
    std::vector<long long> rank(n + 2, 0);
    for (int k = 1; k <= n; ++k) {
        std::vector<std::vector<int>> columns;
        columns.reserve(pair.relative_cells[k].size());
        for (const auto& cell : pair.relative_cells[k]) {
            std::vector<int> col;
            for (int d = 0; d < n; ++d) {
                if (!(cell.mask & (1 << d))) continue;
                for (int side = 0; side < 2; ++side) {
                    CubicalCell face;
                    face.mask = static_cast<uint8_t>(cell.mask & ~(1 << d));
                    face.v = cell.v;
                    if (side == 1) face.v[d] += 1;
                    std::array<int, 3> w = face.v;
                    if (!shape.wrap_node(w)) continue;
                    face.v = w;
                    auto it = index[k - 1].find(face.key());
                    if (it != index[k - 1].end()) col.push_back(it->second);
                }
            }
            std::sort(col.begin(), col.end());
            // mod 2: identified faces appearing twice cancel
            std::vector<int> reduced;
            for (size_t i = 0; i < col.size();) {
                size_t j = i;
                while (j < col.size() && col[j] == col[i]) ++j;
                if ((j - i) % 2 == 1) reduced.push_back(col[i]);
                i = j;
            }
            columns.push_back(std::move(reduced));
        }
        rank[k] = rank_mod2(std::move(columns));
    }

    BettiVector betti;
    betti.ranks.resize(n + 1);
    for (int k = 0; k <= n; ++k) {
        const long long beta = pair.relative_cell_count(k) - rank[k] - rank[k + 1];
        betti.ranks[k] = static_cast<int>(beta);
    }
    return betti;
}

bool check_lnk(const BettiVector& betti) {
    for (size_t k = 1; k < betti.ranks.size(); ++k)
        if (betti.ranks[k] != 0) return true;
    return false;
}

} // namespace porbit
