#pragma once

#include "porbit/action.hpp"
#include "porbit/homology.hpp"

namespace porbit {

struct LinkingError : std::runtime_error {
    explicit LinkingError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Parametric relative cycle: a map [0,1]^degree -> configuration space whose
/// boundary lands in {U <= -delta} and whose interior meets {U > 0}.
struct CycleSpec {
    int degree = 1;
    std::function<Vec(const Vec&)> map; // s in [0,1]^degree -> point

    bool on_boundary(const Vec& s) const {
        for (int d = 0; d < degree; ++d)
            if (s[d] <= 0.0 || s[d] >= 1.0) return true;
        return false;
    }
};

/// Builtins realizing (LNK): a diameter segment for well1d, a spanning
/// square for harmonic2d, a radial segment for annulus2d. The images of the
/// cycle boundary sit at {U <= -3 delta} to leave flow margin.
CycleSpec make_builtin_cycle(const PotentialSpec& spec, const MetricChart& chart, double delta);
CycleSpec make_polyline_cycle(std::vector<Vec> points);
CycleSpec make_mesh_cycle(std::vector<std::vector<Vec>> grid);

/// Sampled validity check of the CycleSpec invariants.
void validate_cycle(const CycleSpec& cycle, const PotentialSpec& spec, double delta,
                    int samples_per_axis);

struct LinkingParameters {
    double delta = 0.0;
    double r = 0.0;
    double tau0 = 0.0;
    double tau1 = 0.0;
    double barrier_floor = 0.0; // 2 sqrt(r delta)
    double qb_distance = 0.0;
    double rho = 0.0;           // perturbation loop radius
    double max_cycle_U = 0.0;
    double pushed_energy_max = 0.0;
    double eps0 = 0.0;          // penalization start compatible with the frozen bound
};

/// One homotopy slice per sigma value; slice[j][node] with node indexed over
/// the cycle parameter grid (row-major over [0,1]^degree).
struct PushedHomotopy {
    std::vector<std::vector<FourierLoop>> slices;
    std::vector<Vec> s_grid; // cycle parameters per node
    std::vector<char> s_boundary;
    int nodes_per_axis = 0;
};

/// Lemma-4.4 style construction: grow a perturbation loop of radius rho,
/// then flow the loop samples down -grad U (per-point stop below -3 delta),
/// re-projecting every slice to the Fourier basis. Terminal slice must
/// satisfy potential_integral <= -delta/2 for every loop.
PushedHomotopy push_cycle(const CycleSpec& cycle, const PotentialSpec& spec,
                          const MetricChart& chart, double delta, double rho,
                          int nodes_per_axis, int grow_slices, int flow_slices,
                          int modes, int samples);

/// Chooses delta, r, tau0, tau1, the barrier floor and eps0; runs push_cycle
/// internally (the tau selections need max U over |c| and the pushed energy).
LinkingParameters select_parameters(const PotentialSpec& spec, const MetricChart& chart,
                                    const Box& bbox, int grid_n, const CycleSpec& cycle,
                                    double rho, int nodes_per_axis, int grow_slices,
                                    int flow_slices, int modes, int samples,
                                    std::optional<double> delta_override,
                                    PushedHomotopy* out_push);

struct FamilyNode {
    ActionPoint point;
    bool frozen = false;
    bool active = true;   // retired once the value sinks far below the barrier
    double value = 0.0;
    double step_hint = 1.0;
};

/// The sweeping family C: point loops with tau ramping tau0 -> 0, the pushed
/// homotopy at tau = 0, then the pushed chain with tau ramping 0 -> tau1.
/// Nodes are indexed by (cycle grid, sigma); the frozen mask realizes the
/// boundary cycle A.
class MinimaxFamily {
public:
    std::vector<FamilyNode> nodes;
    int s_axes = 1;
    int nodes_per_axis = 0;
    int n_sigma = 0;
    LinkingParameters params;

    double frozen_sup = 0.0;  // sup of L_eps over the frozen set at creation
    double initial_max = 0.0; // max of L_eps over the family at creation

    int node_index(int s_flat, int j_sigma) const { return j_sigma * s_count() + s_flat; }
    int s_count() const {
        int c = 1;
        for (int d = 0; d < s_axes; ++d) c *= nodes_per_axis;
        return c;
    }

    double max_value() const;
    int argmax_node() const; // deterministic: lowest index wins ties

    /// Frozen-node actions must stay below the barrier floor at eps.
    void check_frozen_below_barrier(const PotentialSpec& spec, const MetricChart& chart,
                                    double eps) const;
};

/// Assembles the family and asserts the linking invariants:
/// sup_frozen L_eps < 2 sqrt(r delta) <= max over the family, and the family
/// crosses the barrier set (a node with E <= r starting in Q_B, or an
/// intermediate-value crossing of {E = r} along a sigma-line through Q_B).
MinimaxFamily build_family(const CycleSpec& cycle, const PushedHomotopy& push,
                           const LinkingParameters& params, const PotentialSpec& spec,
                           const MetricChart& chart, double eps, int tau_ramp_slices);

} // namespace porbit
