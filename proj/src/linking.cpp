#include "porbit/linking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace porbit {

namespace {

/// First root of U(t * dir) = target along the ray, searched outward from
/// t_lo. Bisection after bracketing; the builtin potentials are monotone
/// along rays past their ridge.
double ray_root(const PotentialSpec& spec, const Vec& dir, double target,
                double t_lo, double t_hi_start) {
    auto f = [&](double t) { return eval_U(spec, Vec(t * dir)) - target; };
    double lo = t_lo, hi = t_hi_start;
    double flo = f(lo);
    double fhi = f(hi);
    int guard = 0;
    while (flo * fhi > 0.0) {
        hi *= 1.5;
        fhi = f(hi);
        if (++guard > 200) throw LinkingError("cycle construction: no level crossing on ray");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (flo * fm <= 0.0) {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

Vec flat_index_to_s(long long flat, int degree, int nodes_per_axis) {
    Vec s(degree);
    for (int d = degree - 1; d >= 0; --d) {
        s[d] = static_cast<double>(flat % nodes_per_axis) / (nodes_per_axis - 1);
        flat /= nodes_per_axis;
    }
    return s;
}

} // namespace

CycleSpec make_builtin_cycle(const PotentialSpec& spec, const MetricChart& chart, double delta) {
    (void)chart;
    const double target = -3.0 * delta;
    CycleSpec cycle;
    if (spec.builtin_tag == "well1d") {
        Vec dir(1);
        dir << 1.0;
        const double L = ray_root(spec, dir, target, 0.0, 1.0);
        cycle.degree = 1;
        cycle.map = [L](const Vec& s) {
            Vec q(1);
            q[0] = -L + 2.0 * L * s[0];
            return q;
        };
    } else if (spec.builtin_tag == "harmonic2d") {
        Vec dir(2);
        dir << 1.0, 0.0;
        const double R = ray_root(spec, dir, target, 0.0, 1.0);
        cycle.degree = 2;
        cycle.map = [R](const Vec& s) {
            Vec q(2);
            q << R * (2.0 * s[0] - 1.0), R * (2.0 * s[1] - 1.0);
            return q;
        };
    } else if (spec.builtin_tag == "annulus2d") {
        Vec dir(2);
        dir << 1.0, 0.0;
        // ridge of U sits between the two zero circles; bracket each root
        const double ridge = std::sqrt(2.5);
        const double r_in = ray_root(spec, dir, target, ridge, 1e-3);
        const double r_out = ray_root(spec, dir, target, ridge, ridge * 1.01);
        const double lo = std::min(r_in, r_out), hi = std::max(r_in, r_out);
        cycle.degree = 1;
        cycle.map = [lo, hi](const Vec& s) {
            Vec q(2);
            q << lo + s[0] * (hi - lo), 0.0;
            return q;
        };
    } else {
        throw LinkingError("no builtin cycle for potential '" + spec.builtin_tag +
                           "'; supply a polyline or mesh cycle");
    }
    return cycle;
}

CycleSpec make_polyline_cycle(std::vector<Vec> points) {
    if (points.size() < 2) throw LinkingError("polyline cycle needs at least two points");
    CycleSpec cycle;
    cycle.degree = 1;
    cycle.map = [pts = std::move(points)](const Vec& s) {
        const double u = std::clamp(s[0], 0.0, 1.0) * (pts.size() - 1);
        const size_t i = std::min(static_cast<size_t>(u), pts.size() - 2);
        const double w = u - i;
        return Vec((1.0 - w) * pts[i] + w * pts[i + 1]);
    };
    return cycle;
}

CycleSpec make_mesh_cycle(std::vector<std::vector<Vec>> grid) {
    if (grid.size() < 2 || grid[0].size() < 2)
        throw LinkingError("mesh cycle needs at least a 2x2 grid of points");
    const size_t cols = grid[0].size();
    for (const auto& row : grid)
        if (row.size() != cols) throw LinkingError("mesh cycle rows must have equal lengths");
    CycleSpec cycle;
    cycle.degree = 2;
    cycle.map = [g = std::move(grid), cols](const Vec& s) {
        const double u = std::clamp(s[0], 0.0, 1.0) * (g.size() - 1);
        const double v = std::clamp(s[1], 0.0, 1.0) * (cols - 1);
        const size_t i = std::min(static_cast<size_t>(u), g.size() - 2);
        const size_t j = std::min(static_cast<size_t>(v), cols - 2);
        const double a = u - i, b = v - j;
        return Vec((1 - a) * (1 - b) * g[i][j] + a * (1 - b) * g[i + 1][j] +
                   (1 - a) * b * g[i][j + 1] + a * b * g[i + 1][j + 1]);
    };
    return cycle;
}

void validate_cycle(const CycleSpec& cycle, const PotentialSpec& spec, double delta,
                    int samples_per_axis) {
    long long total = 1;
    for (int d = 0; d < cycle.degree; ++d) total *= samples_per_axis;
    bool interior_positive = false;
    for (long long f = 0; f < total; ++f) {
        const Vec s = flat_index_to_s(f, cycle.degree, samples_per_axis);
        const double u = eval_U(spec, cycle.map(s));
        if (cycle.on_boundary(s)) {
            if (u > -delta + 1e-12)
                throw LinkingError("cycle boundary leaves {U <= -delta}: U = " + std::to_string(u));
        } else if (u > 0.0) {
            interior_positive = true;
        }
    }
    if (!interior_positive)
        throw LinkingError("cycle interior misses {U > 0}: linking would be vacuous");
}

PushedHomotopy push_cycle(const CycleSpec& cycle, const PotentialSpec& spec,
                          const MetricChart& chart, double delta, double rho,
                          int nodes_per_axis, int grow_slices, int flow_slices,
                          int modes, int samples) {
    if (rho <= 0.0) throw LinkingError("perturbation radius rho must be positive");
    if (nodes_per_axis < 3) throw LinkingError("cycle grid needs at least 3 nodes per axis");
    const int n = spec.dim;
    const double stop_level = -3.0 * delta; // flow target, below the -delta/2 goal

    PushedHomotopy out;
    out.nodes_per_axis = nodes_per_axis;
    long long node_count = 1;
    for (int d = 0; d < cycle.degree; ++d) node_count *= nodes_per_axis;
    out.s_grid.reserve(node_count);
    out.s_boundary.reserve(node_count);
    for (long long f = 0; f < node_count; ++f) {
        const Vec s = flat_index_to_s(f, cycle.degree, nodes_per_axis);
        out.s_grid.push_back(s);
        out.s_boundary.push_back(cycle.on_boundary(s) ? 1 : 0);
    }

    // raw sample state per node (samples x dim), flowed in place
    std::vector<Mat> state(node_count);
    std::vector<FourierLoop> base_loops;
    base_loops.reserve(node_count);
    for (long long f = 0; f < node_count; ++f) {
        const Vec c = cycle.map(out.s_grid[f]);
        base_loops.push_back(FourierLoop::constant(c, modes, samples));
        state[f] = Mat(samples, n);
        state[f].rowwise() = c.transpose();
    }

    auto slice_from_state = [&](std::vector<FourierLoop>& slice) {
        slice.clear();
        slice.reserve(node_count);
        for (long long f = 0; f < node_count; ++f) {
            if (out.s_boundary[f])
                slice.push_back(base_loops[f]); // frozen, bit-identical
            else
                slice.push_back(FourierLoop::from_samples(state[f], modes));
        }
    };

    out.slices.emplace_back();
    slice_from_state(out.slices.back()); // sigma = 0: point loops

    // growth block: raise the perturbation loop radius to rho; the amplitude
    // tapers to zero where the cycle already sits deep in {U <= -delta}
    for (int g = 1; g <= grow_slices; ++g) {
        for (long long f = 0; f < node_count; ++f) {
            if (out.s_boundary[f]) continue;
            const Vec c = cycle.map(out.s_grid[f]);
            const double u = eval_U(spec, c);
            const double taper = std::clamp((u + delta) / (0.5 * delta), 0.0, 1.0);
            const double amp = rho * taper * g / grow_slices;
            for (int m = 0; m < samples; ++m) {
                const double th = 2.0 * M_PI * m / samples;
                Vec q = c;
                q[0] += amp * std::cos(th);
                if (n >= 2) q[1] += amp * std::sin(th);
                state[f].row(m) = q.transpose();
            }
        }
        out.slices.emplace_back();
        slice_from_state(out.slices.back());
    }

    // flow block: per-point descent of U with per-point stopping
    auto point_done = [&](const Vec& q) { return eval_U(spec, q) <= stop_level; };
    auto flow_step = [&](Vec& q) {
        const Vec g = eval_gradU(spec, chart, q);
        const double gn = chart.norm(q, g);
        if (gn < 1e-300) return; // exactly critical; the perturbation should prevent this
        const double h = 0.2 / std::max(1.0, gn);
        q -= h * g;
    };

    // pass 1: count the steps needed on a scratch copy
    const int max_steps = 20000;
    int steps_needed = -1;
    {
        std::vector<Mat> scratch = state;
        for (int step = 0; step <= max_steps; ++step) {
            bool all_done = true;
            for (long long f = 0; f < node_count; ++f) {
                if (out.s_boundary[f]) continue;
                for (int m = 0; m < samples; ++m) {
                    Vec q = scratch[f].row(m).transpose();
                    if (point_done(q)) continue;
                    all_done = false;
                    flow_step(q);
                    scratch[f].row(m) = q.transpose();
                }
            }
            if (all_done) {
                steps_needed = step;
                break;
            }
        }
    }
    if (steps_needed < 0)
        throw LinkingError("push stuck near a critical point of U -- increase rho");

    // pass 2: replay, snapshotting at evenly spaced flow times
    steps_needed = std::max(steps_needed, 1);
    int taken = 0;
    for (int j = 1; j <= flow_slices; ++j) {
        const int until = static_cast<int>(std::llround(static_cast<double>(j) * steps_needed / flow_slices));
        for (; taken < until; ++taken) {
            for (long long f = 0; f < node_count; ++f) {
                if (out.s_boundary[f]) continue;
                for (int m = 0; m < samples; ++m) {
                    Vec q = state[f].row(m).transpose();
                    if (point_done(q)) continue;
                    flow_step(q);
                    state[f].row(m) = q.transpose();
                }
            }
        }
        out.slices.emplace_back();
        slice_from_state(out.slices.back());
    }

    // terminal criterion on the re-projected loops
    for (long long f = 0; f < node_count; ++f) {
        if (out.s_boundary[f]) continue;
        const double u = potential_integral(out.slices.back()[f], spec);
        if (u > -0.5 * delta) {
            std::ostringstream msg;
            msg << "pushed chain misses the potential-integral target: node " << f
                << " has int U = " << u << " > " << -0.5 * delta << " -- increase rho or modes";
            throw LinkingError(msg.str());
        }
    }
    return out;
}

LinkingParameters select_parameters(const PotentialSpec& spec, const MetricChart& chart,
                                    const Box& bbox, int grid_n, const CycleSpec& cycle,
                                    double rho, int nodes_per_axis, int grow_slices,
                                    int flow_slices, int modes, int samples,
                                    std::optional<double> delta_override,
                                    PushedHomotopy* out_push) {
    LinkingParameters params;
    const double max_u = max_U_on_box(spec, bbox, grid_n);
    if (max_u <= 0.0) throw LinkingError("negative set empty: U <= 0 everywhere in the box");

    if (delta_override) {
        params.delta = *delta_override;
        if (params.delta <= 0.0) throw LinkingError("delta override must be positive");
    } else {
        const double iso = isotopy_delta_estimate(spec, chart, bbox, grid_n);
        params.delta = std::min(0.5 * iso, 0.05 * max_u);
    }
    validate_cycle(cycle, spec, params.delta, 33);

    params.qb_distance = estimate_qb_distance(spec, chart, params.delta, bbox, grid_n);
    double grid_h = 0.0;
    for (int d = 0; d < bbox.dim(); ++d)
        grid_h = std::max(grid_h, (bbox.hi[d] - bbox.lo[d]) / grid_n);
    if (params.qb_distance <= grid_h)
        throw LinkingError("barrier gap below grid resolution -- refine the homology grid");

    params.r = 0.4 * params.qb_distance * params.qb_distance;
    if (chart.family() == MetricFamily::FlatTorus) {
        const double half = 0.5 * chart.periods().minCoeff();
        params.r = std::min(params.r, 0.49 * half * half);
    }
    params.barrier_floor = 2.0 * std::sqrt(params.r * params.delta);

    params.rho = rho > 0.0 ? rho : 2.0 * grid_h;

    // max U over the cycle image, sampled
    {
        long long total = 1;
        for (int d = 0; d < cycle.degree; ++d) total *= 65;
        double m = -std::numeric_limits<double>::infinity();
        for (long long f = 0; f < total; ++f)
            m = std::max(m, eval_U(spec, cycle.map(flat_index_to_s(f, cycle.degree, 65))));
        params.max_cycle_U = m;
    }
    if (params.max_cycle_U <= 0.0)
        throw LinkingError("cycle misses the negative set: max U over |c| is nonpositive");
    params.tau0 = std::min(-2.0, std::log(0.5 * params.barrier_floor / params.max_cycle_U));

    PushedHomotopy push = push_cycle(cycle, spec, chart, params.delta, params.rho, nodes_per_axis,
                                     grow_slices, flow_slices, modes, samples);
    double e_max = 0.0;
    for (const auto& slice : push.slices)
        for (const auto& loop : slice) e_max = std::max(e_max, energy(loop, chart));
    params.pushed_energy_max = e_max;
    params.tau1 = std::max(2.0, 0.5 * std::log(2.0 * std::max(e_max, 1e-12) / params.delta) + 1.0);

    // eps0: keep the frozen nodes below the barrier floor with margin, and the
    // constant-loop branch value 2 sqrt(eps max U) strictly below it
    const double p_max = std::max(penalty(params.tau0), penalty(params.tau1));
    params.eps0 = std::min({0.1 * params.barrier_floor,
                            0.45 * params.barrier_floor / p_max,
                            0.2 * params.r * params.delta / max_u});

    if (out_push) *out_push = std::move(push);
    return params;
}

double MinimaxFamily::max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& node : nodes) m = std::max(m, node.value);
    return m;
}

int MinimaxFamily::argmax_node() const {
    int best = 0;
    for (int i = 1; i < static_cast<int>(nodes.size()); ++i)
        if (nodes[i].value > nodes[best].value) best = i;
    return best;
}

void MinimaxFamily::check_frozen_below_barrier(const PotentialSpec& spec, const MetricChart& chart,
                                               double eps) const {
    for (size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i].frozen) continue;
        const double v = action_value(nodes[i].point, spec, chart, eps);
        if (v >= params.barrier_floor) {
            std::ostringstream msg;
            msg << "linking not established: frozen node " << i << " has action " << v
                << " >= barrier floor " << params.barrier_floor << " at eps " << eps;
            throw LinkingError(msg.str());
        }
    }
}

MinimaxFamily build_family(const CycleSpec& cycle, const PushedHomotopy& push,
                           const LinkingParameters& params, const PotentialSpec& spec,
                           const MetricChart& chart, double eps, int tau_ramp_slices) {
    if (params.tau0 >= 0.0)
        throw LinkingError("linking not established: tau0 must be negative");
    if (tau_ramp_slices < 2) throw LinkingError("tau ramp needs at least 2 slices");

    MinimaxFamily family;
    family.params = params;
    family.s_axes = cycle.degree;
    family.nodes_per_axis = push.nodes_per_axis;
    const int s_count = static_cast<int>(push.s_grid.size());
    const int push_slices = static_cast<int>(push.slices.size());
    family.n_sigma = tau_ramp_slices + push_slices + tau_ramp_slices;
    family.nodes.reserve(static_cast<size_t>(family.n_sigma) * s_count);

    for (int j = 0; j < family.n_sigma; ++j) {
        double tau;
        const std::vector<FourierLoop>* slice;
        if (j < tau_ramp_slices) {
            tau = params.tau0 * (1.0 - static_cast<double>(j) / tau_ramp_slices);
            slice = &push.slices.front(); // point loops
        } else if (j < tau_ramp_slices + push_slices) {
            tau = 0.0;
            slice = &push.slices[j - tau_ramp_slices];
        } else {
            const int jj = j - tau_ramp_slices - push_slices + 1;
            tau = params.tau1 * static_cast<double>(jj) / tau_ramp_slices;
            slice = &push.slices.back();
        }
        for (int f = 0; f < s_count; ++f) {
            FamilyNode node{ActionPoint((*slice)[f], tau), false, true, 0.0, 1.0};
            node.frozen = push.s_boundary[f] || j == 0 || j == family.n_sigma - 1;
            node.value = action_value(node.point, spec, chart, eps);
            family.nodes.push_back(std::move(node));
        }
    }

    double frozen_sup = -std::numeric_limits<double>::infinity();
    for (const auto& node : family.nodes)
        if (node.frozen) frozen_sup = std::max(frozen_sup, node.value);
    family.frozen_sup = frozen_sup;
    family.initial_max = family.max_value();

    if (!(frozen_sup < params.barrier_floor)) {
        std::ostringstream msg;
        msg << "linking not established: sup over the frozen set " << frozen_sup
            << " is not below the barrier floor " << params.barrier_floor;
        throw LinkingError(msg.str());
    }
    if (!(family.initial_max >= params.barrier_floor)) {
        std::ostringstream msg;
        msg << "linking not established: family max " << family.initial_max
            << " is below the barrier floor " << params.barrier_floor;
        throw LinkingError(msg.str());
    }

    // barrier-crossing evidence: either a low-energy node starting in Q_B, or
    // an intermediate-value crossing of {E = r} along a sigma-line whose
    // starting points lie in Q_B
    bool crosses = false;
    for (int f = 0; f < s_count && !crosses; ++f) {
        double prev_e = -1.0;
        bool prev_in_qb = false;
        for (int j = 0; j < family.n_sigma; ++j) {
            const auto& node = family.nodes[family.node_index(f, j)];
            const double e = energy(node.point.loop, chart);
            const bool in = in_qb(spec, chart, node.point.loop.value_at(0.0), params.delta);
            if (e <= params.r && in) {
                crosses = true;
                break;
            }
            if (j > 0 && prev_e <= params.r && e > params.r && (prev_in_qb || in)) {
                crosses = true;
                break;
            }
            prev_e = e;
            prev_in_qb = in;
        }
    }
    if (!crosses)
        throw LinkingError("linking not established: no sigma-line crosses the barrier set");
    return family;
}

} // namespace porbit
