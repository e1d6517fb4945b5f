#include "porbit/solver.hpp"

#include <Eigen/LU>
#include <atomic>
#include <cmath>
#include <iostream>
#include <sstream>
#include <thread>

namespace porbit {

namespace {

struct StagedUpdate {
    int node = -1;
    FourierLoop loop;
    double tau = 0.0;
    double value = 0.0;
    double step = 0.0;
};

/// One Armijo-backtracked descent step from the node's pre-sweep state.
std::optional<StagedUpdate> descend_node(const FamilyNode& node, const PotentialSpec& spec,
                                         const MetricChart& chart, double eps,
                                         const SolverConfig& cfg) {
    const ActionGradient grad = action_gradient(node.point, spec, chart, eps);
    if (grad.norm < 1e-16) return std::nullopt;

    FourierLoop dir = grad.xi;
    double dtau = grad.dtau;
    double slope = grad.norm * grad.norm; // descent rate along the negative gradient
    if (cfg.normalized_flow) {
        const double inv = 1.0 / slope;
        dir.coeffs() *= inv;
        dtau *= inv;
        slope = 1.0;
    }

    double alpha = std::min(cfg.step0, node.step_hint * 4.0);
    for (int bt = 0; bt < cfg.max_backtracks; ++bt, alpha *= cfg.backtrack) {
        const double tau_cand = node.point.tau - alpha * dtau;
        if (std::abs(tau_cand) > cfg.tau_bound) continue;
        ActionPoint cand(node.point.loop, tau_cand);
        cand.loop.coeffs() -= alpha * dir.coeffs();
        const double value = action_value(cand, spec, chart, eps);
        if (value <= node.value - cfg.armijo_c * alpha * slope)
            return StagedUpdate{-1, std::move(cand.loop), tau_cand, value, alpha};
    }
    return std::nullopt;
}

} // namespace

ActionPoint minimax_deform(MinimaxFamily& family, const PotentialSpec& spec,
                           const MetricChart& chart, double eps, const SolverConfig& cfg,
                           DeformStats* stats) {
    family.check_frozen_below_barrier(spec, chart, eps);
    for (auto& node : family.nodes) node.value = action_value(node.point, spec, chart, eps);

    const double retire_floor = 0.5 * family.params.barrier_floor;
    DeformStats local;
    auto finish = [&](const FamilyNode& node, bool converged, double grad) {
        local.converged = converged;
        local.final_grad = grad;
        local.final_max = family.max_value();
        if (stats) *stats = local;
        return node.point;
    };

    std::vector<int> interior;
    for (int i = 0; i < static_cast<int>(family.nodes.size()); ++i)
        if (!family.nodes[i].frozen) interior.push_back(i);

    for (int sweep = 0; sweep <= cfg.max_outer; ++sweep) {
        const int top = family.argmax_node();
        const ActionGradient top_grad = action_gradient(family.nodes[top].point, spec, chart, eps);
        if (top_grad.norm <= cfg.tol_deform) return finish(family.nodes[top], true, top_grad.norm);
        if (sweep == cfg.max_outer) return finish(family.nodes[top], false, top_grad.norm);

        const double old_max = family.max_value();

        std::vector<int> work;
        for (int i : interior)
            if (family.nodes[i].active) work.push_back(i);

        std::vector<std::optional<StagedUpdate>> staged(work.size());
        const int threads = std::max(1, cfg.threads);
        if (threads == 1 || work.size() < 32) {
            for (size_t w = 0; w < work.size(); ++w)
                staged[w] = descend_node(family.nodes[work[w]], spec, chart, eps, cfg);
        } else {
            std::vector<std::thread> pool;
            std::atomic<size_t> cursor{0};
            for (int t = 0; t < threads; ++t)
                pool.emplace_back([&] {
                    for (size_t w = cursor.fetch_add(1); w < work.size(); w = cursor.fetch_add(1))
                        staged[w] = descend_node(family.nodes[work[w]], spec, chart, eps, cfg);
                });
            for (auto& th : pool) th.join();
        }

        // apply in deterministic index order
        for (size_t w = 0; w < work.size(); ++w) {
            if (!staged[w]) continue;
            FamilyNode& node = family.nodes[work[w]];
            node.point.loop = std::move(staged[w]->loop);
            node.point.tau = staged[w]->tau;
            node.point.invalidate();
            node.value = staged[w]->value;
            node.step_hint = staged[w]->step;
            if (node.value < retire_floor) node.active = false;
        }

        const double new_max = family.max_value();
        if (new_max > old_max + 1e-9 * (1.0 + std::abs(old_max)))
            throw SolveError("deform", "family maximum increased during a sweep");
        if (new_max < family.params.barrier_floor)
            throw SolveError("deform",
                             "linking violated numerically: family max fell below the barrier floor");
        local.sweeps = sweep + 1;
    }
    throw SolveError("deform", "unreachable");
}

namespace {

Vec pack(const ActionPoint& p) {
    Vec z(p.loop.coeff_count() + 1);
    z.head(p.loop.coeff_count()) = p.loop.coeffs();
    z[p.loop.coeff_count()] = p.tau;
    return z;
}

ActionPoint unpack(const Vec& z, const FourierLoop& proto) {
    FourierLoop loop = proto;
    loop.coeffs() = z.head(proto.coeff_count());
    return ActionPoint(std::move(loop), z[proto.coeff_count()]);
}

struct GradEval {
    Vec F;
    double norm = 0.0;
};

GradEval eval_packed_gradient(const Vec& z, const FourierLoop& proto, const PotentialSpec& spec,
                              const MetricChart& chart, double eps) {
    const ActionPoint p = unpack(z, proto);
    const ActionGradient g = action_gradient(p, spec, chart, eps);
    GradEval out;
    out.F.resize(z.size());
    out.F.head(proto.coeff_count()) = g.xi.coeffs();
    out.F[proto.coeff_count()] = g.dtau;
    out.norm = g.norm;
    return out;
}

} // namespace

CriticalPointRecord newton_refine(const ActionPoint& seed, const PotentialSpec& spec,
                                  const MetricChart& chart, double eps, const SolverConfig& cfg) {
    const FourierLoop& proto = seed.loop;
    const int dim = proto.coeff_count() + 1;
    Vec z = pack(seed);
    GradEval cur = eval_packed_gradient(z, proto, spec, chart, eps);

    auto make_record = [&](int iters) {
        CriticalPointRecord rec{unpack(z, proto), eps, 0.0, cur.norm, {}, iters, {}};
        rec.c = action_value(rec.point, spec, chart, eps);
        rec.residuals = residual_report(rec.point, spec, chart, eps);
        StageRecord stage{eps, rec.c, rec.grad_norm, rec.point.tau,
                          rec.residuals.crit_value_gap_U, rec.residuals.crit_value_gap_E, iters};
        rec.history.push_back(stage);
        return rec;
    };

    if (cur.norm <= cfg.tol_newton) return make_record(0);

    double best_norm = cur.norm;
    int grow_streak = 0;
    for (int iter = 1; iter <= cfg.max_newton; ++iter) {
        // forward-difference Jacobian of the packed gradient
        Mat J(dim, dim);
        for (int j = 0; j < dim; ++j) {
            const double h = cfg.fd_step * std::max(1.0, std::abs(z[j]));
            Vec zj = z;
            zj[j] += h;
            J.col(j) = (eval_packed_gradient(zj, proto, spec, chart, eps).F - cur.F) / h;
        }

        double lambda = 0.0;
        bool accepted = false;
        for (int attempt = 0; attempt < 9 && !accepted; ++attempt) {
            Mat Jl = J;
            if (lambda > 0.0) Jl += lambda * Mat::Identity(dim, dim);
            const Vec delta = Eigen::PartialPivLU<Mat>(Jl).solve(-cur.F);
            if (delta.allFinite()) {
                Vec zc = z + delta;
                const double tau_c = zc[dim - 1];
                if (std::abs(tau_c) <= cfg.tau_bound) {
                    GradEval cand = eval_packed_gradient(zc, proto, spec, chart, eps);
                    if (cand.norm <= (1.0 - 1e-4) * cur.norm || cand.norm <= cfg.tol_newton) {
                        z = std::move(zc);
                        cur = std::move(cand);
                        accepted = true;
                        break;
                    }
                } else if (attempt == 8) {
                    throw SolveError("newton", "tau runaway: period variable left the trust bounds");
                }
            }
            lambda = lambda == 0.0 ? 1e-8 * (1.0 + J.cwiseAbs().maxCoeff()) : lambda * 10.0;
        }
        if (!accepted)
            throw SolveError("newton", "refinement stalled: no acceptable damped step");

        if (cur.norm <= cfg.tol_newton) return make_record(iter);

        if (cur.norm > 10.0 * best_norm) {
            if (++grow_streak >= 5) throw SolveError("newton", "refinement diverged");
        } else {
            grow_streak = 0;
        }
        best_norm = std::min(best_norm, cur.norm);
    }
    throw SolveError("newton", "refinement did not reach tol_newton within max_newton iterations");
}

CriticalPointRecord depenalize(const CriticalPointRecord& start, const PotentialSpec& spec,
                               const MetricChart& chart, const SolverConfig& cfg,
                               const MinimaxFamily* family) {
    if (!(cfg.eps_min > 0.0) || !(cfg.eps_factor > 0.0 && cfg.eps_factor < 1.0))
        throw SolveError("depenalize", "need 0 < eps_factor < 1 and eps_min > 0");

    CriticalPointRecord rec = start;
    auto guard = [&](const CriticalPointRecord& r, double eps) {
        const double e = energy(r.point.loop, chart);
        if (e < cfg.energy_min) {
            std::ostringstream msg;
            msg << "loop collapsing -- likely spurious branch (energy " << e << " < " << cfg.energy_min
                << " at eps " << eps << ")";
            throw SolveError("depenalize", msg.str());
        }
        if (std::abs(r.point.tau) > cfg.tau_bound)
            throw SolveError("depenalize", "tau runaway during continuation");
        if (family) family->check_frozen_below_barrier(spec, chart, eps);
    };
    guard(rec, rec.eps);

    double eps = rec.eps;
    while (eps > cfg.eps_min) {
        const double eps_next = std::max(eps * cfg.eps_factor, cfg.eps_min);
        CriticalPointRecord stage;
        try {
            stage = newton_refine(rec.point, spec, chart, eps_next, cfg);
        } catch (const SolveError&) {
            // one retry with a halved continuation step
            const double eps_half = std::max(eps * 0.5 * (1.0 + cfg.eps_factor), cfg.eps_min);
            stage = newton_refine(rec.point, spec, chart, eps_half, cfg);
            stage.history.insert(stage.history.begin(), rec.history.begin(), rec.history.end());
            guard(stage, eps_half);
            rec = std::move(stage);
            eps = rec.eps;
            continue;
        }
        stage.history.insert(stage.history.begin(), rec.history.begin(), rec.history.end());
        guard(stage, eps_next);
        rec = std::move(stage);
        eps = eps_next;
    }
    return rec;
}

std::pair<HypothesisReport, BettiVector> run_hypothesis_checks(const PotentialSpec& spec,
                                                               const MetricChart& chart,
                                                               const Box& bbox, int grid_n,
                                                               std::optional<double> delta_override) {
    const double tol = default_grad_tol(spec, bbox, grid_n);
    HypothesisReport rep = check_reg(spec, chart, bbox, grid_n, tol);

    std::vector<double> radii;
    const double r0 = std::max(spec.compact_radius, 0.5 * bbox.diameter()) * 1.01;
    for (double f : {1.5, 2.0, 3.0, 4.0}) radii.push_back(f * r0);
    HypothesisReport asym = check_asymptotic(spec, chart, radii, 64);
    rep.ac1a_min_grad = asym.ac1a_min_grad;
    rep.ac1b_max_ratio = asym.ac1b_max_ratio;
    rep.ac1a_ok = asym.ac1a_ok;
    rep.ac2_decreasing = asym.ac2_decreasing;
    rep.ac2_trend = asym.ac2_trend;
    rep.notes += asym.notes;

    BettiVector betti;
    if (rep.reg_ok) {
        double delta = delta_override.value_or(0.0);
        if (delta <= 0.0) {
            const double iso = isotopy_delta_estimate(spec, chart, bbox, grid_n);
            delta = std::min(0.5 * iso, 0.05 * max_U_on_box(spec, bbox, grid_n));
        }
        const CubicalPair pair = build_cubical_pair(spec, chart, delta, bbox, grid_n);
        betti = relative_betti_mod2(pair);
        rep.lnk_betti.assign(betti.ranks.begin(), betti.ranks.end());
        rep.lnk_ok = check_lnk(betti);
    }
    return {rep, betti};
}

SolveOutcome solve_problem(const PotentialSpec& spec, const MetricChart& chart,
                           const CycleSpec& cycle, const PipelineOptions& opts) {
    SolveOutcome out;

    try {
        std::tie(out.hypotheses, out.betti) = run_hypothesis_checks(
            spec, chart, opts.bbox, opts.homology_grid_n, opts.delta_override);
    } catch (const std::exception& e) {
        throw SolveError("checks", e.what());
    }
    if (!opts.skip_hypothesis_checks) {
        const auto& h = out.hypotheses;
        if (!(h.reg_ok && h.lnk_ok && h.ac1a_ok && h.ac2_decreasing)) {
            std::ostringstream msg;
            msg << "hypothesis check failed:"
                << (h.reg_ok ? "" : " (REG)") << (h.lnk_ok ? "" : " (LNK)")
                << (h.ac1a_ok ? "" : " (AC1a)") << (h.ac2_decreasing ? "" : " (AC2)");
            throw HypothesisFailure(msg.str());
        }
    }

    const int cycle_nodes = opts.cycle_nodes > 0 ? opts.cycle_nodes : (cycle.degree == 1 ? 33 : 13);
    double grid_h = 0.0;
    for (int d = 0; d < opts.bbox.dim(); ++d)
        grid_h = std::max(grid_h, (opts.bbox.hi[d] - opts.bbox.lo[d]) / opts.homology_grid_n);
    const double rho1 = opts.rho > 0.0 ? opts.rho : 2.0 * grid_h;

    PushedHomotopy push;
    try {
        out.params = select_parameters(spec, chart, opts.bbox, opts.homology_grid_n, cycle, rho1,
                                       cycle_nodes, opts.grow_slices, opts.flow_slices, opts.modes,
                                       opts.samples, opts.delta_override, &push);
    } catch (const LinkingError& e) {
        // one retry with a doubled perturbation radius
        try {
            out.params = select_parameters(spec, chart, opts.bbox, opts.homology_grid_n, cycle,
                                           2.0 * rho1, cycle_nodes, opts.grow_slices,
                                           opts.flow_slices, opts.modes, opts.samples,
                                           opts.delta_override, &push);
        } catch (const std::exception&) {
            throw SolveError("linking", e.what());
        }
    }

    const SolverConfig& scfg = opts.solver;
    const double eps0 = scfg.eps0 > 0.0 ? scfg.eps0 : out.params.eps0;

    MinimaxFamily family;
    try {
        family = build_family(cycle, push, out.params, spec, chart, eps0, opts.tau_ramp_slices);
    } catch (const std::exception& e) {
        throw SolveError("family", e.what());
    }
    out.family_frozen_sup = family.frozen_sup;
    out.family_initial_max = family.initial_max;

    std::cerr << "stage=family eps=" << eps0 << " barrier_floor=" << out.params.barrier_floor
              << " frozen_sup=" << family.frozen_sup << " max=" << family.initial_max << "\n";

    ActionPoint candidate = minimax_deform(family, spec, chart, eps0, scfg, &out.deform);
    std::cerr << "stage=deform sweeps=" << out.deform.sweeps
              << " converged=" << (out.deform.converged ? 1 : 0)
              << " grad=" << out.deform.final_grad << " max=" << out.deform.final_max << "\n";

    CriticalPointRecord first = newton_refine(candidate, spec, chart, eps0, scfg);
    std::cerr << "stage=newton eps=" << eps0 << " c=" << first.c
              << " grad=" << first.grad_norm << " tau=" << first.point.tau << "\n";

    out.record = depenalize(first, spec, chart, scfg, &family);
    std::cerr << "stage=depenalize eps=" << out.record.eps << " c=" << out.record.c
              << " tau=" << out.record.point.tau << "\n";

    try {
        out.orbit = reconstruct(out.record.point, out.record.eps, spec, chart, opts.orbit_samples);
        const ShootingResult shoot = shooting_crosscheck(out.orbit, spec, chart, opts.shooting_rtol);
        out.orbit.shooting_closure = shoot.closure;
        out.orbit.shooting_deviation = shoot.deviation;
    } catch (const std::exception& e) {
        throw SolveError("verify", e.what());
    }
    std::cerr << "stage=verify T=" << out.orbit.period << " closure=" << out.orbit.shooting_closure
              << " el_resid=" << out.orbit.el_resid_sup << "\n";
    return out;
}

} // namespace porbit
