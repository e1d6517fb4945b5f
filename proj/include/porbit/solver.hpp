#pragma once

#include "porbit/linking.hpp"
#include "porbit/verify.hpp"

namespace porbit {

/// Solver failure with the pipeline stage that produced it.
struct SolveError : std::runtime_error {
    std::string stage;
    SolveError(std::string stage_, const std::string& msg)
        : std::runtime_error("[" + stage_ + "] " + msg), stage(std::move(stage_)) {}
};

struct HypothesisFailure : std::runtime_error {
    explicit HypothesisFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct SolverConfig {
    double eps0 = 0.0;        // 0: choose from the linking parameters
    double eps_factor = 0.3;  // geometric depenalization schedule
    double eps_min = 1e-6;
    double tol_deform = 0.1;  // gradient target for the family argmax
    double tol_newton = 1e-10;
    int max_outer = 600;      // deformation sweeps
    int max_newton = 60;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    double step0 = 1.0;
    int max_backtracks = 40;
    double tau_bound = 50.0;  // trust region for the period variable
    double energy_min = 1e-6; // collapse guard threshold
    double fd_step = 1e-6;    // Newton finite-difference Jacobian step
    bool normalized_flow = false; // use grad/|grad|^2 descent directions
    int threads = 1;
};

struct StageRecord {
    double eps = 0.0;
    double c = 0.0;
    double grad_norm = 0.0;
    double tau = 0.0;
    double gap_U = 0.0;
    double gap_E = 0.0;
    int newton_iters = 0;
};

struct CriticalPointRecord {
    ActionPoint point;
    double eps = 0.0;
    double c = 0.0;
    double grad_norm = 0.0;
    ResidualReport residuals;
    int newton_iters = 0;
    std::vector<StageRecord> history; // one entry per penalization stage
};

struct DeformStats {
    int sweeps = 0;
    bool converged = false;
    double final_grad = 0.0;
    double final_max = 0.0;
};

/// Sweeps the interior family nodes with Armijo-backtracked descent steps
/// (Jacobi updates in deterministic order) until the argmax node is
/// near-critical; returns that node.
ActionPoint minimax_deform(MinimaxFamily& family, const PotentialSpec& spec,
                           const MetricChart& chart, double eps, const SolverConfig& cfg,
                           DeformStats* stats = nullptr);

/// Damped Newton with forward-difference Jacobian on the system
/// (H^1 gradient components, dL/dtau) = 0; Levenberg fallback when the step
/// is rejected.
CriticalPointRecord newton_refine(const ActionPoint& seed, const PotentialSpec& spec,
                                  const MetricChart& chart, double eps, const SolverConfig& cfg);

/// Continuation eps -> eps_min, warm-starting each stage and guarding
/// against loop collapse and tau runaway.
CriticalPointRecord depenalize(const CriticalPointRecord& start, const PotentialSpec& spec,
                               const MetricChart& chart, const SolverConfig& cfg,
                               const MinimaxFamily* family = nullptr);

struct PipelineOptions {
    Box bbox;
    int homology_grid_n = 128;
    std::optional<double> delta_override;
    int modes = 32;
    int samples = 256;
    double rho = 0.0;     // 0: 2x homology grid resolution
    int cycle_nodes = 0;  // 0: 33 for degree-1 cycles, 13 for degree-2
    int grow_slices = 6;
    int flow_slices = 16;
    int tau_ramp_slices = 8;
    int orbit_samples = 512;
    double shooting_rtol = 1e-10;
    bool skip_hypothesis_checks = false;
    SolverConfig solver;
};

struct SolveOutcome {
    HypothesisReport hypotheses;
    BettiVector betti;
    LinkingParameters params;
    double family_frozen_sup = 0.0;
    double family_initial_max = 0.0;
    DeformStats deform;
    CriticalPointRecord record;
    CriticalOrbit orbit;
};

/// checks -> parameters -> family -> deformation -> Newton -> depenalization
/// -> reconstruction + oracle certification.
SolveOutcome solve_problem(const PotentialSpec& spec, const MetricChart& chart,
                           const CycleSpec& cycle, const PipelineOptions& opts);

/// The hypothesis battery by itself (REG, AC, bounded geometry, LNK).
std::pair<HypothesisReport, BettiVector> run_hypothesis_checks(const PotentialSpec& spec,
                                                               const MetricChart& chart,
                                                               const Box& bbox, int grid_n,
                                                               std::optional<double> delta_override);

} // namespace porbit
