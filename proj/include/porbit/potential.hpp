#pragma once

#include "porbit/geometry.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace porbit {

struct PotentialError : std::runtime_error {
    explicit PotentialError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Multivariate polynomial sum_alpha c_alpha q^alpha with analytic
/// derivatives; alpha is a per-axis exponent vector.
class Polynomial {
public:
    Polynomial(int dimension, std::map<std::vector<int>, double> terms);

    int dim() const { return dim_; }
    double value(const Vec& q) const;
    Vec grad(const Vec& q) const;
    Mat hess(const Vec& q) const;

private:
    struct Term {
        std::vector<int> exp;
        double coeff;
    };
    int dim_;
    std::vector<Term> terms_;
};

/// The shifted potential U = E - V with derivative providers.
/// dU returns covector components; the metric gradient goes through the chart.
struct PotentialSpec {
    int dim = 0;
    std::function<double(const Vec&)> U;
    std::function<Vec(const Vec&)> dU;
    std::function<Mat(const Vec&)> hessU;
    Vec base_point;          // the distinguished point o
    double compact_radius = 1.0; // radius of the ball modeling the compact set
    std::string builtin_tag;
};

/// Builtins: harmonic2d (U = E - |q|^2/2), well1d (U = E - q^2),
/// annulus2d (U = -(|q|^2-1)(|q|^2-4)/4 + E). `energy` shifts U additively;
/// pass the builtin default via make_builtin_potential(name).
PotentialSpec make_builtin_potential(const std::string& name, std::optional<double> energy = {});
PotentialSpec make_polynomial_potential(Polynomial poly, double energy_shift);

double eval_U(const PotentialSpec& spec, const Vec& q);
/// Metric gradient of U (covector raised through the chart).
Vec eval_gradU(const PotentialSpec& spec, const MetricChart& chart, const Vec& q);
/// Coordinate Hessian for flat charts; covariant Hessian (Christoffel
/// corrected) for Conformal2D.
Mat eval_hessU(const PotentialSpec& spec, const MetricChart& chart, const Vec& q);

/// Spectral norm of the Hessian as a g-symmetric endomorphism.
double hess_norm(const PotentialSpec& spec, const MetricChart& chart, const Vec& q);
double grad_norm(const PotentialSpec& spec, const MetricChart& chart, const Vec& q);

struct HypothesisReport {
    bool reg_ok = false;
    double reg_min_grad = 0.0;        // min |grad U| on the sampled zero band
    double ac1a_min_grad = 0.0;       // min |grad U| outside the compact set
    double ac1b_max_ratio = 0.0;      // max |Hess U| / |grad U| there
    bool ac1a_ok = false;
    bool ac2_decreasing = false;
    std::vector<std::pair<double, double>> ac2_trend; // (radius, max ratio)
    std::vector<int> lnk_betti;       // filled by the homology module
    bool lnk_ok = false;
    std::string notes;
};

/// Scale-aware default threshold for the regular-value check.
double default_grad_tol(const PotentialSpec& spec, const Box& bbox, int grid_n);

/// Scans grid cells where U changes sign; reg_ok iff the zero band exists
/// and |grad U| >= tol_grad throughout it.
HypothesisReport check_reg(const PotentialSpec& spec, const MetricChart& chart,
                           const Box& bbox, int grid_n, double tol_grad);

/// Shell-sampling diagnostics for (AC1a), (AC1b), (AC2). Sampling only,
/// never a certificate.
HypothesisReport check_asymptotic(const PotentialSpec& spec, const MetricChart& chart,
                                  const std::vector<double>& radii, int samples_per_shell);

/// f = U / sqrt(1 + |grad U|^2), the barrier-gap function.
double qb_function(const PotentialSpec& spec, const MetricChart& chart, const Vec& q);

/// Q_B = { f > sqrt(2) delta }.
bool in_qb(const PotentialSpec& spec, const MetricChart& chart, const Vec& q, double delta);

/// Minimal grid-graph distance between the sampled level {U = delta} and the
/// sampled set Q_B (Dijkstra over grid cells; metric edge lengths for
/// Conformal2D). Throws if Q_B is empty ("delta too large") or the zero
/// level is missing.
double estimate_qb_distance(const PotentialSpec& spec, const MetricChart& chart,
                            double delta, const Box& bbox, int grid_n);

/// Largest delta from a geometric ladder such that the band {|U| <= delta}
/// keeps |grad U| above half its zero-level minimum. Heuristic stand-in for
/// the isotopy threshold of the level sets {U = +-delta}.
double isotopy_delta_estimate(const PotentialSpec& spec, const MetricChart& chart,
                              const Box& bbox, int grid_n);

double max_U_on_box(const PotentialSpec& spec, const Box& bbox, int grid_n);

} // namespace porbit
