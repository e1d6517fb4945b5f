#pragma once

#include "porbit/loops.hpp"
#include "porbit/potential.hpp"

#include <optional>

namespace porbit {

/// Penalty P(tau) = e^{-tau} + e^{tau/2} and its derivative
/// P'(tau) = -e^{-tau} + e^{tau/2}/2.
double penalty(double tau);
double penalty_prime(double tau);

struct ActionGradient {
    FourierLoop xi;   // H^1 gradient field in the loop's Fourier basis
    double dtau = 0;  // partial derivative in the period variable
    double norm = 0;  // sqrt(h1_inner(xi,xi) + dtau^2)
};

/// A point (loop, tau) of the free-period domain with a lazily cached
/// evaluation of L_eps. Caches are owned by a single solver worker.
struct ActionPoint {
    FourierLoop loop;
    double tau = 0.0;

    struct Cache {
        double eps = 0.0;
        double value = 0.0;
        std::optional<ActionGradient> gradient;
    };
    mutable std::optional<Cache> cache;

    ActionPoint(FourierLoop l, double t) : loop(std::move(l)), tau(t) {}
    void invalidate() const { cache.reset(); }
};

struct ResidualReport {
    double el_resid_sup = 0.0;      // sup_t |xddot - e^{2 tau} grad U|_g
    double energy_ident_sup = 0.0;  // sup_t of the energy-identity defect
    double crit_value_gap_U = 0.0;  // |L_eps - 2 e^tau U - 3/2 eps e^{tau/2}|
    double crit_value_gap_E = 0.0;  // |L_eps - 2 e^-tau E - eps (2 e^-tau + e^{tau/2}/2)|
};

/// L_eps(x, tau) = e^{-tau} E(x) + e^{tau} U(x) + eps P(tau).
double action_value(const ActionPoint& p, const PotentialSpec& spec,
                    const MetricChart& chart, double eps);

/// Weak-form H^1 gradient: the L^2 differential is paired against the
/// Fourier basis by quadrature and preconditioned; the tau part is exact.
/// h1_inner(xi, eta) + dtau * s is the directional derivative along (eta, s).
ActionGradient action_gradient(const ActionPoint& p, const PotentialSpec& spec,
                               const MetricChart& chart, double eps);

/// Cached variants keyed on eps.
double action_value_cached(const ActionPoint& p, const PotentialSpec& spec,
                           const MetricChart& chart, double eps);
const ActionGradient& action_gradient_cached(const ActionPoint& p, const PotentialSpec& spec,
                                             const MetricChart& chart, double eps);

double el_residual(const ActionPoint& p, const PotentialSpec& spec, const MetricChart& chart);
double energy_identity_residual(const ActionPoint& p, const PotentialSpec& spec,
                                const MetricChart& chart, double eps);
std::pair<double, double> critical_value_identities(const ActionPoint& p, const PotentialSpec& spec,
                                                    const MetricChart& chart, double eps);
ResidualReport residual_report(const ActionPoint& p, const PotentialSpec& spec,
                               const MetricChart& chart, double eps);

} // namespace porbit
