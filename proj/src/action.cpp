#include "porbit/action.hpp"

#include <cmath>

namespace porbit {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kTauRange = 700.0; // exp overflow guard

void check_tau(double tau) {
    if (!std::isfinite(tau) || std::abs(tau) > kTauRange)
        throw std::range_error("tau out of range: exp would overflow");
}
} // namespace

double penalty(double tau) {
    check_tau(tau);
    return std::exp(-tau) + std::exp(0.5 * tau);
}

double penalty_prime(double tau) {
    check_tau(tau);
    return -std::exp(-tau) + 0.5 * std::exp(0.5 * tau);
}

double action_value(const ActionPoint& p, const PotentialSpec& spec,
                    const MetricChart& chart, double eps) {
    check_tau(p.tau);
    const double e = energy(p.loop, chart);
    const double u = potential_integral(p.loop, spec);
    double value = std::exp(-p.tau) * e + std::exp(p.tau) * u;
    if (eps != 0.0) value += eps * penalty(p.tau);
    return value;
}

ActionGradient action_gradient(const ActionPoint& p, const PotentialSpec& spec,
                               const MetricChart& chart, double eps) {
    check_tau(p.tau);
    const FourierLoop& x = p.loop;
    const int n = x.dim();
    const int K = x.modes();
    const int M = x.samples();
    const double emt = std::exp(-p.tau);
    const double ept = std::exp(p.tau);

    const Mat pos = x.sample_values();
    const Mat vel = x.sample_velocities();

    // alpha pairs with eta-dot, beta with eta (both covector-valued):
    //   alpha = e^{-tau} g xdot
    //   beta  = e^{-tau}/2 (d_k g_{ij}) xdot^i xdot^j + e^{tau} dU
    Mat alpha(n, M), beta(n, M);
    const bool flat = chart.is_flat();
    for (int m = 0; m < M; ++m) {
        const Vec q = pos.col(m);
        const Vec v = vel.col(m);
        if (flat) {
            alpha.col(m) = emt * v;
            beta.col(m) = ept * spec.dU(q);
        } else {
            alpha.col(m) = emt * (chart.metric(q) * v);
            Vec b = ept * spec.dU(q);
            const auto dg = chart.metric_derivative(q);
            for (int k = 0; k < n; ++k) b[k] += 0.5 * emt * v.dot(dg[k] * v);
            beta.col(m) = b;
        }
    }

    // Pair against the Fourier basis (truncated analysis of alpha, beta),
    // convert the L^2 differential to its field representative, precondition.
    FourierLoop w(n, K, M);
    const TrigTable& tab = x.table();
    Vec acc = Vec::Zero(n);
    for (int m = 0; m < M; ++m) acc += beta.col(m);
    w.a(0) = acc / M;
    for (int k = 1; k <= K; ++k) {
        const double om = kTwoPi * k;
        Vec ga = Vec::Zero(n), gb = Vec::Zero(n);
        for (int m = 0; m < M; ++m) {
            const double c = tab.cosv(k, m);
            const double s = tab.sinv(k, m);
            ga += beta.col(m) * c - om * alpha.col(m) * s;
            gb += beta.col(m) * s + om * alpha.col(m) * c;
        }
        w.a(k) = 2.0 * ga / M;
        w.b(k) = 2.0 * gb / M;
    }

    ActionGradient grad{precondition(w), 0.0, 0.0};
    const double e = energy(x, chart);
    const double u = potential_integral(x, spec);
    grad.dtau = -emt * e + ept * u;
    if (eps != 0.0) grad.dtau += eps * penalty_prime(p.tau);
    grad.norm = std::sqrt(h1_inner(grad.xi, grad.xi) + grad.dtau * grad.dtau);
    return grad;
}

double action_value_cached(const ActionPoint& p, const PotentialSpec& spec,
                           const MetricChart& chart, double eps) {
    if (p.cache && p.cache->eps == eps) return p.cache->value;
    ActionPoint::Cache c;
    c.eps = eps;
    c.value = action_value(p, spec, chart, eps);
    p.cache = std::move(c);
    return p.cache->value;
}

const ActionGradient& action_gradient_cached(const ActionPoint& p, const PotentialSpec& spec,
                                             const MetricChart& chart, double eps) {
    if (!(p.cache && p.cache->eps == eps)) action_value_cached(p, spec, chart, eps);
    if (!p.cache->gradient) p.cache->gradient = action_gradient(p, spec, chart, eps);
    return *p.cache->gradient;
}

double el_residual(const ActionPoint& p, const PotentialSpec& spec, const MetricChart& chart) {
    const double e2t = std::exp(2.0 * p.tau);
    const Mat pos = p.loop.sample_values();
    const Mat vel = p.loop.sample_velocities();
    const Mat acc = p.loop.sample_accels();
    double sup = 0.0;
    for (int m = 0; m < p.loop.samples(); ++m) {
        const Vec q = pos.col(m);
        const Vec lhs = chart.covariant_accel(q, vel.col(m), acc.col(m));
        const Vec rhs = e2t * eval_gradU(spec, chart, q);
        sup = std::max(sup, chart.norm(q, lhs - rhs));
    }
    return sup;
}

double energy_identity_residual(const ActionPoint& p, const PotentialSpec& spec,
                                const MetricChart& chart, double eps) {
    const double emt = std::exp(-p.tau);
    const double ept = std::exp(p.tau);
    const double level = eps * penalty_prime(p.tau);
    const Mat pos = p.loop.sample_values();
    const Mat vel = p.loop.sample_velocities();
    double sup = 0.0;
    for (int m = 0; m < p.loop.samples(); ++m) {
        const Vec q = pos.col(m);
        const double kin = 0.5 * emt * chart.inner(q, vel.col(m), vel.col(m));
        sup = std::max(sup, std::abs(kin - ept * eval_U(spec, q) - level));
    }
    return sup;
}

std::pair<double, double> critical_value_identities(const ActionPoint& p, const PotentialSpec& spec,
                                                    const MetricChart& chart, double eps) {
    const double value = action_value(p, spec, chart, eps);
    const double e = energy(p.loop, chart);
    const double u = potential_integral(p.loop, spec);
    const double ept = std::exp(p.tau);
    const double emt = std::exp(-p.tau);
    const double gap_u = std::abs(value - 2.0 * ept * u - 1.5 * eps * std::exp(0.5 * p.tau));
    const double gap_e =
        std::abs(value - 2.0 * emt * e - eps * (2.0 * emt + 0.5 * std::exp(0.5 * p.tau)));
    return {gap_u, gap_e};
}

ResidualReport residual_report(const ActionPoint& p, const PotentialSpec& spec,
                               const MetricChart& chart, double eps) {
    ResidualReport rep;
    rep.el_resid_sup = el_residual(p, spec, chart);
    rep.energy_ident_sup = energy_identity_residual(p, spec, chart, eps);
    std::tie(rep.crit_value_gap_U, rep.crit_value_gap_E) =
        critical_value_identities(p, spec, chart, eps);
    return rep;
}

} // namespace porbit
