#pragma once

#include "porbit/action.hpp"

#include <iosfwd>

namespace porbit {

struct VerifyError : std::runtime_error {
    explicit VerifyError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A critical point converted back to physical time: q(t) = x(t/T), T = e^tau,
/// with momenta p = g(q) qdot and Hamiltonian samples H = |qdot|^2_g/2 - U(q).
/// Rows run over n_samples + 1 uniform times including both endpoints.
struct CriticalOrbit {
    double period = 0.0;
    double tau = 0.0;
    double eps = 0.0;
    std::vector<double> times;
    Mat positions;  // (n_samples+1) x n
    Mat velocities;
    Mat momenta;
    Vec hamiltonian;

    // certificates
    double el_resid_sup = 0.0;
    double energy_ident_sup = 0.0;
    double hamiltonian_dev = 0.0;   // vs the eps-shifted level e^{-tau} eps P'(tau)
    double shooting_closure = -1.0; // filled by shooting_crosscheck
    double shooting_deviation = -1.0;
    double min_U = 0.0;             // containment in the closed negative set
    std::vector<long long> winding; // FlatTorus only
};

/// Inverse reparametrization of an accepted critical point.
CriticalOrbit reconstruct(const ActionPoint& point, double eps, const PotentialSpec& spec,
                          const MetricChart& chart, int n_samples);

struct ShootingResult {
    double closure = 0.0;   // |q(T)-q(0)| + |qdot(T)-qdot(0)|
    double deviation = 0.0; // max distance to the variational orbit samples
};

/// Independent oracle: integrates qddot = grad U (covariant) from the
/// orbit's initial conditions over one period with an adaptive embedded
/// Runge-Kutta pair.
ShootingResult shooting_crosscheck(const CriticalOrbit& orbit, const PotentialSpec& spec,
                                   const MetricChart& chart, double rtol);

/// Per-axis winding of the orbit in the universal cover of a FlatTorus
/// chart; displacements must be integer multiples of the periods.
std::vector<long long> winding_numbers(const CriticalOrbit& orbit, const MetricChart& chart);

/// T-periodic Lagrangian action int_0^T (|qdot|^2/2 + U) dt from the samples
/// (trapezoid rule); equals the free-period action at eps = 0.
double orbit_lagrangian_action(const CriticalOrbit& orbit, const PotentialSpec& spec,
                               const MetricChart& chart);

/// Orbit CSV: header, then rows t, q_1..q_n, p_1..p_n, H.
void write_orbit_csv(const CriticalOrbit& orbit, std::ostream& os);
void write_orbit_csv(const CriticalOrbit& orbit, const std::string& path);

struct StoredOrbit {
    std::vector<double> times;
    Mat positions;
    Mat momenta;
    Vec hamiltonian;
};
StoredOrbit read_orbit_csv(const std::string& path, int dim);

} // namespace porbit
