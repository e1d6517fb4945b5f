#pragma once

#include "porbit/geometry.hpp"

#include <memory>

namespace porbit {

struct PotentialSpec;

/// Shared cos/sin tables at the uniform quadrature nodes t_m = m/M for
/// modes k = 0..K. Immutable once built; cached per (K, M).
struct TrigTable {
    int modes;
    int samples;
    Mat cosv; // (K+1) x M, cos(2 pi k t_m)
    Mat sinv; // (K+1) x M

    static std::shared_ptr<const TrigTable> get(int modes, int samples);
};

/// Truncated Fourier representation of a loop x: S^1 -> R^n,
///   x(t) = a_0 + sum_{k=1..K} (a_k cos 2 pi k t + b_k sin 2 pi k t),
/// together with the number M of uniform quadrature nodes.
///
/// Packed coefficient layout: [a_0 | a_1 | b_1 | ... | a_K | b_K], each block
/// of size n. The same type represents tangent fields, which share the
/// loop's basis (Galerkin truncation).
class FourierLoop {
public:
    FourierLoop(int dimension, int modes, int samples);

    static FourierLoop constant(const Vec& point, int modes, int samples);
    /// Least-squares fit (truncated DFT) of M sample points; rows of
    /// `samples` are the loop values at t_m = m/M.
    static FourierLoop from_samples(const Mat& samples, int modes);

    int dim() const { return dim_; }
    int modes() const { return modes_; }
    int samples() const { return samples_; }
    int coeff_count() const { return static_cast<int>(coeffs_.size()); }

    Vec& coeffs() { return coeffs_; }
    const Vec& coeffs() const { return coeffs_; }

    Eigen::VectorBlock<const Vec> a(int k) const; // k = 0..K
    Eigen::VectorBlock<const Vec> b(int k) const; // k = 1..K
    Eigen::VectorBlock<Vec> a(int k);
    Eigen::VectorBlock<Vec> b(int k);

    Vec value_at(double t) const;
    Vec velocity_at(double t) const;
    Vec accel_at(double t) const;

    /// Values / derivatives at all quadrature nodes; columns are nodes.
    Mat sample_values() const;
    Mat sample_velocities() const;
    Mat sample_accels() const;

    /// Loop t -> x(t + theta); a pure coefficient rotation.
    FourierLoop time_shifted(double theta) const;

    const TrigTable& table() const { return *table_; }

private:
    int dim_;
    int modes_;
    int samples_;
    Vec coeffs_;
    std::shared_ptr<const TrigTable> table_;
};

/// Kinetic energy E(x) = 1/2 int_0^1 |xdot|^2_g dt. Exact (Parseval) for
/// flat charts, quadrature otherwise.
double energy(const FourierLoop& x, const MetricChart& chart);

/// Potential integral  U(x) = int_0^1 U(x(t)) dt  by the M-node rectangle rule.
double potential_integral(const FourierLoop& x, const PotentialSpec& spec);

/// H^1 inner product of tangent fields in the flat Parseval form:
///   <xi,eta>_1 = xi_0 . eta_0 + 1/2 sum_k (1 + (2 pi k)^2)(a_k.a_k' + b_k.b_k').
double h1_inner(const FourierLoop& xi, const FourierLoop& eta);

/// L^2 pairing of two Fourier fields, int <w, xi> dt in coefficient form.
double l2_pairing(const FourierLoop& w, const FourierLoop& xi);

/// Divides the mode-k blocks by (1 + (2 pi k)^2) so that
/// h1_inner(precondition(w), xi) == l2_pairing(w, xi) for every xi.
FourierLoop precondition(const FourierLoop& w);

} // namespace porbit
