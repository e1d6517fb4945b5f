#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace porbit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Axis-aligned box used by sampling diagnostics and the cubical grid.
struct Box {
    Vec lo;
    Vec hi;

    int dim() const { return static_cast<int>(lo.size()); }
    double diameter() const { return (hi - lo).norm(); }
    bool contains(const Vec& q) const {
        for (int i = 0; i < dim(); ++i)
            if (q[i] < lo[i] || q[i] > hi[i]) return false;
        return true;
    }
};

struct GeometryError : std::runtime_error {
    explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Scalar field with analytic first and second derivatives, used as the
/// conformal factor phi of the Conformal2D family.
struct ScalarField {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
    std::function<Mat(const Vec&)> hess;
};

enum class MetricFamily { Euclidean, FlatTorus, Conformal2D };

struct BoundedGeometryReport {
    double inj_radius = 0.0;        // +inf for Euclidean
    double curvature_bound = 0.0;   // sup |K| (sampled for Conformal2D)
    double curvature_grad_bound = 0.0;
    bool certified = false;         // exact for flat families, sampled otherwise
    std::string note;
};

/// Configuration-space model: R^n carrying one of three metric families.
/// FlatTorus is represented on the universal cover; loops stay in the cover.
class MetricChart {
public:
    static MetricChart euclidean(int dimension);
    static MetricChart flat_torus(const Vec& periods);
    static MetricChart conformal2d(ScalarField phi);

    int dim() const { return dim_; }
    MetricFamily family() const { return family_; }
    bool is_flat() const { return family_ != MetricFamily::Conformal2D; }
    const Vec& periods() const { return periods_; }
    const ScalarField& phi() const { return phi_; }

    /// Metric tensor g(q); identity for flat families, e^{2 phi} id otherwise.
    Mat metric(const Vec& q) const;

    /// Christoffel symbols; gamma[i](j,k) = Gamma^i_{jk}, symmetric in (j,k).
    std::vector<Mat> christoffel(const Vec& q) const;

    /// Coordinate derivatives of the metric; dg[k] = d g / d q^k.
    std::vector<Mat> metric_derivative(const Vec& q) const;

    /// a^i + Gamma^i_{jk} v^j v^k -- the covariant acceleration along a curve
    /// with position q, velocity v and coordinate acceleration a.
    Vec covariant_accel(const Vec& q, const Vec& v, const Vec& a) const;

    /// g(q)^{-1} dU: raises a covector to the metric gradient vector.
    Vec metric_gradient(const Vec& q, const Vec& dU) const;

    double norm(const Vec& q, const Vec& v) const;       // |v|_g
    double inner(const Vec& q, const Vec& v, const Vec& w) const;

    /// Injectivity radius / curvature diagnostics. Exact for the flat
    /// families; grid-sampled (not certified) for Conformal2D.
    BoundedGeometryReport check_bounded_geometry(const Box& bbox, int grid_n) const;

private:
    MetricChart(int dim, MetricFamily family) : dim_(dim), family_(family) {}

    int dim_;
    MetricFamily family_;
    Vec periods_;     // FlatTorus only
    ScalarField phi_; // Conformal2D only
};

void require_finite(const Vec& q, const char* what);

} // namespace porbit
