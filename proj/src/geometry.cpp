#include "porbit/geometry.hpp"

#include <cmath>
#include <limits>

namespace porbit {

void require_finite(const Vec& q, const char* what) {
    if (!q.allFinite())
        throw std::domain_error(std::string(what) + ": non-finite input");
}

MetricChart MetricChart::euclidean(int dimension) {
    if (dimension < 1) throw GeometryError("dimension must be positive");
    return MetricChart(dimension, MetricFamily::Euclidean);
}

MetricChart MetricChart::flat_torus(const Vec& periods) {
    if (periods.size() < 1) throw GeometryError("flat torus needs at least one period");
    if ((periods.array() <= 0.0).any())
        throw GeometryError("flat torus periods must be strictly positive");
    MetricChart c(static_cast<int>(periods.size()), MetricFamily::FlatTorus);
    c.periods_ = periods;
    return c;
}

MetricChart MetricChart::conformal2d(ScalarField phi) {
    if (!phi.value || !phi.grad || !phi.hess)
        throw GeometryError("conformal factor needs value, gradient and hessian providers");
    MetricChart c(2, MetricFamily::Conformal2D);
    c.phi_ = std::move(phi);
    return c;
}

Mat MetricChart::metric(const Vec& q) const {
    require_finite(q, "metric");
    if (is_flat()) return Mat::Identity(dim_, dim_);
    return std::exp(2.0 * phi_.value(q)) * Mat::Identity(2, 2);
}

std::vector<Mat> MetricChart::metric_derivative(const Vec& q) const {
    require_finite(q, "metric_derivative");
    std::vector<Mat> dg(dim_, Mat::Zero(dim_, dim_));
    if (!is_flat()) {
        const Vec dphi = phi_.grad(q);
        const double factor = std::exp(2.0 * phi_.value(q));
        for (int k = 0; k < dim_; ++k)
            dg[k] = 2.0 * dphi[k] * factor * Mat::Identity(2, 2);
    }
    return dg;
}

std::vector<Mat> MetricChart::christoffel(const Vec& q) const {
    require_finite(q, "christoffel");
    std::vector<Mat> gamma(dim_, Mat::Zero(dim_, dim_));
    if (is_flat()) return gamma;
    // Gamma^i_{jk} = d^i_j dphi_k + d^i_k dphi_j - delta_{jk} dphi^i
    const Vec dphi = phi_.grad(q);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                double v = 0.0;
                if (i == j) v += dphi[k];
                if (i == k) v += dphi[j];
                if (j == k) v -= dphi[i];
                gamma[i](j, k) = v;
            }
    return gamma;
}

Vec MetricChart::covariant_accel(const Vec& q, const Vec& v, const Vec& a) const {
    require_finite(q, "covariant_accel");
    require_finite(v, "covariant_accel");
    require_finite(a, "covariant_accel");
    if (is_flat()) return a;
    const auto gamma = christoffel(q);
    Vec out = a;
    for (int i = 0; i < dim_; ++i) out[i] += v.dot(gamma[i] * v);
    return out;
}

Vec MetricChart::metric_gradient(const Vec& q, const Vec& dU) const {
    require_finite(q, "metric_gradient");
    if (is_flat()) return dU;
    const Mat g = metric(q);
    Eigen::LLT<Mat> llt(g);
    if (llt.info() != Eigen::Success)
        throw GeometryError("metric tensor numerically non-SPD");
    return llt.solve(dU);
}

double MetricChart::inner(const Vec& q, const Vec& v, const Vec& w) const {
    if (is_flat()) return v.dot(w);
    return std::exp(2.0 * phi_.value(q)) * v.dot(w);
}

double MetricChart::norm(const Vec& q, const Vec& v) const {
    return std::sqrt(std::max(0.0, inner(q, v, v)));
}

BoundedGeometryReport MetricChart::check_bounded_geometry(const Box& bbox, int grid_n) const {
    BoundedGeometryReport rep;
    if (family_ == MetricFamily::Euclidean) {
        rep.inj_radius = std::numeric_limits<double>::infinity();
        rep.curvature_bound = 0.0;
        rep.certified = true;
        rep.note = "flat";
        return rep;
    }
    if (family_ == MetricFamily::FlatTorus) {
        rep.inj_radius = 0.5 * periods_.minCoeff();
        rep.curvature_bound = 0.0;
        rep.certified = true;
        rep.note = "flat torus, inj = half the shortest closed geodesic";
        return rep;
    }
    if (grid_n < 2) throw GeometryError("bounded geometry grid needs >= 2 nodes per axis");
    // Sample Gauss curvature K = -e^{-2 phi} (Laplacian phi) on the grid,
    // |grad K| by central differences of the sampled field.
    const int nx = grid_n, ny = grid_n;
    const double hx = (bbox.hi[0] - bbox.lo[0]) / (nx - 1);
    const double hy = (bbox.hi[1] - bbox.lo[1]) / (ny - 1);
    Mat K(nx, ny);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            Vec q(2);
            q << bbox.lo[0] + i * hx, bbox.lo[1] + j * hy;
            const double lap = phi_.hess(q).trace();
            K(i, j) = -std::exp(-2.0 * phi_.value(q)) * lap;
        }
    double maxK = 0.0, maxdK = 0.0;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            maxK = std::max(maxK, std::abs(K(i, j)));
            if (i > 0 && i + 1 < nx && j > 0 && j + 1 < ny) {
                const double dx = (K(i + 1, j) - K(i - 1, j)) / (2 * hx);
                const double dy = (K(i, j + 1) - K(i, j - 1)) / (2 * hy);
                maxdK = std::max(maxdK, std::hypot(dx, dy));
            }
        }
    rep.inj_radius = 0.0; // not certified for this family
    rep.curvature_bound = maxK;
    rep.curvature_grad_bound = maxdK;
    rep.certified = false;
    rep.note = "sampled, not certified";
    return rep;
}

} // namespace porbit
