#include "porbit/potential.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <queue>

namespace porbit {

namespace {

/// Row-major multi-index walker over an n-dimensional lattice.
struct Lattice {
    std::vector<int> shape;
    long long total;

    explicit Lattice(int dim, int per_axis) : shape(dim, per_axis) {
        total = 1;
        for (int s : shape) total *= s;
    }
    std::vector<int> unpack(long long flat) const {
        std::vector<int> idx(shape.size());
        for (int d = static_cast<int>(shape.size()) - 1; d >= 0; --d) {
            idx[d] = static_cast<int>(flat % shape[d]);
            flat /= shape[d];
        }
        return idx;
    }
    long long pack(const std::vector<int>& idx) const {
        long long flat = 0;
        for (size_t d = 0; d < shape.size(); ++d) flat = flat * shape[d] + idx[d];
        return flat;
    }
};

Vec node_point(const Box& box, const std::vector<int>& idx, int grid_n) {
    Vec q(box.dim());
    for (int d = 0; d < box.dim(); ++d)
        q[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * idx[d] / grid_n;
    return q;
}

Vec cell_center(const Box& box, const std::vector<int>& idx, int grid_n) {
    Vec q(box.dim());
    for (int d = 0; d < box.dim(); ++d)
        q[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * (idx[d] + 0.5) / grid_n;
    return q;
}

std::vector<Vec> shell_points(const Vec& o, double radius, int n, int count) {
    std::vector<Vec> pts;
    if (n == 1) {
        for (double s : {-1.0, 1.0}) {
            Vec q = o;
            q[0] += s * radius;
            pts.push_back(q);
        }
    } else if (n == 2) {
        for (int i = 0; i < count; ++i) {
            const double th = 2.0 * M_PI * i / count;
            Vec q = o;
            q[0] += radius * std::cos(th);
            q[1] += radius * std::sin(th);
            pts.push_back(q);
        }
    } else {
        // Fibonacci sphere
        const double golden = M_PI * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < count; ++i) {
            const double z = 1.0 - 2.0 * (i + 0.5) / count;
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double th = golden * i;
            Vec q = o;
            q[0] += radius * rho * std::cos(th);
            q[1] += radius * rho * std::sin(th);
            q[2] += radius * z;
            pts.push_back(q);
        }
    }
    return pts;
}

} // namespace

Polynomial::Polynomial(int dimension, std::map<std::vector<int>, double> terms)
    : dim_(dimension) {
    for (auto& [exp, c] : terms) {
        if (static_cast<int>(exp.size()) != dimension)
            throw PotentialError("polynomial exponent arity does not match dimension");
        for (int e : exp)
            if (e < 0) throw PotentialError("polynomial exponents must be nonnegative");
        terms_.push_back({exp, c});
    }
}

double Polynomial::value(const Vec& q) const {
    double sum = 0.0;
    for (const auto& t : terms_) {
        double prod = t.coeff;
        for (int d = 0; d < dim_; ++d)
            for (int e = 0; e < t.exp[d]; ++e) prod *= q[d];
        sum += prod;
    }
    return sum;
}

Vec Polynomial::grad(const Vec& q) const {
    Vec g = Vec::Zero(dim_);
    for (const auto& t : terms_)
        for (int d = 0; d < dim_; ++d) {
            if (t.exp[d] == 0) continue;
            double prod = t.coeff * t.exp[d];
            for (int dd = 0; dd < dim_; ++dd) {
                const int e = t.exp[dd] - (dd == d ? 1 : 0);
                for (int i = 0; i < e; ++i) prod *= q[dd];
            }
            g[d] += prod;
        }
    return g;
}

Mat Polynomial::hess(const Vec& q) const {
    Mat h = Mat::Zero(dim_, dim_);
    for (const auto& t : terms_)
        for (int d1 = 0; d1 < dim_; ++d1)
            for (int d2 = 0; d2 < dim_; ++d2) {
                std::vector<int> e(t.exp);
                if (e[d1] == 0) continue;
                double factor = t.coeff * e[d1];
                e[d1] -= 1;
                if (e[d2] == 0) continue;
                factor *= e[d2];
                e[d2] -= 1;
                double prod = factor;
                for (int dd = 0; dd < dim_; ++dd)
                    for (int i = 0; i < e[dd]; ++i) prod *= q[dd];
                h(d1, d2) += prod;
            }
    return h;
}

PotentialSpec make_builtin_potential(const std::string& name, std::optional<double> energy) {
    PotentialSpec spec;
    spec.builtin_tag = name;
    if (name == "harmonic2d") {
        const double e = energy.value_or(1.0);
        spec.dim = 2;
        spec.U = [e](const Vec& q) { return e - 0.5 * q.squaredNorm(); };
        spec.dU = [](const Vec& q) { return Vec(-q); };
        spec.hessU = [](const Vec& q) { return Mat(-Mat::Identity(q.size(), q.size())); };
    } else if (name == "well1d") {
        const double e = energy.value_or(1.0);
        spec.dim = 1;
        spec.U = [e](const Vec& q) { return e - q[0] * q[0]; };
        spec.dU = [](const Vec& q) {
            Vec g(1);
            g[0] = -2.0 * q[0];
            return g;
        };
        spec.hessU = [](const Vec&) {
            Mat h(1, 1);
            h(0, 0) = -2.0;
            return h;
        };
    } else if (name == "annulus2d") {
        const double e = energy.value_or(0.0);
        spec.dim = 2;
        spec.U = [e](const Vec& q) {
            const double s = q.squaredNorm();
            return -0.25 * (s - 1.0) * (s - 4.0) + e;
        };
        spec.dU = [](const Vec& q) {
            const double s = q.squaredNorm();
            return Vec((2.5 - s) * q);
        };
        spec.hessU = [](const Vec& q) {
            const double s = q.squaredNorm();
            Mat h = (2.5 - s) * Mat::Identity(2, 2);
            h -= 2.0 * q * q.transpose();
            return h;
        };
    } else {
        throw PotentialError("unknown builtin potential: " + name);
    }
    spec.base_point = Vec::Zero(spec.dim);
    spec.compact_radius = 3.0;
    return spec;
}

PotentialSpec make_polynomial_potential(Polynomial poly, double energy_shift) {
    PotentialSpec spec;
    spec.dim = poly.dim();
    spec.builtin_tag = "polynomial";
    auto p = std::make_shared<Polynomial>(std::move(poly));
    spec.U = [p, energy_shift](const Vec& q) { return p->value(q) + energy_shift; };
    spec.dU = [p](const Vec& q) { return p->grad(q); };
    spec.hessU = [p](const Vec& q) { return p->hess(q); };
    spec.base_point = Vec::Zero(spec.dim);
    spec.compact_radius = 3.0;
    return spec;
}

double eval_U(const PotentialSpec& spec, const Vec& q) {
    require_finite(q, "eval_U");
    if (!spec.U) throw PotentialError("potential provider missing");
    return spec.U(q);
}

Vec eval_gradU(const PotentialSpec& spec, const MetricChart& chart, const Vec& q) {
    require_finite(q, "eval_gradU");
    if (!spec.dU) throw PotentialError("gradient provider missing");
    return chart.metric_gradient(q, spec.dU(q));
}

Mat eval_hessU(const PotentialSpec& spec, const MetricChart& chart, const Vec& q) {
    require_finite(q, "eval_hessU");
    if (!spec.hessU) throw PotentialError("hessian provider missing");
    Mat h = spec.hessU(q);
    if (!chart.is_flat()) {
        // covariant Hessian: (Hess U)_{ij} = d_i d_j U - Gamma^k_{ij} d_k U
        const auto gamma = chart.christoffel(q);
        const Vec du = spec.dU(q);
        for (int k = 0; k < chart.dim(); ++k) h -= du[k] * gamma[k];
    }
    return h;
}

double grad_norm(const PotentialSpec& spec, const MetricChart& chart, const Vec& q) {
    return chart.norm(q, eval_gradU(spec, chart, q));
}

double hess_norm(const PotentialSpec& spec, const MetricChart& chart, const Vec& q) {
    const Mat h = eval_hessU(spec, chart, q);
    if (chart.is_flat()) {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (h + h.transpose()));
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(0.5 * (h + h.transpose()), chart.metric(q));
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double default_grad_tol(const PotentialSpec& spec, const Box& bbox, int grid_n) {
    double max_abs_u = 0.0;
    Lattice nodes(bbox.dim(), grid_n + 1);
    for (long long f = 0; f < nodes.total; ++f)
        max_abs_u = std::max(max_abs_u, std::abs(eval_U(spec, node_point(bbox, nodes.unpack(f), grid_n))));
    return 1e-3 * max_abs_u / bbox.diameter();
}

double max_U_on_box(const PotentialSpec& spec, const Box& bbox, int grid_n) {
    double max_u = -std::numeric_limits<double>::infinity();
    Lattice nodes(bbox.dim(), grid_n + 1);
    for (long long f = 0; f < nodes.total; ++f)
        max_u = std::max(max_u, eval_U(spec, node_point(bbox, nodes.unpack(f), grid_n)));
    return max_u;
}

HypothesisReport check_reg(const PotentialSpec& spec, const MetricChart& chart,
                           const Box& bbox, int grid_n, double tol_grad) {
    if (grid_n < 8) throw PotentialError("check_reg needs grid_n >= 8");
    HypothesisReport rep;
    const int n = bbox.dim();
    Lattice nodes(n, grid_n + 1);
    std::vector<double> u(nodes.total);
    for (long long f = 0; f < nodes.total; ++f)
        u[f] = eval_U(spec, node_point(bbox, nodes.unpack(f), grid_n));

    Lattice cells(n, grid_n);
    const int corners = 1 << n;
    bool found = false;
    double min_grad = std::numeric_limits<double>::infinity();
    for (long long f = 0; f < cells.total; ++f) {
        const auto idx = cells.unpack(f);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int c = 0; c < corners; ++c) {
            auto nidx = idx;
            for (int d = 0; d < n; ++d)
                if (c & (1 << d)) nidx[d] += 1;
            const double v = u[nodes.pack(nidx)];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (lo <= 0.0 && hi >= 0.0 && (lo != 0.0 || hi != 0.0)) {
            found = true;
            for (int c = 0; c < corners; ++c) {
                auto nidx = idx;
                for (int d = 0; d < n; ++d)
                    if (c & (1 << d)) nidx[d] += 1;
                min_grad = std::min(min_grad, grad_norm(spec, chart, node_point(bbox, nidx, grid_n)));
            }
        }
    }
    if (!found) {
        rep.reg_ok = false;
        rep.reg_min_grad = 0.0;
        rep.notes = "zero level empty in box";
        return rep;
    }
    rep.reg_min_grad = min_grad;
    rep.reg_ok = min_grad >= tol_grad;
    if (!rep.reg_ok) rep.notes = "gradient vanishes on the zero band";
    return rep;
}

HypothesisReport check_asymptotic(const PotentialSpec& spec, const MetricChart& chart,
                                  const std::vector<double>& radii, int samples_per_shell) {
    HypothesisReport rep;
    for (size_t i = 1; i < radii.size(); ++i)
        if (radii[i] <= radii[i - 1])
            throw PotentialError("check_asymptotic: radii must be strictly increasing");
    double min_grad = std::numeric_limits<double>::infinity();
    double max_ratio = 0.0;
    rep.ac1a_ok = true;
    for (double radius : radii) {
        double shell_max_ratio = 0.0;
        for (const Vec& q : shell_points(spec.base_point, radius, spec.dim, samples_per_shell)) {
            const double g = grad_norm(spec, chart, q);
            const double h = hess_norm(spec, chart, q);
            min_grad = std::min(min_grad, g);
            if (g < 1e-14) {
                rep.ac1a_ok = false;
                rep.notes += "gradient numerically zero on shell r=" + std::to_string(radius) + "; ";
                shell_max_ratio = std::numeric_limits<double>::infinity();
            } else {
                shell_max_ratio = std::max(shell_max_ratio, h / g);
            }
        }
        max_ratio = std::max(max_ratio, shell_max_ratio);
        rep.ac2_trend.emplace_back(radius, shell_max_ratio);
    }
    rep.ac1a_min_grad = min_grad;
    rep.ac1b_max_ratio = max_ratio;
    if (min_grad < 1e-14) rep.ac1a_ok = false;
    rep.ac2_decreasing = true;
    for (size_t i = 1; i < rep.ac2_trend.size(); ++i)
        if (rep.ac2_trend[i].second > rep.ac2_trend[i - 1].second * (1.0 + 1e-9) + 1e-15)
            rep.ac2_decreasing = false;
    if (rep.ac2_decreasing) rep.notes += "ratio trend consistent with decay (sampled); ";
    return rep;
}

double qb_function(const PotentialSpec& spec, const MetricChart& chart, const Vec& q) {
    const double u = eval_U(spec, q);
    const double g = grad_norm(spec, chart, q);
    return u / std::sqrt(1.0 + g * g);
}

bool in_qb(const PotentialSpec& spec, const MetricChart& chart, const Vec& q, double delta) {
    return qb_function(spec, chart, q) > std::sqrt(2.0) * delta;
}

double estimate_qb_distance(const PotentialSpec& spec, const MetricChart& chart,
                            double delta, const Box& bbox, int grid_n) {
    if (delta <= 0.0) throw PotentialError("estimate_qb_distance: delta must be positive");
    const int n = bbox.dim();
    Lattice cells(n, grid_n);
    Lattice nodes(n, grid_n + 1);
    std::vector<double> u_node(nodes.total);
    for (long long f = 0; f < nodes.total; ++f)
        u_node[f] = eval_U(spec, node_point(bbox, nodes.unpack(f), grid_n));

    // sources: cells whose corners straddle {U = delta}; targets: Q_B cells
    std::vector<char> source(cells.total, 0), target(cells.total, 0);
    bool any_source = false, any_target = false;
    const int corners = 1 << n;
    for (long long f = 0; f < cells.total; ++f) {
        const auto idx = cells.unpack(f);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int c = 0; c < corners; ++c) {
            auto nidx = idx;
            for (int d = 0; d < n; ++d)
                if (c & (1 << d)) nidx[d] += 1;
            const double v = u_node[nodes.pack(nidx)] - delta;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (lo <= 0.0 && hi >= 0.0) {
            source[f] = 1;
            any_source = true;
        }
        if (in_qb(spec, chart, cell_center(bbox, idx, grid_n), delta)) {
            target[f] = 1;
            any_target = true;
        }
    }
    if (!any_source) throw PotentialError("no zero level: {U = delta} not found in box");
    if (!any_target) throw PotentialError("delta too large: Q_B empty");

    // multi-source Dijkstra over the cell graph
    std::vector<double> dist(cells.total, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, long long>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    for (long long f = 0; f < cells.total; ++f)
        if (source[f]) {
            dist[f] = 0.0;
            heap.push({0.0, f});
        }
    while (!heap.empty()) {
        auto [d0, f] = heap.top();
        heap.pop();
        if (d0 > dist[f]) continue;
        if (target[f]) return d0;
        const auto idx = cells.unpack(f);
        const Vec here = cell_center(bbox, idx, grid_n);
        for (int d = 0; d < n; ++d)
            for (int step : {-1, 1}) {
                auto nidx = idx;
                nidx[d] += step;
                if (nidx[d] < 0 || nidx[d] >= grid_n) continue;
                const long long nf = cells.pack(nidx);
                const Vec there = cell_center(bbox, nidx, grid_n);
                double w = (there - here).norm();
                if (!chart.is_flat())
                    w *= std::exp(chart.phi().value(0.5 * (here + there)));
                if (dist[f] + w < dist[nf]) {
                    dist[nf] = dist[f] + w;
                    heap.push({dist[nf], nf});
                }
            }
    }
    throw PotentialError("Q_B unreachable from the delta level set");
}

double isotopy_delta_estimate(const PotentialSpec& spec, const MetricChart& chart,
                              const Box& bbox, int grid_n) {
    const int n = bbox.dim();
    Lattice cells(n, grid_n);
    std::vector<double> u(cells.total), g(cells.total);
    for (long long f = 0; f < cells.total; ++f) {
        const Vec q = cell_center(bbox, cells.unpack(f), grid_n);
        u[f] = eval_U(spec, q);
        g[f] = grad_norm(spec, chart, q);
    }
    const double max_u = *std::max_element(u.begin(), u.end());
    if (max_u <= 0.0) throw PotentialError("negative set empty: U <= 0 on the whole box");
    const double band0 = 0.05 * max_u;
    double zero_band_min = std::numeric_limits<double>::infinity();
    for (long long f = 0; f < cells.total; ++f)
        if (std::abs(u[f]) <= band0) zero_band_min = std::min(zero_band_min, g[f]);
    if (!std::isfinite(zero_band_min) || zero_band_min <= 0.0)
        return 1e-3 * max_u;
    double d = 0.5 * max_u;
    for (int step = 0; step < 40; ++step, d *= 0.8) {
        double band_min = std::numeric_limits<double>::infinity();
        for (long long f = 0; f < cells.total; ++f)
            if (std::abs(u[f]) <= d) band_min = std::min(band_min, g[f]);
        if (band_min >= 0.5 * zero_band_min) return d;
    }
    return 1e-3 * max_u;
}

} // namespace porbit
