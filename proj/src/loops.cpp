#include "porbit/loops.hpp"
#include "porbit/potential.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace porbit {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::shared_ptr<const TrigTable> TrigTable::get(int modes, int samples) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::shared_ptr<const TrigTable>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto key = std::make_pair(modes, samples);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    auto table = std::make_shared<TrigTable>();
    table->modes = modes;
    table->samples = samples;
    table->cosv.resize(modes + 1, samples);
    table->sinv.resize(modes + 1, samples);
    for (int k = 0; k <= modes; ++k)
        for (int m = 0; m < samples; ++m) {
            const double arg = kTwoPi * k * m / samples;
            table->cosv(k, m) = std::cos(arg);
            table->sinv(k, m) = std::sin(arg);
        }
    cache[key] = table;
    return table;
}

FourierLoop::FourierLoop(int dimension, int modes, int samples)
    : dim_(dimension), modes_(modes), samples_(samples),
      coeffs_(Vec::Zero(dimension * (2 * modes + 1))) {
    if (dimension < 1) throw std::invalid_argument("loop dimension must be positive");
    if (modes < 0) throw std::invalid_argument("mode count must be nonnegative");
    if (samples < 4 * modes + 1)
        throw std::invalid_argument("need M >= 4K+1 quadrature nodes (anti-aliasing)");
    table_ = TrigTable::get(modes, samples);
}

FourierLoop FourierLoop::constant(const Vec& point, int modes, int samples) {
    FourierLoop x(static_cast<int>(point.size()), modes, samples);
    x.a(0) = point;
    return x;
}

FourierLoop FourierLoop::from_samples(const Mat& samples, int modes) {
    const int m = static_cast<int>(samples.rows());
    const int n = static_cast<int>(samples.cols());
    FourierLoop x(n, modes, m);
    const TrigTable& tab = x.table();
    for (int j = 0; j < n; ++j) {
        double mean = 0.0;
        for (int i = 0; i < m; ++i) mean += samples(i, j);
        x.a(0)[j] = mean / m;
    }
    for (int k = 1; k <= modes; ++k)
        for (int j = 0; j < n; ++j) {
            double ca = 0.0, sb = 0.0;
            for (int i = 0; i < m; ++i) {
                ca += samples(i, j) * tab.cosv(k, i);
                sb += samples(i, j) * tab.sinv(k, i);
            }
            x.a(k)[j] = 2.0 * ca / m;
            x.b(k)[j] = 2.0 * sb / m;
        }
    return x;
}

Eigen::VectorBlock<const Vec> FourierLoop::a(int k) const {
    return coeffs_.segment(k == 0 ? 0 : dim_ * (2 * k - 1), dim_);
}
Eigen::VectorBlock<const Vec> FourierLoop::b(int k) const {
    return coeffs_.segment(dim_ * 2 * k, dim_);
}
Eigen::VectorBlock<Vec> FourierLoop::a(int k) {
    return coeffs_.segment(k == 0 ? 0 : dim_ * (2 * k - 1), dim_);
}
Eigen::VectorBlock<Vec> FourierLoop::b(int k) {
    return coeffs_.segment(dim_ * 2 * k, dim_);
}

Vec FourierLoop::value_at(double t) const {
    Vec out = a(0);
    for (int k = 1; k <= modes_; ++k) {
        const double arg = kTwoPi * k * t;
        out += std::cos(arg) * a(k) + std::sin(arg) * b(k);
    }
    return out;
}

Vec FourierLoop::velocity_at(double t) const {
    Vec out = Vec::Zero(dim_);
    for (int k = 1; k <= modes_; ++k) {
        const double w = kTwoPi * k;
        const double arg = w * t;
        out += w * (-std::sin(arg) * a(k) + std::cos(arg) * b(k));
    }
    return out;
}

Vec FourierLoop::accel_at(double t) const {
    Vec out = Vec::Zero(dim_);
    for (int k = 1; k <= modes_; ++k) {
        const double w = kTwoPi * k;
        const double arg = w * t;
        out -= w * w * (std::cos(arg) * a(k) + std::sin(arg) * b(k));
    }
    return out;
}

Mat FourierLoop::sample_values() const {
    Mat out(dim_, samples_);
    out.colwise() = a(0);
    for (int k = 1; k <= modes_; ++k)
        out.noalias() += a(k) * table_->cosv.row(k) + b(k) * table_->sinv.row(k);
    return out;
}

Mat FourierLoop::sample_velocities() const {
    Mat out = Mat::Zero(dim_, samples_);
    for (int k = 1; k <= modes_; ++k) {
        const double w = kTwoPi * k;
        out.noalias() += w * (b(k) * table_->cosv.row(k) - a(k) * table_->sinv.row(k));
    }
    return out;
}

Mat FourierLoop::sample_accels() const {
    Mat out = Mat::Zero(dim_, samples_);
    for (int k = 1; k <= modes_; ++k) {
        const double w2 = kTwoPi * k * kTwoPi * k;
        out.noalias() -= w2 * (a(k) * table_->cosv.row(k) + b(k) * table_->sinv.row(k));
    }
    return out;
}

FourierLoop FourierLoop::time_shifted(double theta) const {
    FourierLoop out(dim_, modes_, samples_);
    out.a(0) = a(0);
    for (int k = 1; k <= modes_; ++k) {
        const double c = std::cos(kTwoPi * k * theta);
        const double s = std::sin(kTwoPi * k * theta);
        out.a(k) = c * a(k) + s * b(k);
        out.b(k) = c * b(k) - s * a(k);
    }
    return out;
}

double energy(const FourierLoop& x, const MetricChart& chart) {
    if (chart.is_flat()) {
        // Parseval: E = pi^2 sum_k k^2 (|a_k|^2 + |b_k|^2)
        double sum = 0.0;
        for (int k = 1; k <= x.modes(); ++k)
            sum += static_cast<double>(k) * k * (x.a(k).squaredNorm() + x.b(k).squaredNorm());
        return M_PI * M_PI * sum;
    }
    const Mat pos = x.sample_values();
    const Mat vel = x.sample_velocities();
    double sum = 0.0;
    for (int m = 0; m < x.samples(); ++m)
        sum += chart.inner(pos.col(m), vel.col(m), vel.col(m));
    return 0.5 * sum / x.samples();
}

double potential_integral(const FourierLoop& x, const PotentialSpec& spec) {
    const Mat pos = x.sample_values();
    double sum = 0.0;
    for (int m = 0; m < x.samples(); ++m) sum += spec.U(pos.col(m));
    return sum / x.samples();
}

double h1_inner(const FourierLoop& xi, const FourierLoop& eta) {
    if (xi.dim() != eta.dim() || xi.modes() != eta.modes())
        throw std::invalid_argument("h1_inner: mode/dimension mismatch");
    double sum = xi.a(0).dot(eta.a(0));
    for (int k = 1; k <= xi.modes(); ++k) {
        const double w = 1.0 + kTwoPi * k * kTwoPi * k;
        sum += 0.5 * w * (xi.a(k).dot(eta.a(k)) + xi.b(k).dot(eta.b(k)));
    }
    return sum;
}

double l2_pairing(const FourierLoop& w, const FourierLoop& xi) {
    if (w.dim() != xi.dim() || w.modes() != xi.modes())
        throw std::invalid_argument("l2_pairing: mode/dimension mismatch");
    double sum = w.a(0).dot(xi.a(0));
    for (int k = 1; k <= w.modes(); ++k)
        sum += 0.5 * (w.a(k).dot(xi.a(k)) + w.b(k).dot(xi.b(k)));
    return sum;
}

FourierLoop precondition(const FourierLoop& w) {
    FourierLoop out = w;
    for (int k = 1; k <= w.modes(); ++k) {
        const double s = 1.0 / (1.0 + kTwoPi * k * kTwoPi * k);
        out.a(k) = s * w.a(k);
        out.b(k) = s * w.b(k);
    }
    return out;
}

} // namespace porbit
