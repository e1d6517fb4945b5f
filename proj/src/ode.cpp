#include "porbit/ode.hpp"

#include <cmath>

namespace porbit {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// embedded 4th-order weights
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;

} // namespace

std::vector<Vec> integrate_dopri5(const std::function<Vec(double, const Vec&)>& f,
                                  const Vec& y0, double t0, double t1,
                                  const std::vector<double>& t_out,
                                  double rtol, double atol) {
    for (size_t i = 0; i < t_out.size(); ++i) {
        if (t_out[i] < t0 - 1e-12 || t_out[i] > t1 + 1e-12)
            throw OdeError("output time outside the integration interval");
        if (i > 0 && t_out[i] < t_out[i - 1]) throw OdeError("output times must be ascending");
    }
    std::vector<Vec> out;
    out.reserve(t_out.size());

    double t = t0;
    Vec y = y0;
    Vec k1 = f(t, y);
    double h = (t1 - t0) * 1e-4;
    size_t next_out = 0;
    while (next_out < t_out.size() && t_out[next_out] <= t0 + 1e-14) {
        out.push_back(y);
        ++next_out;
    }

    long long steps = 0;
    const long long max_steps = 50'000'000;
    while (t < t1 - 1e-14 * std::max(1.0, std::abs(t1))) {
        if (++steps > max_steps) throw OdeError("integrator exceeded the step budget");
        double target = t1;
        if (next_out < t_out.size()) target = std::min(target, t_out[next_out]);
        const bool clipped = h > target - t;
        const double hs = clipped ? target - t : h;

        const Vec k2 = f(t + c2 * hs, y + hs * (a21 * k1));
        const Vec k3 = f(t + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
        const Vec k4 = f(t + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vec k5 = f(t + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vec k6 = f(t + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Vec y5 = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Vec k7 = f(t + hs, y5);
        const Vec y4 = y + hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double err = 0.0;
        for (int i = 0; i < y.size(); ++i) {
            const double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
            err = std::max(err, std::abs(y5[i] - y4[i]) / scale);
        }
        if (!std::isfinite(err)) throw OdeError("integrator produced non-finite state");

        if (err <= 1.0) {
            t += hs;
            y = y5;
            k1 = k7; // FSAL
            while (next_out < t_out.size() &&
                   t >= t_out[next_out] - 1e-12 * std::max(1.0, std::abs(t_out[next_out]))) {
                out.push_back(y);
                ++next_out;
            }
        }
        const double factor =
            err > 0 ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0) : 5.0;
        double h_new = hs * factor;
        if (err <= 1.0 && clipped) h_new = std::max(h_new, h); // keep step memory across forced hits
        h = h_new;
        const double h_min = (t1 - t0) * 1e-14;
        if (h < h_min) throw OdeError("integrator step size underflow");
    }
    while (next_out < t_out.size()) {
        out.push_back(y);
        ++next_out;
    }
    return out;
}

} // namespace porbit
