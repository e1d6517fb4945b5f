#pragma once

#include "porbit/geometry.hpp"

namespace porbit {

struct OdeError : std::runtime_error {
    explicit OdeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Adaptive Dormand-Prince 5(4) integrator with step-size control.
/// Integrates y' = f(t, y) from t0 to t1 and returns the state at every
/// requested output time (ascending, all within [t0, t1]).
std::vector<Vec> integrate_dopri5(const std::function<Vec(double, const Vec&)>& f,
                                  const Vec& y0, double t0, double t1,
                                  const std::vector<double>& t_out,
                                  double rtol, double atol);

} // namespace porbit
