#include "porbit/verify.hpp"
#include "porbit/ode.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace porbit {

CriticalOrbit reconstruct(const ActionPoint& point, double eps, const PotentialSpec& spec,
                          const MetricChart& chart, int n_samples) {
    if (n_samples < 8) throw VerifyError("reconstruct needs at least 8 samples");
    CriticalOrbit orbit;
    orbit.tau = point.tau;
    orbit.eps = eps;
    orbit.period = std::exp(point.tau);
    const int n = point.loop.dim();
    const int rows = n_samples + 1;
    orbit.times.resize(rows);
    orbit.positions.resize(rows, n);
    orbit.velocities.resize(rows, n);
    orbit.momenta.resize(rows, n);
    orbit.hamiltonian.resize(rows);
    const double level = eps * std::exp(-point.tau) * penalty_prime(point.tau);
    double ham_dev = 0.0;
    double min_u = std::numeric_limits<double>::infinity();
    for (int i = 0; i < rows; ++i) {
        const double s = static_cast<double>(i) / n_samples; // loop parameter in [0,1]
        const Vec q = point.loop.value_at(s);
        const Vec qdot = std::exp(-point.tau) * point.loop.velocity_at(s);
        orbit.times[i] = s * orbit.period;
        orbit.positions.row(i) = q.transpose();
        orbit.velocities.row(i) = qdot.transpose();
        orbit.momenta.row(i) = (chart.metric(q) * qdot).transpose();
        const double u = eval_U(spec, q);
        const double h = 0.5 * chart.inner(q, qdot, qdot) - u;
        orbit.hamiltonian[i] = h;
        ham_dev = std::max(ham_dev, std::abs(h - level));
        min_u = std::min(min_u, u);
    }
    orbit.hamiltonian_dev = ham_dev;
    orbit.min_U = min_u;
    orbit.el_resid_sup = el_residual(point, spec, chart);
    orbit.energy_ident_sup = energy_identity_residual(point, spec, chart, eps);
    if (chart.family() == MetricFamily::FlatTorus) orbit.winding = winding_numbers(orbit, chart);
    return orbit;
}

ShootingResult shooting_crosscheck(const CriticalOrbit& orbit, const PotentialSpec& spec,
                                   const MetricChart& chart, double rtol) {
    const int n = static_cast<int>(orbit.positions.cols());
    auto rhs = [&](double, const Vec& y) {
        const Vec q = y.head(n);
        const Vec v = y.tail(n);
        Vec dy(2 * n);
        dy.head(n) = v;
        Vec acc = eval_gradU(spec, chart, q);
        if (!chart.is_flat()) {
            const auto gamma = chart.christoffel(q);
            for (int i = 0; i < n; ++i) acc[i] -= v.dot(gamma[i] * v);
        }
        dy.tail(n) = acc;
        return dy;
    };
    Vec y0(2 * n);
    y0.head(n) = orbit.positions.row(0).transpose();
    y0.tail(n) = orbit.velocities.row(0).transpose();
    const auto states = integrate_dopri5(rhs, y0, 0.0, orbit.period, orbit.times, rtol, 1e-13);

    ShootingResult res;
    const Vec yT = states.back();
    res.closure = (yT.head(n) - y0.head(n)).norm() + (yT.tail(n) - y0.tail(n)).norm();
    for (size_t i = 0; i < states.size(); ++i) {
        const Vec qi = states[i].head(n);
        res.deviation = std::max(res.deviation, (qi - orbit.positions.row(i).transpose()).norm());
    }
    return res;
}

std::vector<long long> winding_numbers(const CriticalOrbit& orbit, const MetricChart& chart) {
    if (chart.family() != MetricFamily::FlatTorus)
        throw VerifyError("winding numbers are defined for FlatTorus charts only");
    const int n = static_cast<int>(orbit.positions.cols());
    std::vector<long long> w(n);
    const Vec disp =
        (orbit.positions.row(orbit.positions.rows() - 1) - orbit.positions.row(0)).transpose();
    for (int d = 0; d < n; ++d) {
        const double ratio = disp[d] / chart.periods()[d];
        const double rounded = std::round(ratio);
        if (std::abs(ratio - rounded) > 1e-6)
            throw VerifyError("loop displacement is not an integer multiple of the periods");
        w[d] = static_cast<long long>(rounded);
    }
    return w;
}

double orbit_lagrangian_action(const CriticalOrbit& orbit, const PotentialSpec& spec,
                               const MetricChart& chart) {
    // trapezoid over one period; endpoints coincide for closed orbits
    double sum = 0.0;
    const int rows = static_cast<int>(orbit.positions.rows());
    auto lagrangian = [&](int i) {
        const Vec q = orbit.positions.row(i).transpose();
        const Vec v = orbit.velocities.row(i).transpose();
        return 0.5 * chart.inner(q, v, v) + eval_U(spec, q);
    };
    for (int i = 0; i + 1 < rows; ++i) {
        const double dt = orbit.times[i + 1] - orbit.times[i];
        sum += 0.5 * dt * (lagrangian(i) + lagrangian(i + 1));
    }
    return sum;
}

void write_orbit_csv(const CriticalOrbit& orbit, std::ostream& os) {
    const int n = static_cast<int>(orbit.positions.cols());
    os << "t";
    for (int d = 1; d <= n; ++d) os << ",q_" << d;
    for (int d = 1; d <= n; ++d) os << ",p_" << d;
    os << ",H\n";
    char buf[32];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf << sep;
    };
    for (int i = 0; i < orbit.positions.rows(); ++i) {
        put(orbit.times[i], ',');
        for (int d = 0; d < n; ++d) put(orbit.positions(i, d), ',');
        for (int d = 0; d < n; ++d) put(orbit.momenta(i, d), ',');
        std::snprintf(buf, sizeof buf, "%.17g", orbit.hamiltonian[i]);
        os << buf << "\n";
    }
}

void write_orbit_csv(const CriticalOrbit& orbit, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw VerifyError("cannot open orbit file for writing: " + path);
    write_orbit_csv(orbit, os);
}

StoredOrbit read_orbit_csv(const std::string& path, int dim) {
    std::ifstream is(path);
    if (!is) throw VerifyError("cannot open orbit file: " + path);
    std::string line;
    if (!std::getline(is, line)) throw VerifyError("orbit file empty: " + path);
    std::vector<std::vector<double>> rows;
    const size_t expected = 2 + 2 * static_cast<size_t>(dim);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            try {
                row.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw VerifyError("orbit file has a non-numeric field: " + field);
            }
        }
        if (row.size() != expected)
            throw VerifyError("orbit file row has wrong column count");
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw VerifyError("orbit file has too few rows");
    StoredOrbit stored;
    stored.times.resize(rows.size());
    stored.positions.resize(rows.size(), dim);
    stored.momenta.resize(rows.size(), dim);
    stored.hamiltonian.resize(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        stored.times[i] = rows[i][0];
        for (int d = 0; d < dim; ++d) {
            stored.positions(i, d) = rows[i][1 + d];
            stored.momenta(i, d) = rows[i][1 + dim + d];
        }
        stored.hamiltonian[i] = rows[i][1 + 2 * dim];
    }
    return stored;
}

} // namespace porbit
