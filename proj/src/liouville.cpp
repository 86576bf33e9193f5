#include "sps/liouville.hpp"

#include <fstream>

#include "sps/format.hpp"

namespace sps {

DeterministicSeries evolve_deterministic(const Matrix4cd& rho0, const Generator& gen,
                                         const Params& params)
{
    const long steps = params.steps();
    DeterministicSeries s;
    s.dt = params.dt;
    s.corr_stride = params.corr_stride;
    s.rho00.resize(steps + 1);
    s.rho11.resize(steps + 1);
    s.rho22.resize(steps + 1);
    s.rho33.resize(steps + 1);
    s.snapshots.reserve(static_cast<std::size_t>(steps / params.corr_stride + 1));

    const Rk4Stepper<double> stepper(gen, params.dt);
    Matrix4cd rho = rho0;
    for (long k = 0;; ++k) {
        s.rho00[k] = rho(0, 0).real();
        s.rho11[k] = rho(1, 1).real();
        s.rho22[k] = rho(2, 2).real();
        s.rho33[k] = rho(3, 3).real();
        if (k % params.corr_stride == 0) {
            check_density_matrix(rho);
            s.snapshots.push_back(rho);
        }
        if (k == steps) {
            break;
        }
        rho = stepper.step(rho);
    }
    s.expO = s.rho00 + s.rho11;
    s.n = s.rho22;
    return s;
}

std::vector<Matrix4cd, Eigen::aligned_allocator<Matrix4cd>>
evolve_exact(const Matrix4cd& rho0, const Generator& gen, double spacing, int points)
{
    std::vector<Matrix4cd, Eigen::aligned_allocator<Matrix4cd>> out;
    out.reserve(static_cast<std::size_t>(points));
    const auto prop = propagator(gen, spacing);
    Matrix4cd rho = rho0;
    for (int j = 0; j < points; ++j) {
        out.push_back(rho);
        rho = prop.apply(rho);
    }
    return out;
}

double settle_horizon(const Matrix4cd& rho0, const Generator& gen, double block,
                      double threshold, double cap)
{
    const auto prop = propagator(gen, block);
    Matrix4cd rho = rho0;
    double t = 0.0;
    while (t < cap) {
        rho = prop.apply(rho);
        t += block;
        if (rho(3, 3).real() >= threshold) {
            break;
        }
    }
    return std::min(t, cap);
}

void write_series_csv(const DeterministicSeries& series, const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    out << "t,rho00,rho11,rho22,rho33,expO,n\n";
    for (long k = 0; k <= series.steps(); ++k) {
        out << format_double(series.time(k)) << ',' << format_double(series.rho00[k]) << ','
            << format_double(series.rho11[k]) << ',' << format_double(series.rho22[k]) << ','
            << format_double(series.rho33[k]) << ',' << format_double(series.expO[k]) << ','
            << format_double(series.n[k]) << '\n';
    }
    if (!out) {
        throw IoError("write failed for " + path);
    }
}

double trapezoid(std::span<const double> values, double h)
{
    if (values.size() < 2) {
        return 0.0;
    }
    double sum = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) {
        sum += values[i];
    }
    return sum * h;
}

double excitation_balance(const DeterministicSeries& series, const Params& params)
{
    const long last = series.n.size() - 1;
    return params.kappa * trapezoid(series.n, series.dt) +
           params.gamma1 * trapezoid(series.rho11, series.dt) + series.rho00[last] +
           series.rho11[last] + series.rho22[last];
}

} // namespace sps
