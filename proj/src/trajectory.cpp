#include "sps/trajectory.hpp"

#include <algorithm>
#include <fstream>

#include "sps/format.hpp"

namespace sps {

TrajectoryOutcome simulate_trajectory(const Params& params, const Generator& gen,
                                      std::uint64_t index, const TrajectoryOptions& options)
{
    if (!(params.eta * params.gamma > 0.0)) {
        throw RecordUndefined();
    }
    const long steps = params.steps();
    const double h = params.dt;
    const auto ops = build_operators<double>(params);
    const SmeIntegrator<double> sme(gen, ops.O, params.eta, params.gamma, h, params.scheme);
    const double inv_strength = 1.0 / sme.strength();

    TrajectoryOutcome out;
    out.traj_index = index;
    NoiseStream noise(params.master_seed, index, options.domain);
    out.seed = noise.seed();
    out.expO_series.resize(steps + 1);
    if (options.keep_snapshots) {
        out.rho_snapshots.reserve(static_cast<std::size_t>(steps / params.corr_stride + 1));
    }
    if (options.keep_record) {
        out.record.reserve(static_cast<std::size_t>(steps));
    }
    if (options.keep_factors) {
        if (sme.scheme() != DiffusionScheme::Exponential) {
            throw InvalidParams({"per-step factors need the exponential scheme"});
        }
        out.factors.resize(static_cast<std::size_t>(steps));
    }
    out.min_eigenvalue = 1.0;

    Matrix4cd rho = initial_state<double>(options.initial);
    for (long k = 0;; ++k) {
        const double expO = (ops.O * rho).trace().real();
        out.expO_series[k] = expO;
        if (k % params.corr_stride == 0) {
            const auto d = diagnose(rho);
            out.min_eigenvalue = std::min(out.min_eigenvalue, d.min_eigenvalue);
            out.max_purity = std::max(out.max_purity, d.purity);
            out.max_field_coherence = std::max(out.max_field_coherence, std::abs(rho(2, 3)));
            if (options.keep_snapshots) {
                out.rho_snapshots.push_back(rho);
            }
        }
        if (k == steps) {
            break;
        }
        const double dW = noise.increment(h);
        out.tau += expO * h;
        out.nu += expO * h + dW * inv_strength;
        if (options.keep_record) {
            out.record.push_back(expO + dW * inv_strength / h);
        }
        rho = sme.step(rho, dW, options.keep_factors ? &out.factors[static_cast<std::size_t>(k)] : nullptr);
    }
    return out;
}

void write_trajectory_csv(const TrajectoryOutcome& outcome, double dt, const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    out << "t,expO,J\n";
    for (std::size_t k = 0; k < outcome.record.size(); ++k) {
        out << format_double(static_cast<double>(k) * dt) << ','
            << format_double(outcome.expO_series[static_cast<Eigen::Index>(k)]) << ','
            << format_double(outcome.record[k]) << '\n';
    }
    if (!out) {
        throw IoError("write failed for " + path);
    }
}

} // namespace sps
