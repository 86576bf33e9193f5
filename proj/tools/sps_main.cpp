#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sps/experiments.hpp"
#include "sps/liouville.hpp"
#include "sps/parallel.hpp"

namespace {

enum ExitCode { kOk = 0, kInvalid = 2, kNumerical = 3, kIo = 4 };

int exit_code(const sps::Error& e)
{
    using Kind = sps::Error::Kind;
    switch (e.kind()) {
    case Kind::InvalidParams:
    case Kind::InvalidConfig:
    case Kind::RecordUndefined:
    case Kind::EmptyBatch:
    case Kind::DelayOutOfRange:
        return kInvalid;
    case Kind::NumericalBlowup:
    case Kind::DegenerateDenominator:
    case Kind::InvariantViolation:
        return kNumerical;
    case Kind::Io:
        return kIo;
    }
    return kNumerical;
}

struct Overrides {
    std::string config_path;
    std::vector<double> gamma2;
    std::string case_label;
    std::optional<int> n_traj;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> workers;
    bool dump_debug = false;
};

void add_common(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--n-traj", o.n_traj, "trajectories per feed-forward point");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--workers", o.workers, "worker threads (default: SPS_WORKERS or all cores)");
    cmd->add_flag("--dump-debug", o.dump_debug, "write per-point series, kernels and records");
}

sps::ExperimentConfig build_config(const Overrides& o)
{
    sps::ExperimentConfig config =
        o.config_path.empty() ? sps::ExperimentConfig{} : sps::load_config(o.config_path);
    if (!o.gamma2.empty()) {
        config.gamma2_values = o.gamma2;
    }
    if (!o.case_label.empty()) {
        config.cases = {sps::parse_case(o.case_label)};
    }
    if (o.n_traj) {
        config.params.n_traj = *o.n_traj;
    }
    if (o.seed) {
        config.params.master_seed = *o.seed;
    }
    if (!o.out.empty()) {
        config.output_dir = o.out;
    }
    if (o.workers) {
        config.workers = *o.workers;
    }
    config.dump_debug = config.dump_debug || o.dump_debug;
    sps::validate_config(config);
    return config;
}

void print_result(const sps::CaseResult& r)
{
    std::printf("case %-3s gamma2=%-6g lambda=%.6f", sps::case_label(r.case_id), r.gamma2, r.lambda);
    if (r.case_id == sps::CaseId::DephasingFeedForward) {
        std::printf(" +- %.6f  (G=%.4f C=%.3f, %d traj)", r.mc_stderr, *r.G, *r.C, r.n_traj);
    }
    std::printf("  [%.1fs]\n", r.runtime_s);
    for (const auto& w : r.warnings) {
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    }
}

double elapsed(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int cmd_run(const Overrides& o)
{
    const auto start = std::chrono::steady_clock::now();
    const auto config = build_config(o);
    if (config.cases.size() != 1 || config.gamma2_values.size() != 1) {
        throw sps::InvalidConfig("run needs exactly one --case and one --gamma2");
    }
    auto r = sps::run_case(config, config.cases.front(), config.gamma2_values.front());
    print_result(r);
    sps::write_results({r}, config, elapsed(start));
    return kOk;
}

int cmd_sweep(const Overrides& o)
{
    const auto start = std::chrono::steady_clock::now();
    const auto config = build_config(o);
    const auto sweep = sps::sweep_gamma2(config);
    for (const auto& r : sweep.results) {
        print_result(r);
    }
    for (const auto& row : sweep.improvements) {
        std::printf("improvement gamma2=%-6g %.2f%% +- %.2f%%\n", row.gamma2, row.improvement_pct,
                    row.stderr_pct);
    }
    sps::write_results(sweep.results, config, elapsed(start));
    std::printf("wrote %s/results.csv\n", config.output_dir.c_str());
    return kOk;
}

int cmd_calibrate(const Overrides& o)
{
    auto config = build_config(o);
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const double gamma2 : config.gamma2_values) {
        const auto cal = sps::calibrate(config, gamma2);
        out.push_back({{"gamma2", gamma2},
                       {"horizon", cal.params.horizon},
                       {"dt", cal.params.dt},
                       {"m_tau", cal.prior.m_tau},
                       {"sigma_tau_sq", cal.prior.sigma_tau_sq},
                       {"G", cal.coeffs.G},
                       {"m", cal.coeffs.m},
                       {"C", cal.policy.C},
                       {"delta_max", cal.policy.delta_max},
                       {"quantile", cal.policy.quantile},
                       {"batch_size", cal.policy.batch_size}});
    }
    std::cout << out.dump(2) << "\n";
    return kOk;
}

int cmd_selftest(const Overrides& o)
{
    const auto config = build_config(o);
    bool ok = true;
    const auto report = [&](const char* name, bool pass, double value) {
        std::printf("%s %-34s %.3e\n", pass ? "PASS" : "FAIL", name, value);
        ok = ok && pass;
    };
    for (const double gamma2 : config.gamma2_values) {
        const sps::Params p = sps::resolve_params(config, gamma2);
        std::printf("gamma2=%g horizon=%g dt=%g\n", gamma2, p.horizon, p.dt);
        const auto gen = sps::Generator::from_params(p);
        const auto rho0 = sps::initial_state<double>();
        const auto series = sps::evolve_deterministic(rho0, gen, p);
        const auto exact = sps::evolve_exact(rho0, gen, p.corr_spacing(), p.corr_points());
        double sup = 0.0;
        double trace = 0.0;
        double min_eig = 1.0;
        for (std::size_t j = 0; j < series.snapshots.size(); ++j) {
            const auto& rho = series.snapshots[j];
            sup = std::max(sup, (rho - exact[j]).cwiseAbs().maxCoeff());
            const auto d = sps::diagnose(rho);
            trace = std::max(trace, d.trace_error);
            min_eig = std::min(min_eig, d.min_eigenvalue);
        }
        const double balance = sps::excitation_balance(series, p);
        report("rk4 vs expm sup-norm", sup <= 1e-8, sup);
        report("trace drift", trace <= 1e-9, trace);
        report("min eigenvalue", min_eig >= -1e-8, min_eig);
        report("excitation bookkeeping |1 - total|", std::abs(balance - 1.0) <= 1e-6,
               std::abs(balance - 1.0));
    }
    return ok ? kOk : kNumerical;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Monte Carlo simulator of a monitored three-level emitter with feed-forward delay"};
    app.set_version_flag("--version", std::string(sps::kToolVersion));
    app.require_subcommand(1);

    Overrides o;
    double gamma2 = 0.0;
    auto* run = app.add_subcommand("run", "run a single (case, gamma2) point");
    add_common(run, o);
    run->add_option("--gamma2", gamma2, "X2 -> X1 decay rate Gamma2")->required();
    run->add_option("--case", o.case_label, "i | ii | iii (or no-dephasing, ...)")->required();

    auto* sweep = app.add_subcommand("sweep", "run all cases over the gamma2 sweep");
    add_common(sweep, o);
    sweep->add_option("--gamma2", o.gamma2, "gamma2 values (overrides the config)")->delimiter(',');
    sweep->add_option("--case", o.case_label, "restrict to one case");

    auto* calib = app.add_subcommand("calibrate", "print prior, AMMSE coefficients and delay policy");
    add_common(calib, o);
    calib->add_option("--gamma2", o.gamma2, "gamma2 values")->delimiter(',');

    auto* self = app.add_subcommand("selftest", "deterministic invariant checks");
    add_common(self, o);
    self->add_option("--gamma2", o.gamma2, "gamma2 values")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (*run) {
            o.gamma2 = {gamma2};
            return cmd_run(o);
        }
        if (*sweep) {
            return cmd_sweep(o);
        }
        if (*calib) {
            return cmd_calibrate(o);
        }
        return cmd_selftest(o);
    } catch (const sps::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kNumerical;
    }
}
