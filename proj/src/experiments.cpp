#include "sps/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sps/format.hpp"
#include "sps/parallel.hpp"
#include "sps/trajectory.hpp"

namespace sps {

namespace {

std::string trim(const std::string& s)
{
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return {};
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value)
{
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw InvalidConfig("key '" + key + "': expected a number, got '" + value + "'");
    }
    return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value)
{
    Int out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw InvalidConfig("key '" + key + "': expected an integer, got '" + value + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "yes") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no") {
        return false;
    }
    throw InvalidConfig("key '" + key + "': expected true/false, got '" + value + "'");
}

DiffusionScheme parse_scheme(const std::string& value)
{
    for (const auto s : {DiffusionScheme::Exponential, DiffusionScheme::EulerMaruyama}) {
        if (value == to_string(s)) {
            return s;
        }
    }
    throw InvalidConfig("unknown scheme '" + value + "'");
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::filesystem::path debug_dir(const ExperimentConfig& config)
{
    std::filesystem::path dir = std::filesystem::path(config.output_dir) / "debug";
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    return dir;
}

std::string point_tag(CaseId c, double gamma2)
{
    return std::string("case_") + case_label(c) + "_gamma2_" + format_double(gamma2);
}

CaseResult deterministic_case(const ExperimentConfig& config, CaseId c, const Params& resolved)
{
    const Params p = case_params(resolved, c);
    const auto ens = deterministic_correlations(p, c);
    const auto hom = coincidence_probability(ens, p.kappa);
    const auto series =
        evolve_deterministic(initial_state<double>(), Generator::from_params(p), p);

    CaseResult r;
    r.case_id = c;
    r.gamma2 = p.gamma2;
    r.lambda = hom.lambda;
    r.p_c = hom.p_c;
    r.p_emit = hom.p_emit;
    r.n_traj = 1;
    r.m_tau = prior_moments(series).m_tau;
    r.master_seed = p.master_seed;
    r.grid_points = ens.grid.size;
    if (config.dump_debug) {
        const auto dir = debug_dir(config);
        write_series_csv(series, (dir / (point_tag(c, p.gamma2) + "_series.csv")).string());
        write_ensemble_csv(ens, (dir / (point_tag(c, p.gamma2) + "_g1.csv")).string());
    }
    return r;
}

} // namespace

ExperimentConfig parse_config(const std::string& text)
{
    ExperimentConfig config;
    Params& p = config.params;
    std::stringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "g") {
            p.g = parse_double(key, value);
        } else if (key == "kappa") {
            p.kappa = parse_double(key, value);
        } else if (key == "gamma") {
            p.gamma = parse_double(key, value);
        } else if (key == "gamma1") {
            p.gamma1 = parse_double(key, value);
        } else if (key == "eta") {
            p.eta = parse_double(key, value);
        } else if (key == "dt") {
            config.auto_dt = value == "auto";
            if (!config.auto_dt) {
                p.dt = parse_double(key, value);
            }
        } else if (key == "horizon") {
            config.auto_horizon = value == "auto";
            if (!config.auto_horizon) {
                p.horizon = parse_double(key, value);
            }
        } else if (key == "corr_stride") {
            p.corr_stride = parse_int<int>(key, value);
        } else if (key == "master_seed" || key == "seed") {
            p.master_seed = parse_int<std::uint64_t>(key, value);
        } else if (key == "n_traj") {
            p.n_traj = parse_int<int>(key, value);
        } else if (key == "scheme") {
            p.scheme = parse_scheme(value);
        } else if (key == "gamma2_values" || key == "gamma2") {
            config.gamma2_values.clear();
            for (const auto& item : split_list(value)) {
                config.gamma2_values.push_back(parse_double(key, item));
            }
        } else if (key == "cases") {
            config.cases.clear();
            for (const auto& item : split_list(value)) {
                try {
                    config.cases.push_back(parse_case(item));
                } catch (const InvalidParams&) {
                    throw InvalidConfig("key 'cases': unknown case '" + item + "'");
                }
            }
        } else if (key == "n_calib") {
            config.n_calib = parse_int<int>(key, value);
        } else if (key == "quantile") {
            config.quantile = parse_double(key, value);
        } else if (key == "fixed_reference") {
            if (value == "none") {
                config.fixed_reference.reset();
            } else {
                config.fixed_reference = parse_double(key, value);
            }
        } else if (key == "zero_delay") {
            config.zero_delay = parse_bool(key, value);
        } else if (key == "conditioning") {
            try {
                config.conditioning = parse_conditioning(value);
            } catch (const InvalidParams&) {
                throw InvalidConfig("key 'conditioning': unknown mode '" + value + "'");
            }
        } else if (key == "n_batches") {
            config.n_batches = parse_int<int>(key, value);
        } else if (key == "output_dir") {
            config.output_dir = value;
        } else if (key == "workers") {
            config.workers = parse_int<int>(key, value);
        } else if (key == "dump_debug") {
            config.dump_debug = parse_bool(key, value);
        } else if (key == "debug_trajectories") {
            config.debug_trajectories = parse_int<int>(key, value);
        } else {
            throw InvalidConfig("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    return config;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read config " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

void validate_config(const ExperimentConfig& config)
{
    if (config.gamma2_values.empty()) {
        throw InvalidConfig("gamma2_values must not be empty");
    }
    for (const double v : config.gamma2_values) {
        if (!(v > 0.0)) {
            throw InvalidConfig("gamma2 values must be positive");
        }
    }
    if (config.cases.empty()) {
        throw InvalidConfig("no cases requested");
    }
    const bool feed_forward = std::find(config.cases.begin(), config.cases.end(),
                                        CaseId::DephasingFeedForward) != config.cases.end();
    if (feed_forward && config.n_calib < 100 && !config.fixed_reference && !config.zero_delay) {
        throw InvalidConfig("n_calib must be >= 100 when case iii is requested");
    }
    if (!(config.quantile > 0.0 && config.quantile <= 1.0)) {
        throw InvalidConfig("quantile must lie in (0, 1]");
    }
    if (config.n_batches < 2 || config.n_batches > config.params.n_traj) {
        throw InvalidConfig("n_batches must lie in [2, n_traj]");
    }
    if (config.fixed_reference && !(*config.fixed_reference >= 0.0)) {
        throw InvalidConfig("fixed_reference must be non-negative");
    }
}

Params resolve_params(const ExperimentConfig& config, double gamma2)
{
    Params p = config.params;
    p.gamma2 = gamma2;
    if (config.auto_dt) {
        p.dt = default_dt(p);
    }
    validate_params(p);
    if (config.auto_horizon) {
        const Params unmonitored = case_params(p, CaseId::DephasingNoFeedForward);
        p.horizon = settle_horizon(initial_state<double>(), Generator::from_params(unmonitored));
    }
    p = with_rounded_horizon(p);
    validate_params(p);
    return p;
}

CalibrationSummary calibrate(const ExperimentConfig& config, double gamma2)
{
    const Params p = resolve_params(config, gamma2);
    if (!(p.eta * p.gamma > 0.0)) {
        throw RecordUndefined();
    }
    const auto gen = Generator::from_params(p);
    const Params unmonitored = case_params(p, CaseId::DephasingNoFeedForward);
    const auto series = evolve_deterministic(initial_state<double>(), gen, unmonitored);

    CalibrationSummary out;
    out.params = p;
    out.prior = prior_moments(series);
    out.coeffs = ammse_coeffs(out.prior, p.eta, p.gamma, p.horizon);

    if (config.zero_delay) {
        out.policy = fixed_reference(0.0, 0.0);
        return out;
    }
    if (config.fixed_reference) {
        out.policy = fixed_reference(*config.fixed_reference, *config.fixed_reference);
        return out;
    }
    TrajectoryOptions options;
    options.domain = SeedDomain::Calibration;
    options.keep_snapshots = false;
    std::vector<double> tau_hats;
    tau_hats.reserve(static_cast<std::size_t>(config.n_calib));
    ordered_parallel_for(
        static_cast<std::size_t>(config.n_calib), resolve_workers(config.workers),
        [&](std::size_t i) { return simulate_trajectory(p, gen, i, options).nu; },
        [&](std::size_t, double nu) {
            tau_hats.push_back(estimate_transition_time(nu, out.coeffs));
        });
    out.policy = calibrate_reference(tau_hats, config.quantile);
    return out;
}

CaseResult run_case(const ExperimentConfig& config, CaseId c, double gamma2)
{
    validate_config(config);
    const auto start = std::chrono::steady_clock::now();
    const Params resolved = resolve_params(config, gamma2);
    CaseResult r;

    if (c != CaseId::DephasingFeedForward) {
        r = deterministic_case(config, c, resolved);
    } else {
        const CalibrationSummary cal = calibrate(config, gamma2);
        const Params& p = cal.params;
        const auto gen = Generator::from_params(p);
        const CorrelationGrid grid = make_grid(p, cal.policy.delta_max);
        const bool smoothed = config.conditioning == Conditioning::Smoothed;
        const PropagatorCache<double> cache(gen, grid.spacing, smoothed ? 0 : grid.size);

        const auto n_traj = static_cast<std::size_t>(p.n_traj);
        const auto n_batches = static_cast<std::size_t>(config.n_batches);
        const std::size_t n_debug =
            config.dump_debug ? static_cast<std::size_t>(std::max(0, config.debug_trajectories)) : 0;
        const std::filesystem::path dir = n_debug > 0 ? debug_dir(config) : std::filesystem::path{};
        if (smoothed && p.scheme != DiffusionScheme::Exponential) {
            throw InvalidConfig("smoothed conditioning needs the exponential scheme");
        }
        const SmeIntegrator<double> sme(gen, build_operators<double>(p).O, p.eta, p.gamma, p.dt,
                                        p.scheme);

        // Filtered: shifted conditional states, regressed once per batch.
        // Smoothed: shifted per-trajectory kernels.
        std::vector<EnsembleAccumulator> state_batches;
        std::vector<KernelAccumulator> kernel_batches;
        if (smoothed) {
            kernel_batches.assign(n_batches, KernelAccumulator(grid));
        } else {
            state_batches.assign(n_batches, EnsembleAccumulator(grid));
        }
        struct Produced {
            TrajectoryOutcome outcome;
            TrajectoryKernel kernel;
        };

        ordered_parallel_for(
            n_traj, resolve_workers(config.workers),
            [&](std::size_t i) {
                TrajectoryOptions options;
                options.keep_record = i < n_debug;
                options.keep_factors = smoothed;
                Produced out{simulate_trajectory(p, gen, i, options), {}};
                if (smoothed) {
                    out.kernel = smoothed_kernel(out.outcome, sme, p.corr_stride);
                    out.outcome.factors.clear();
                    out.outcome.rho_snapshots.clear();
                }
                return out;
            },
            [&](std::size_t i, Produced produced) {
                const TrajectoryOutcome& outcome = produced.outcome;
                const double tau_hat = estimate_transition_time(outcome.nu, cal.coeffs);
                const double delay = apply_delay_policy(tau_hat, cal.policy);
                const int shift = delay_slots(delay, grid, cal.policy.delta_max);
                const std::size_t batch = i * n_batches / n_traj;
                if (smoothed) {
                    kernel_batches[batch].add(produced.kernel, shift);
                } else {
                    state_batches[batch].add(outcome.rho_snapshots, shift);
                }
                if (i < n_debug) {
                    write_trajectory_csv(outcome, p.dt,
                                         (dir / (point_tag(c, gamma2) + "_traj_" +
                                                 std::to_string(i) + ".csv"))
                                             .string());
                }
            },
            smoothed ? 1 : 4);

        std::vector<double> batch_lambda;
        CorrelationEnsemble ens;
        if (smoothed) {
            KernelAccumulator total(grid);
            for (const auto& b : kernel_batches) {
                total.merge(b);
                batch_lambda.push_back(coincidence_probability(b.finalize(), p.kappa).lambda);
            }
            ens = total.finalize();
        } else {
            EnsembleAccumulator total(grid);
            for (const auto& b : state_batches) {
                total.merge(b);
                batch_lambda.push_back(coincidence_probability(finalize(b, cache), p.kappa).lambda);
            }
            ens = finalize(total, cache);
        }
        const auto hom = coincidence_probability(ens, p.kappa);
        const double mean_lambda =
            std::accumulate(batch_lambda.begin(), batch_lambda.end(), 0.0) / batch_lambda.size();
        double ss = 0.0;
        for (const double l : batch_lambda) {
            ss += (l - mean_lambda) * (l - mean_lambda);
        }
        const double nb = static_cast<double>(batch_lambda.size());

        r.case_id = c;
        r.gamma2 = p.gamma2;
        r.lambda = hom.lambda;
        r.p_c = hom.p_c;
        r.p_emit = hom.p_emit;
        r.n_traj = p.n_traj;
        r.mc_stderr = std::sqrt(ss / (nb - 1.0) / nb);
        r.m_tau = cal.prior.m_tau;
        r.G = cal.coeffs.G;
        r.m = cal.coeffs.m;
        r.C = cal.policy.C;
        r.master_seed = p.master_seed;
        r.grid_points = grid.size;
        r.policy = cal.policy;
        r.cauchy_schwarz_excess = ens.cauchy_schwarz_excess;
        if (config.dump_debug) {
            write_ensemble_csv(ens, (dir.empty() ? debug_dir(config) : dir) /
                                        (point_tag(c, gamma2) + "_g1.csv"));
        }
    }

    r.dt = resolved.dt;
    r.horizon = resolved.horizon;
    r.corr_spacing = resolved.corr_spacing();
    r.warnings = validate_params(resolved).warnings;
    r.runtime_s = seconds_since(start);
    return r;
}

std::vector<ImprovementRow> improvement_table(const std::vector<CaseResult>& results)
{
    std::vector<ImprovementRow> rows;
    for (const auto& ii : results) {
        if (ii.case_id != CaseId::DephasingNoFeedForward) {
            continue;
        }
        for (const auto& iii : results) {
            if (iii.case_id == CaseId::DephasingFeedForward && iii.gamma2 == ii.gamma2) {
                ImprovementRow row;
                row.gamma2 = ii.gamma2;
                row.lambda_ii = ii.lambda;
                row.lambda_iii = iii.lambda;
                row.improvement_pct = 100.0 * (iii.lambda - ii.lambda) / ii.lambda;
                row.stderr_pct = 100.0 * std::hypot(iii.mc_stderr, ii.mc_stderr) / ii.lambda;
                rows.push_back(row);
            }
        }
    }
    std::sort(rows.begin(), rows.end(),
              [](const ImprovementRow& a, const ImprovementRow& b) { return a.gamma2 < b.gamma2; });
    return rows;
}

SweepResult sweep_gamma2(const ExperimentConfig& config)
{
    validate_config(config);
    std::vector<double> values = config.gamma2_values;
    std::sort(values.begin(), values.end());
    std::vector<CaseId> cases = config.cases;
    std::sort(cases.begin(), cases.end());

    SweepResult out;
    for (const double gamma2 : values) {
        for (const CaseId c : cases) {
            out.results.push_back(run_case(config, c, gamma2));
        }
    }
    out.improvements = improvement_table(out.results);
    return out;
}

std::string results_csv(const std::vector<CaseResult>& results)
{
    const auto optional_field = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string{};
    };
    std::string out = "case,gamma2,lambda,p_c,p_emit,n_traj,mc_stderr,m_tau,G,m,C,seed\n";
    for (const auto& r : results) {
        out += case_label(r.case_id);
        out += ',' + format_double(r.gamma2);
        out += ',' + format_double(r.lambda);
        out += ',' + format_double(r.p_c);
        out += ',' + format_double(r.p_emit);
        out += ',' + std::to_string(r.n_traj);
        out += ',' + format_double(r.mc_stderr);
        out += ',' + format_double(r.m_tau);
        out += ',' + optional_field(r.G);
        out += ',' + optional_field(r.m);
        out += ',' + optional_field(r.C);
        out += ',' + std::to_string(r.master_seed);
        out += '\n';
    }
    return out;
}

void write_results(const std::vector<CaseResult>& results, const ExperimentConfig& config,
                   double wall_time_s)
{
    if (results.empty()) {
        throw InvalidConfig("no results to write");
    }
    const std::filesystem::path dir(config.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }

    const auto write_file = [](const std::filesystem::path& path, const std::string& body) {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw IoError("cannot open " + path.string() + " for writing");
        }
        out << body;
        if (!out) {
            throw IoError("write failed for " + path.string());
        }
    };

    using nlohmann::ordered_json;
    const Params& p = config.params;
    ordered_json manifest;
    manifest["tool"] = "sps";
    manifest["version"] = kToolVersion;
    manifest["wall_time_s"] = wall_time_s;
    manifest["config"] = {
        {"g", p.g},
        {"kappa", p.kappa},
        {"gamma", p.gamma},
        {"gamma1", p.gamma1},
        {"eta", p.eta},
        {"dt", config.auto_dt ? ordered_json("auto") : ordered_json(p.dt)},
        {"horizon", config.auto_horizon ? ordered_json("auto") : ordered_json(p.horizon)},
        {"corr_stride", p.corr_stride},
        {"master_seed", p.master_seed},
        {"n_traj", p.n_traj},
        {"scheme", to_string(p.scheme)},
        {"gamma2_values", config.gamma2_values},
        {"n_calib", config.n_calib},
        {"quantile", config.quantile},
        {"fixed_reference",
         config.fixed_reference ? ordered_json(*config.fixed_reference) : ordered_json(nullptr)},
        {"zero_delay", config.zero_delay},
        {"conditioning", to_string(config.conditioning)},
        {"n_batches", config.n_batches},
        {"workers", resolve_workers(config.workers)},
    };
    manifest["defaults"] = {
        {"dt_rule", "0.01 / max rate, capped at 0.01"},
        {"horizon_rule", "smallest multiple of 10/kappa with rho33 >= 0.999 (cap 500), "
                         "rounded to the correlation grid"},
        {"bad_cavity_factor", 10},
        {"prior_variance", "m_tau^2"},
        {"delay_policy", "clamp(C - tau_hat, 0, delta_max)"},
        {"delay_quantization", "nearest grid slot"},
        {"integration", "trapezoid; tau = 0 line excluded from the coincidence integrals"},
        {"error_bars", "batch means"},
    };
    ordered_json points = ordered_json::array();
    for (const auto& r : results) {
        ordered_json point = {
            {"case", case_label(r.case_id)},
            {"gamma2", r.gamma2},
            {"lambda", r.lambda},
            {"p_c", r.p_c},
            {"p_emit", r.p_emit},
            {"n_traj", r.n_traj},
            {"mc_stderr", r.mc_stderr},
            {"m_tau", r.m_tau},
            {"dt", r.dt},
            {"horizon", r.horizon},
            {"corr_spacing", r.corr_spacing},
            {"grid_points", r.grid_points},
            {"cauchy_schwarz_excess", r.cauchy_schwarz_excess},
            {"runtime_s", r.runtime_s},
            {"warnings", r.warnings},
        };
        if (r.policy) {
            point["calibration"] = {
                {"C", r.policy->C},
                {"delta_max", r.policy->delta_max},
                {"mode", r.policy->mode == DelayMode::CalibratedQuantile ? "calibrated-quantile"
                                                                         : "fixed-reference"},
                {"quantile", r.policy->quantile},
                {"batch_size", r.policy->batch_size},
                {"m_tau", r.m_tau},
                {"G", r.G.value_or(0.0)},
                {"m", r.m.value_or(0.0)},
            };
        }
        points.push_back(std::move(point));
    }
    manifest["results"] = std::move(points);
    ordered_json improvements = ordered_json::array();
    for (const auto& row : improvement_table(results)) {
        improvements.push_back({{"gamma2", row.gamma2},
                                {"lambda_ii", row.lambda_ii},
                                {"lambda_iii", row.lambda_iii},
                                {"improvement_pct", row.improvement_pct},
                                {"stderr_pct", row.stderr_pct}});
    }
    manifest["improvements"] = std::move(improvements);

    write_file(dir / "results.csv", results_csv(results));
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

int resolve_workers(int requested)
{
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("SPS_WORKERS")) {
        int value = 0;
        const std::string s(env);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec == std::errc() && ptr == s.data() + s.size() && value > 0) {
            return value;
        }
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

} // namespace sps
