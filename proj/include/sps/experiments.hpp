#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sps/correlators.hpp"
#include "sps/estimator.hpp"
#include "sps/hom.hpp"
#include "sps/model.hpp"

namespace sps {

inline constexpr const char* kToolVersion = "0.1.0";

struct ExperimentConfig {
    Params params;          // gamma2 is overridden per sweep point
    bool auto_dt = true;    // dt = default_dt(params)
    bool auto_horizon = true; // horizon = settle_horizon(...)
    std::vector<double> gamma2_values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<CaseId> cases{CaseId::NoDephasing, CaseId::DephasingNoFeedForward,
                              CaseId::DephasingFeedForward};
    int n_calib = 500;
    double quantile = 0.95;
    std::optional<double> fixed_reference; // C for DelayMode::FixedReference
    bool zero_delay = false;               // force every delay to 0 (diagnostic)
    Conditioning conditioning = Conditioning::Smoothed;
    int n_batches = 10;
    std::string output_dir = "results";
    int workers = 0; // 0: SPS_WORKERS or hardware concurrency
    bool dump_debug = false;
    int debug_trajectories = 4;
};

// Throws InvalidConfig on unknown keys or malformed values. The format is one
// `key = value` per line; `#` starts a comment.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Throws InvalidConfig / InvalidParams on violations.
void validate_config(const ExperimentConfig& config);

// Concrete Params for one sweep point: gamma2 applied, automatic dt and
// horizon resolved, horizon rounded to the correlation grid, validated.
Params resolve_params(const ExperimentConfig& config, double gamma2);

struct CaseResult {
    CaseId case_id = CaseId::NoDephasing;
    double gamma2 = 0.0;
    double lambda = 0.0;
    double p_c = 0.0;
    double p_emit = 0.0;
    int n_traj = 1; // 1 for the deterministic cases
    double mc_stderr = 0.0;
    double m_tau = 0.0;
    std::optional<double> G;
    std::optional<double> m;
    std::optional<double> C;
    std::uint64_t master_seed = 0;
    double runtime_s = 0.0;
    // Resolved numerics, echoed into the manifest.
    double dt = 0.0;
    double horizon = 0.0;
    double corr_spacing = 0.0;
    int grid_points = 0;
    std::optional<DelayPolicy> policy;
    double cauchy_schwarz_excess = 0.0; // see CauchySchwarzCheck
    std::vector<std::string> warnings;
};

// One (case, gamma2) point. Case iii runs a calibration batch, then a
// measurement batch whose batch-means spread gives mc_stderr.
CaseResult run_case(const ExperimentConfig& config, CaseId c, double gamma2);

struct CalibrationSummary {
    Params params;
    PriorMoments prior;
    AmmseCoefficients coeffs;
    DelayPolicy policy;
};

// Steps (a)-(b) of case iii: prior moments, AMMSE coefficients and the delay policy.
CalibrationSummary calibrate(const ExperimentConfig& config, double gamma2);

struct ImprovementRow {
    double gamma2 = 0.0;
    double lambda_ii = 0.0;
    double lambda_iii = 0.0;
    double improvement_pct = 0.0; // 100 (L_iii - L_ii) / L_ii
    double stderr_pct = 0.0;
};

struct SweepResult {
    std::vector<CaseResult> results; // sorted by gamma2, then case
    std::vector<ImprovementRow> improvements;
};

SweepResult sweep_gamma2(const ExperimentConfig& config);

std::vector<ImprovementRow> improvement_table(const std::vector<CaseResult>& results);

std::string results_csv(const std::vector<CaseResult>& results);

// Writes results.csv and manifest.json into output_dir (created if needed).
// Throws InvalidConfig for empty results and IoError with the path on failure.
void write_results(const std::vector<CaseResult>& results, const ExperimentConfig& config,
                   double wall_time_s);

} // namespace sps
