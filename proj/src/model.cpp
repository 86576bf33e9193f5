#include "sps/model.hpp"

#include <algorithm>
#include <cmath>

namespace sps {

double Params::max_rate() const
{
    return std::max({kappa, g, gamma, gamma1, gamma2});
}

long Params::steps() const
{
    return std::lround(horizon / dt);
}

int Params::corr_points() const
{
    return static_cast<int>(steps() / corr_stride) + 1;
}

ValidationReport validate_params(const Params& p)
{
    std::vector<std::string> bad;
    const std::array<std::pair<const char*, double>, 5> rates{{
        {"g", p.g},
        {"kappa", p.kappa},
        {"gamma", p.gamma},
        {"gamma1", p.gamma1},
        {"gamma2", p.gamma2},
    }};
    for (const auto& [name, value] : rates) {
        if (!(value >= 0.0) || !std::isfinite(value)) {
            bad.push_back(std::string(name) + " must be a finite non-negative rate");
        }
    }
    if (!(p.eta >= 0.0 && p.eta <= 1.0)) {
        bad.emplace_back("eta must lie in [0, 1]");
    }
    if (!(p.dt > 0.0) || !std::isfinite(p.dt)) {
        bad.emplace_back("dt must be positive");
    } else {
        const double fastest = p.max_rate();
        if (fastest > 0.0 && p.dt >= 1.0 / (10.0 * fastest)) {
            bad.emplace_back("dt must be below 1/(10 * max rate)");
        }
    }
    if (!(p.horizon >= p.dt)) {
        bad.emplace_back("horizon must be at least dt");
    }
    if (p.corr_stride < 1) {
        bad.emplace_back("corr_stride must be >= 1");
    }
    if (p.n_traj < 1) {
        bad.emplace_back("n_traj must be >= 1");
    }
    if (!bad.empty()) {
        throw InvalidParams(std::move(bad));
    }

    ValidationReport report;
    // "Gamma1 << g" is read as a factor of ten.
    const bool bad_cavity = p.gamma1 <= p.g / 10.0 && p.g < p.kappa && p.gamma < p.kappa;
    if (!bad_cavity) {
        report.warnings.emplace_back(
            "bad-cavity condition violated: need gamma1 <= g/10, g < kappa, gamma < kappa");
    }
    return report;
}

Params with_rounded_horizon(const Params& params)
{
    Params out = params;
    const long blocks = std::max(1L, std::lround(params.horizon / params.corr_spacing()));
    out.horizon = static_cast<double>(blocks * params.corr_stride) * params.dt;
    return out;
}

double default_dt(const Params& params)
{
    const double fastest = params.max_rate();
    if (fastest <= 0.0) {
        return 0.01;
    }
    return std::min(0.01, 0.01 / fastest);
}

const char* to_string(BasisState s)
{
    switch (s) {
    case BasisState::X2_0: return "X2,0";
    case BasisState::X1_0: return "X1,0";
    case BasisState::G_1: return "G,1";
    case BasisState::G_0: return "G,0";
    }
    return "?";
}

const char* to_string(DiffusionScheme s)
{
    switch (s) {
    case DiffusionScheme::Exponential: return "exponential";
    case DiffusionScheme::EulerMaruyama: return "euler-maruyama";
    }
    return "?";
}

const char* to_string(CaseId c)
{
    switch (c) {
    case CaseId::NoDephasing: return "no-dephasing";
    case CaseId::DephasingNoFeedForward: return "dephasing-no-ff";
    case CaseId::DephasingFeedForward: return "dephasing-ff";
    }
    return "?";
}

const char* case_label(CaseId c)
{
    switch (c) {
    case CaseId::NoDephasing: return "i";
    case CaseId::DephasingNoFeedForward: return "ii";
    case CaseId::DephasingFeedForward: return "iii";
    }
    return "?";
}

CaseId parse_case(const std::string& label)
{
    for (const auto c : {CaseId::NoDephasing, CaseId::DephasingNoFeedForward,
                         CaseId::DephasingFeedForward}) {
        if (label == case_label(c) || label == to_string(c)) {
            return c;
        }
    }
    throw InvalidParams({"unknown case '" + label + "'"});
}

Params case_params(const Params& params, CaseId c)
{
    Params out = params;
    switch (c) {
    case CaseId::NoDephasing: out.gamma = 0.0; break;
    case CaseId::DephasingNoFeedForward: out.eta = 0.0; break;
    case CaseId::DephasingFeedForward: break;
    }
    return out;
}

} // namespace sps
