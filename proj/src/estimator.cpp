#include "sps/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sps {

PriorMoments prior_moments(std::span<const double> expO, double h)
{
    const double m_tau = trapezoid(expO, h);
    return {m_tau, m_tau * m_tau, PriorSource::DeterministicIntegral};
}

PriorMoments prior_moments(const DeterministicSeries& series)
{
    return prior_moments(
        std::span<const double>(series.expO.data(), static_cast<std::size_t>(series.expO.size())),
        series.dt);
}

AmmseCoefficients ammse_coeffs(const PriorMoments& prior, double eta, double gamma, double T)
{
    if (!(eta * gamma > 0.0)) {
        throw RecordUndefined();
    }
    AmmseCoefficients c;
    c.beta_sq_T = T / (eta * gamma);
    const double total = prior.sigma_tau_sq + c.beta_sq_T;
    c.G = prior.sigma_tau_sq / total;
    c.m = prior.m_tau * (c.beta_sq_T / total);
    return c;
}

DelayPolicy calibrate_reference(std::span<const double> tau_hats, double quantile)
{
    if (tau_hats.empty()) {
        throw EmptyBatch();
    }
    if (!(quantile > 0.0 && quantile <= 1.0)) {
        throw InvalidParams({"quantile must lie in (0, 1]"});
    }
    std::vector<double> sorted(tau_hats.begin(), tau_hats.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    // Nearest rank; the epsilon absorbs q*N landing a hair above an integer.
    const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(quantile * n - 1e-9)));
    DelayPolicy policy;
    policy.C = std::max(0.0, sorted[rank - 1]);
    policy.delta_max = policy.C;
    policy.mode = DelayMode::CalibratedQuantile;
    policy.quantile = quantile;
    policy.batch_size = sorted.size();
    return policy;
}

DelayPolicy fixed_reference(double C, double delta_max)
{
    if (!(C >= 0.0) || !(delta_max >= 0.0)) {
        throw InvalidParams({"delay reference and delta_max must be non-negative"});
    }
    DelayPolicy policy;
    policy.C = C;
    policy.delta_max = delta_max;
    policy.mode = DelayMode::FixedReference;
    return policy;
}

double apply_delay_policy(double tau_hat, const DelayPolicy& policy)
{
    return std::clamp(policy.C - tau_hat, 0.0, policy.delta_max);
}

} // namespace sps
