#pragma once

#include <cstddef>
#include <span>

#include "sps/liouville.hpp"

namespace sps {

enum class PriorSource {
    DeterministicIntegral,
    Explicit,
};

// Mean and variance of the transition time tau = int <O> dt.
struct PriorMoments {
    double m_tau = 0.0;
    double sigma_tau_sq = 0.0;
    PriorSource source = PriorSource::Explicit;
};

// m_tau from the trapezoid integral of <O>(t); the variance uses the
// exponential-prior approximation sigma^2 = m_tau^2.
PriorMoments prior_moments(std::span<const double> expO, double h);
PriorMoments prior_moments(const DeterministicSeries& series);

struct AmmseCoefficients {
    double G = 0.0;         // gain applied to the integrated record
    double m = 0.0;         // offset
    double beta_sq_T = 0.0; // record noise variance T / (eta * gamma)
};

// G = s^2 / (s^2 + b^2 T), m = m_tau b^2 T / (s^2 + b^2 T), b^2 = 1/(eta*gamma).
// Throws RecordUndefined when eta * gamma == 0.
AmmseCoefficients ammse_coeffs(const PriorMoments& prior, double eta, double gamma, double T);

inline double estimate_transition_time(double nu, const AmmseCoefficients& c)
{
    return c.G * nu + c.m;
}

enum class DelayMode {
    CalibratedQuantile,
    FixedReference,
};

// Delay = clamp(C - tau_hat, 0, delta_max): early transitions wait longer so
// that every photon leaves aligned near the reference C.
struct DelayPolicy {
    double C = 0.0;
    double delta_max = 0.0;
    DelayMode mode = DelayMode::FixedReference;
    double quantile = 0.0;      // calibration quantile, CalibratedQuantile only
    std::size_t batch_size = 0; // calibration batch size, CalibratedQuantile only
};

// C is the nearest-rank empirical quantile of the batch (floored at 0) and
// delta_max = C. Throws EmptyBatch on an empty batch.
DelayPolicy calibrate_reference(std::span<const double> tau_hats, double quantile = 0.95);

DelayPolicy fixed_reference(double C, double delta_max);

double apply_delay_policy(double tau_hat, const DelayPolicy& policy);

} // namespace sps
