#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sps/liouville.hpp"
#include "sps/model.hpp"

namespace sps {

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent seed domains so calibration and measurement batches never share
// a noise realization.
enum class SeedDomain : std::uint64_t {
    Measurement = 0,
    Calibration = 1,
};

constexpr std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index,
                                        SeedDomain domain = SeedDomain::Measurement)
{
    return splitmix64(splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(domain))) +
                      index);
}

// Per-trajectory Wiener increments dW ~ Normal(0, h).
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    NoiseStream(std::uint64_t master_seed, std::uint64_t index,
                SeedDomain domain = SeedDomain::Measurement)
        : NoiseStream(trajectory_seed(master_seed, index, domain))
    {
    }

    double increment(double h) { return std::sqrt(h) * normal_(engine_); }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

inline double gaussian_increment(NoiseStream& stream, double h)
{
    return stream.increment(h);
}

// Measurement back-action (O - <O>) rho + rho (O - <O>) for Hermitian O.
template <typename Scalar>
Matrix4<Scalar> innovation(const Matrix4<Scalar>& rho, const Matrix4<Scalar>& observer)
{
    const Scalar mean = (observer * rho).trace().real();
    const Matrix4<Scalar> shifted = observer - mean * Matrix4<Scalar>::Identity();
    const Matrix4<Scalar> left = shifted * rho;
    return left + left.adjoint();
}

// Copy of gen whose observer channel has `measured_rate` removed: the part of
// the dephasing that the exponential scheme reproduces through K rho K.
template <typename Scalar>
LindbladGenerator<Scalar> unmonitored_part(const LindbladGenerator<Scalar>& gen,
                                           const Matrix4<Scalar>& observer, Scalar measured_rate)
{
    auto channels = gen.channels();
    for (auto& c : channels) {
        if (c.op == observer) {
            c.rate = std::max(Scalar(0), c.rate - measured_rate);
            return LindbladGenerator<Scalar>(gen.hamiltonian(), std::move(channels));
        }
    }
    if (measured_rate == Scalar(0)) {
        return gen;
    }
    throw InvariantViolation("generator has no channel for the monitored observer");
}

// k = exp(s dW (o - <O>) - s^2 h (o - <O>)^2) over the (diagonal) observer
// spectrum o, with <O> taken on the pre-step state.
template <typename Scalar>
Eigen::Matrix<Scalar, kDim, 1> backaction_weights(const Matrix4<Scalar>& observer, Scalar mean,
                                                  Scalar strength, Scalar h, Scalar dW)
{
    Eigen::Matrix<Scalar, kDim, 1> k;
    for (int i = 0; i < kDim; ++i) {
        const Scalar shifted = observer(i, i).real() - mean;
        k(i) = std::exp(strength * dW * shifted - strength * strength * h * shifted * shifted);
    }
    return k;
}

// rho_ij -> k_i k_j rho_ij with k from backaction_weights. Averaged over dW this
// reproduces s^2 H[O] to first order in h.
template <typename Scalar>
Matrix4<Scalar> exponential_backaction(const Matrix4<Scalar>& rho, const Matrix4<Scalar>& observer,
                                       Scalar mean, Scalar strength, Scalar h, Scalar dW)
{
    const auto k = backaction_weights(observer, mean, strength, h, dW);
    const Eigen::Matrix<Scalar, kDim, kDim> weights = k * k.transpose();
    return rho.cwiseProduct(weights.template cast<Complex<Scalar>>());
}

// One Exponential-scheme step as a linear map: X -> (W o S[X]) / norm with
// W = weights weights^T and S the drift step.
template <typename Scalar>
struct StepFactors {
    Eigen::Matrix<Scalar, kDim, 1> weights = Eigen::Matrix<Scalar, kDim, 1>::Ones();
    Scalar norm = 1;
};

// One SME step with the RK4 drift. EulerMaruyama adds
// sqrt(eta*gamma) * innovation(rho) * dW to the full RK4 drift; Exponential applies
// exponential_backaction to the RK4 drift of the unmonitored generator. Both are
// symmetrized and trace-normalized and reduce to rk4_step when eta*gamma == 0.
template <typename Scalar>
Matrix4<Scalar> sme_step(const Matrix4<Scalar>& rho, const LindbladGenerator<Scalar>& gen,
                         const Matrix4<Scalar>& observer, Scalar eta, Scalar gamma, Scalar h,
                         Scalar dW, DiffusionScheme scheme = DiffusionScheme::Exponential)
{
    const Scalar strength = std::sqrt(eta * gamma);
    if (scheme == DiffusionScheme::EulerMaruyama || strength == Scalar(0)) {
        Matrix4<Scalar> next = rk4_increment(rho, gen, h);
        next += (strength * dW) * innovation(rho, observer);
        return renormalize(next);
    }
    const Scalar mean = (observer * rho).trace().real();
    const auto drift = unmonitored_part(gen, observer, eta * gamma);
    return renormalize(
        exponential_backaction<Scalar>(rk4_increment(rho, drift, h), observer, mean, strength, h, dW));
}

// sme_step with the drift folded into a precomputed RK4 step matrix.
template <typename Scalar>
class SmeIntegrator {
public:
    SmeIntegrator(const LindbladGenerator<Scalar>& gen, const Matrix4<Scalar>& observer,
                  Scalar eta, Scalar gamma, Scalar h,
                  DiffusionScheme scheme = DiffusionScheme::Exponential)
        : scheme_(strength_of(eta, gamma) == Scalar(0) ? DiffusionScheme::EulerMaruyama : scheme),
          stepper_(scheme_ == DiffusionScheme::Exponential
                       ? unmonitored_part(gen, observer, eta * gamma)
                       : gen,
                   h),
          observer_(observer), strength_(strength_of(eta, gamma))
    {
    }

    Scalar h() const { return stepper_.h(); }
    Scalar strength() const { return strength_; }

    // With `factors`, also reports the diagonal back-action weights and the
    // trace removed by the normalization, so that the step can be replayed as
    // a linear map (Exponential scheme only).
    Matrix4<Scalar> step(const Matrix4<Scalar>& rho, Scalar dW,
                         StepFactors<Scalar>* factors = nullptr) const
    {
        if (scheme_ == DiffusionScheme::EulerMaruyama) {
            Matrix4<Scalar> next = stepper_.increment(rho);
            next += (strength_ * dW) * innovation(rho, observer_);
            return renormalize(next);
        }
        const Scalar mean = (observer_ * rho).trace().real();
        const Matrix4<Scalar> next = exponential_backaction<Scalar>(stepper_.increment(rho), observer_,
                                                                    mean, strength_, h(), dW);
        if (factors != nullptr) {
            factors->weights = backaction_weights(observer_, mean, strength_, h(), dW);
            factors->norm = next.trace().real();
        }
        return renormalize(next);
    }

    DiffusionScheme scheme() const { return scheme_; }

    // RK4 step matrix of the drift (the unmonitored generator for Exponential).
    const SuperMatrix<Scalar>& drift_matrix() const { return stepper_.matrix(); }

private:
    static Scalar strength_of(Scalar eta, Scalar gamma) { return std::sqrt(eta * gamma); }

    DiffusionScheme scheme_;
    Rk4Stepper<Scalar> stepper_;
    Matrix4<Scalar> observer_;
    Scalar strength_;
};

struct TrajectoryOutcome {
    std::uint64_t traj_index = 0;
    std::uint64_t seed = 0;
    Eigen::VectorXd expO_series; // <O>(t_k), k = 0..steps
    std::vector<Matrix4cd, Eigen::aligned_allocator<Matrix4cd>> rho_snapshots;
    double nu = 0.0;  // integrated record
    double tau = 0.0; // integral of the conditional <O>
    double min_eigenvalue = 0.0;
    double max_purity = 0.0;
    double max_field_coherence = 0.0; // max |<a>| over snapshots
    std::vector<double> record;       // J(t_k); only when requested
    std::vector<StepFactors<double>, Eigen::aligned_allocator<StepFactors<double>>>
        factors; // per step; only when requested
};

struct TrajectoryOptions {
    SeedDomain domain = SeedDomain::Measurement;
    BasisState initial = BasisState::X2_0;
    bool keep_record = false;
    bool keep_snapshots = true;
    bool keep_factors = false; // needs the Exponential scheme
};

// Integrates one monitored trajectory over the horizon. The same dW_k drives
// the state update and the record, nu = sum_k (<O>(t_k) h + dW_k / sqrt(eta*gamma)).
// Throws RecordUndefined when eta*gamma == 0.
TrajectoryOutcome simulate_trajectory(const Params& params, const Generator& gen,
                                      std::uint64_t index, const TrajectoryOptions& options = {});

// Writes t, expO, J for a trajectory simulated with keep_record.
void write_trajectory_csv(const TrajectoryOutcome& outcome, double dt, const std::string& path);

} // namespace sps
