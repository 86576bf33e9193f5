#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include "sps/errors.hpp"
#include "sps/linalg.hpp"
#include "sps/model.hpp"

namespace sps {

template <typename Scalar>
struct Channel {
    Scalar rate;
    Matrix4<Scalar> op;
};

// Time-independent Lindblad generator -i[H, .] + sum_k rate_k H[L_k].
// The effective non-Hermitian part K = -iH - 1/2 sum_k rate_k L_k^dag L_k is
// cached so that rhs(rho) = K rho + rho K^dag + sum_k rate_k L_k rho L_k^dag.
template <typename Scalar>
class LindbladGenerator {
public:
    LindbladGenerator(const Matrix4<Scalar>& hamiltonian, std::vector<Channel<Scalar>> channels)
        : hamiltonian_(hamiltonian), channels_(std::move(channels))
    {
        effective_ = Complex<Scalar>(0, -1) * hamiltonian_;
        for (const auto& c : channels_) {
            effective_ -= (c.rate / Scalar(2)) * (c.op.adjoint() * c.op);
        }
    }

    // Channels in fixed order: (gamma1, sigma1^-), (gamma2, sigma2^-), (kappa, a), (gamma, O).
    static LindbladGenerator from_params(const Params& p, const OperatorSet<Scalar>& ops)
    {
        return LindbladGenerator(ops.H, {
                                            {Scalar(p.gamma1), ops.sigma1_minus},
                                            {Scalar(p.gamma2), ops.sigma2_minus},
                                            {Scalar(p.kappa), ops.a},
                                            {Scalar(p.gamma), ops.O},
                                        });
    }

    static LindbladGenerator from_params(const Params& p)
    {
        return from_params(p, build_operators<Scalar>(p));
    }

    const Matrix4<Scalar>& hamiltonian() const { return hamiltonian_; }
    const std::vector<Channel<Scalar>>& channels() const { return channels_; }
    const Matrix4<Scalar>& effective() const { return effective_; }

private:
    Matrix4<Scalar> hamiltonian_;
    std::vector<Channel<Scalar>> channels_;
    Matrix4<Scalar> effective_;
};

using Generator = LindbladGenerator<double>;

template <typename Scalar>
Matrix4<Scalar> lindblad_rhs(const Matrix4<Scalar>& rho, const LindbladGenerator<Scalar>& gen)
{
    Matrix4<Scalar> k_rho = gen.effective() * rho;
    Matrix4<Scalar> out = k_rho + k_rho.adjoint();
    for (const auto& c : gen.channels()) {
        if (c.rate != Scalar(0)) {
            out.noalias() += c.rate * (c.op * rho * c.op.adjoint());
        }
    }
    return out;
}

inline constexpr double kBlowupMagnitude = 1e3;

// Hermitian symmetrization followed by trace normalization. Throws
// NumericalBlowup when an entry exceeds kBlowupMagnitude or is not finite.
template <typename Scalar>
Matrix4<Scalar> renormalize(const Matrix4<Scalar>& rho)
{
    const Scalar largest = rho.cwiseAbs().maxCoeff();
    if (!(largest <= Scalar(kBlowupMagnitude))) {
        throw NumericalBlowup("state entry magnitude " + std::to_string(double(largest)) +
                              " exceeds blow-up threshold");
    }
    Matrix4<Scalar> out = hermitian_part(rho);
    out /= out.trace().real();
    return out;
}

// Classical four-stage Runge-Kutta step, unnormalized.
template <typename Scalar>
Matrix4<Scalar> rk4_increment(const Matrix4<Scalar>& rho, const LindbladGenerator<Scalar>& gen,
                              Scalar h)
{
    const Matrix4<Scalar> k1 = lindblad_rhs(rho, gen);
    const Matrix4<Scalar> k2 = lindblad_rhs<Scalar>(rho + (h / 2) * k1, gen);
    const Matrix4<Scalar> k3 = lindblad_rhs<Scalar>(rho + (h / 2) * k2, gen);
    const Matrix4<Scalar> k4 = lindblad_rhs<Scalar>(rho + h * k3, gen);
    return rho + (h / 6) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

template <typename Scalar>
Matrix4<Scalar> rk4_step(const Matrix4<Scalar>& rho, const LindbladGenerator<Scalar>& gen, Scalar h)
{
    return renormalize(rk4_increment(rho, gen, h));
}

template <typename Scalar>
SuperMatrix<Scalar> liouvillian_matrix(const LindbladGenerator<Scalar>& gen)
{
    const Matrix4<Scalar> id = Matrix4<Scalar>::Identity();
    const Matrix4<Scalar>& k = gen.effective();
    SuperMatrix<Scalar> l = kron<Scalar>(id, k) + kron<Scalar>(k.conjugate(), id);
    for (const auto& c : gen.channels()) {
        if (c.rate != Scalar(0)) {
            l += c.rate * kron<Scalar>(c.op.conjugate(), c.op);
        }
    }
    return l;
}

// For a linear time-independent generator the four RK4 stages collapse to the
// degree-4 Taylor polynomial of h*L, so one step is a single 16x16 product.
template <typename Scalar>
class Rk4Stepper {
public:
    Rk4Stepper(const LindbladGenerator<Scalar>& gen, Scalar h) : h_(h)
    {
        const SuperMatrix<Scalar> hl = h * liouvillian_matrix(gen);
        SuperMatrix<Scalar> term = SuperMatrix<Scalar>::Identity();
        step_ = term;
        for (int order = 1; order <= 4; ++order) {
            term = (hl * term / Scalar(order)).eval();
            step_ += term;
        }
    }

    Scalar h() const { return h_; }
    const SuperMatrix<Scalar>& matrix() const { return step_; }

    Matrix4<Scalar> increment(const Matrix4<Scalar>& rho) const
    {
        SuperVector<Scalar> v = step_ * vec(rho);
        return unvec(v);
    }

    Matrix4<Scalar> step(const Matrix4<Scalar>& rho) const { return renormalize(increment(rho)); }

private:
    Scalar h_;
    SuperMatrix<Scalar> step_;
};

template <typename Scalar>
struct Propagator {
    Scalar duration;
    SuperMatrix<Scalar> matrix;

    Matrix4<Scalar> apply(const Matrix4<Scalar>& rho) const
    {
        SuperVector<Scalar> v = matrix * vec(rho);
        return unvec(v);
    }
};

// exp(L * duration) by Eigen's scaling-and-squaring Pade evaluation.
template <typename Scalar>
Propagator<Scalar> propagator(const LindbladGenerator<Scalar>& gen, Scalar duration)
{
    const SuperMatrix<Scalar> scaled = liouvillian_matrix(gen) * duration;
    return {duration, scaled.exp()};
}

// powers()[k] is the propagator over k * spacing, k = 0 .. count-1.
template <typename Scalar>
class PropagatorCache {
public:
    PropagatorCache(const LindbladGenerator<Scalar>& gen, Scalar spacing, int count)
        : spacing_(spacing)
    {
        powers_.reserve(static_cast<std::size_t>(count));
        if (count <= 0) {
            return;
        }
        powers_.push_back(SuperMatrix<Scalar>::Identity());
        const Propagator<Scalar> one = propagator(gen, spacing);
        for (int k = 1; k < count; ++k) {
            powers_.push_back(one.matrix * powers_.back());
        }
    }

    Scalar spacing() const { return spacing_; }
    int size() const { return static_cast<int>(powers_.size()); }
    const SuperMatrix<Scalar>& operator[](int k) const { return powers_[static_cast<std::size_t>(k)]; }

private:
    Scalar spacing_;
    std::vector<SuperMatrix<Scalar>, Eigen::aligned_allocator<SuperMatrix<Scalar>>> powers_;
};

// Populations, observer expectation and photon number on the full dt grid, plus
// full states on the correlation grid.
struct DeterministicSeries {
    double dt = 0.0;
    int corr_stride = 1;
    Eigen::VectorXd rho00, rho11, rho22, rho33;
    Eigen::VectorXd expO; // rho00 + rho11
    Eigen::VectorXd n;    // rho22
    std::vector<Matrix4cd, Eigen::aligned_allocator<Matrix4cd>> snapshots;

    long steps() const { return expO.size() - 1; }
    double time(long k) const { return static_cast<double>(k) * dt; }
};

// Fixed-step RK4 from rho0 over params.horizon. Every snapshot is checked as a
// density matrix (trace, hermiticity, positivity).
DeterministicSeries evolve_deterministic(const Matrix4cd& rho0, const Generator& gen,
                                         const Params& params);

// Same evolution on the correlation grid by repeated application of the exact
// propagator; the accuracy oracle for evolve_deterministic.
std::vector<Matrix4cd, Eigen::aligned_allocator<Matrix4cd>>
evolve_exact(const Matrix4cd& rho0, const Generator& gen, double spacing, int points);

// Smallest multiple of `block` (in 1/kappa) at which the ground population
// rho33 reaches `threshold`, capped at `cap`.
double settle_horizon(const Matrix4cd& rho0, const Generator& gen, double block = 10.0,
                      double threshold = 0.999, double cap = 500.0);

void write_series_csv(const DeterministicSeries& series, const std::string& path);

// kappa int n dt + gamma1 int rho11 dt + (rho00 + rho11 + rho22)(T): the single
// excitation leaves through the cavity, through the X1 loss channel, or remains.
double excitation_balance(const DeterministicSeries& series, const Params& params);

// Trapezoid rule on a uniform grid.
double trapezoid(std::span<const double> values, double h);

inline double trapezoid(const Eigen::VectorXd& values, double h)
{
    return trapezoid(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())), h);
}

} // namespace sps
