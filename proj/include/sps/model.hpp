#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sps/errors.hpp"
#include "sps/linalg.hpp"

namespace sps {

// Discretization of the measurement back-action term of the SME.
enum class DiffusionScheme {
    // Diagonal Kraus-form update K rho K on top of the RK4 drift; keeps
    // conditional states positive.
    Exponential,
    // Additive Euler-Maruyama innovation term.
    EulerMaruyama,
};

const char* to_string(DiffusionScheme s);

// Physical and numerical settings. Rates are in units of kappa, times in 1/kappa,
// and hbar = 1 throughout.
struct Params {
    double g = 0.1;
    double kappa = 1.0;
    double gamma = 0.1;
    double gamma1 = 0.001;
    double gamma2 = 0.5;
    double eta = 1.0;
    double dt = 0.01;
    double horizon = 200.0;
    int corr_stride = 25;
    std::uint64_t master_seed = 20070501;
    int n_traj = 2000;
    DiffusionScheme scheme = DiffusionScheme::Exponential;

    double max_rate() const;
    // Number of integration steps covering the horizon.
    long steps() const;
    // Correlation-grid spacing.
    double corr_spacing() const { return dt * corr_stride; }
    // Number of correlation-grid points on [0, horizon], both ends included.
    int corr_points() const;
};

// The three source configurations compared in the indistinguishability study.
enum class CaseId {
    NoDephasing,            // gamma = 0, deterministic
    DephasingNoFeedForward, // eta = 0, deterministic
    DephasingFeedForward,   // monitored trajectories with delay correction
};

const char* to_string(CaseId c);
// Short CSV/CLI label: "i", "ii", "iii".
const char* case_label(CaseId c);
CaseId parse_case(const std::string& label);

// Params with the case's generator settings applied.
Params case_params(const Params& params, CaseId c);

struct ValidationReport {
    std::vector<std::string> warnings;

    bool clean() const { return warnings.empty(); }
};

// Throws InvalidParams listing every hard violation. Soft violations of the
// bad-cavity regime come back as warnings.
ValidationReport validate_params(const Params& params);

// Rounds the horizon to the nearest positive multiple of the correlation-grid
// spacing (hence also of dt). Returns the adjusted copy.
Params with_rounded_horizon(const Params& params);

// dt that resolves the fastest rate with 100 steps, capped at 0.01.
double default_dt(const Params& params);

// Joint basis {|X2,0>, |X1,0>, |G,1>, |G,0>}: the 4-state subspace reached from
// |X2,0> under the Jaynes-Cummings coupling and the four incoherent channels.
enum class BasisState : int {
    X2_0 = 0,
    X1_0 = 1,
    G_1 = 2,
    G_0 = 3,
};

constexpr int index(BasisState s) { return static_cast<int>(s); }

const char* to_string(BasisState s);

template <typename Scalar>
struct OperatorSet {
    Matrix4<Scalar> H;            // Hamiltonian / hbar, interaction picture
    Matrix4<Scalar> sigma1_minus; // |G,0><X1,0|
    Matrix4<Scalar> sigma2_minus; // |X1,0><X2,0|
    Matrix4<Scalar> a;            // |G,0><G,1|
    Matrix4<Scalar> O;            // observer: I - |G><G|
    Matrix4<Scalar> n_op;         // a^dagger a
};

template <typename Scalar>
Matrix4<Scalar> basis_projector(BasisState row, BasisState col)
{
    Matrix4<Scalar> m = Matrix4<Scalar>::Zero();
    m(index(row), index(col)) = Scalar(1);
    return m;
}

// H = i g (a^dag sigma1^- - a sigma1^+). In the joint basis a^dag sigma1^- maps
// |X1,0> to |G,1>, so <G,1|H|X1,0> = i g.
template <typename Scalar>
OperatorSet<Scalar> build_operators(Scalar g)
{
    using B = BasisState;
    OperatorSet<Scalar> ops;
    ops.H = Matrix4<Scalar>::Zero();
    ops.H(index(B::G_1), index(B::X1_0)) = Complex<Scalar>(0, g);
    ops.H(index(B::X1_0), index(B::G_1)) = Complex<Scalar>(0, -g);
    ops.sigma1_minus = basis_projector<Scalar>(B::G_0, B::X1_0);
    ops.sigma2_minus = basis_projector<Scalar>(B::X1_0, B::X2_0);
    ops.a = basis_projector<Scalar>(B::G_0, B::G_1);
    ops.O = basis_projector<Scalar>(B::X2_0, B::X2_0) + basis_projector<Scalar>(B::X1_0, B::X1_0);
    ops.n_op = ops.a.adjoint() * ops.a;
    return ops;
}

template <typename Scalar>
OperatorSet<Scalar> build_operators(const Params& params)
{
    return build_operators<Scalar>(static_cast<Scalar>(params.g));
}

template <typename Scalar>
Matrix4<Scalar> initial_state(BasisState label = BasisState::X2_0)
{
    return basis_projector<Scalar>(label, label);
}

struct StateDiagnostics {
    double trace_error = 0.0;       // |Tr rho - 1|
    double hermiticity_error = 0.0; // max |rho - rho^dag|
    double min_eigenvalue = 0.0;
    double purity = 0.0;            // Tr rho^2
};

template <typename Scalar>
StateDiagnostics diagnose(const Matrix4<Scalar>& rho)
{
    StateDiagnostics d;
    d.trace_error = static_cast<double>(std::abs(rho.trace() - Complex<Scalar>(1)));
    d.hermiticity_error = static_cast<double>((rho - rho.adjoint()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Matrix4<Scalar>> solver(hermitian_part(rho),
                                                          Eigen::EigenvaluesOnly);
    d.min_eigenvalue = static_cast<double>(solver.eigenvalues().minCoeff());
    d.purity = static_cast<double>((rho * rho).trace().real());
    return d;
}

struct StateTolerances {
    double trace = 1e-9;
    double hermiticity = 1e-10;
    double min_eigenvalue = -1e-8;
};

// Throws InvariantViolation when rho is not a density matrix within tolerance.
template <typename Scalar>
void check_density_matrix(const Matrix4<Scalar>& rho, const StateTolerances& tol = {})
{
    const auto d = diagnose(rho);
    if (d.trace_error > tol.trace || d.hermiticity_error > tol.hermiticity ||
        d.min_eigenvalue < tol.min_eigenvalue) {
        throw InvariantViolation("density matrix check failed: trace error " +
                                 std::to_string(d.trace_error) + ", hermiticity error " +
                                 std::to_string(d.hermiticity_error) + ", min eigenvalue " +
                                 std::to_string(d.min_eigenvalue));
    }
}

} // namespace sps
