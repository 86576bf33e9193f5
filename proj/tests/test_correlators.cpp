#include <doctest.h>

#include "sps/correlators.hpp"
#include "sps/hom.hpp"

using namespace sps;

namespace {

Params short_params()
{
    Params p;
    p.gamma2 = 1.0;
    p.horizon = 40.0;
    p.corr_stride = 50;
    return p;
}

// Tr[a exp(L (t_k - t_j)) (rho_j a^dag)] with the full unvec at every pair.
Eigen::MatrixXcd naive_g1(const Snapshots& snapshots, const Generator& gen, double spacing)
{
    const auto ops = build_operators<double>(0.0);
    const int size = static_cast<int>(snapshots.size());
    Eigen::MatrixXcd g1 = Eigen::MatrixXcd::Zero(size, size);
    for (int j = 0; j < size; ++j) {
        for (int k = j; k < size; ++k) {
            const auto prop = propagator(gen, spacing * (k - j));
            const Matrix4cd x = prop.apply(snapshots[static_cast<std::size_t>(j)] * ops.a.adjoint());
            g1(j, k) = (ops.a * x).trace();
        }
    }
    return g1;
}

CorrelationEnsemble single_ensemble(const Snapshots& snapshots, const Generator& gen, double spacing,
                                    int shift = 0, int size = -1)
{
    CorrelationGrid grid{spacing, size < 0 ? static_cast<int>(snapshots.size()) : size};
    EnsembleAccumulator acc(grid);
    acc.add(snapshots, shift);
    return finalize(acc, PropagatorCache<double>(gen, spacing, grid.size), CauchySchwarzCheck::Enforce);
}

} // namespace

TEST_CASE("regression agrees with the direct two-time evaluation")
{
    const Params p = short_params();
    const auto gen = Generator::from_params(case_params(p, CaseId::DephasingNoFeedForward));
    const auto snapshots = evolve_exact(initial_state<double>(), gen, p.corr_spacing(), p.corr_points());
    const auto ens = single_ensemble(snapshots, gen, p.corr_spacing());
    const auto oracle = naive_g1(snapshots, gen, p.corr_spacing());
    for (int j = 0; j < ens.grid.size; ++j) {
        for (int k = j; k < ens.grid.size; ++k) {
            CHECK(std::abs(ens.g1(j, k) - oracle(j, k)) <= 1e-12);
        }
        CHECK(ens.g1(j, j).real() == doctest::Approx(ens.n_bar[j]).epsilon(1e-12));
    }
}

TEST_CASE("free cavity decay correlation")
{
    Params p;
    p.g = 0.0;
    p.gamma = 0.0;
    p.gamma1 = 0.0;
    p.gamma2 = 0.0;
    p.horizon = 10.0;
    const auto gen = Generator::from_params(p);
    const auto snapshots =
        evolve_exact(initial_state<double>(BasisState::G_1), gen, p.corr_spacing(), p.corr_points());
    const auto ens = single_ensemble(snapshots, gen, p.corr_spacing());
    for (int j = 0; j < ens.grid.size; ++j) {
        for (int k = j; k < ens.grid.size; ++k) {
            const double expected = std::exp(-p.kappa * (ens.grid.time(j) + ens.grid.time(k)) / 2.0);
            CHECK(std::abs(ens.g1(j, k) - expected) <= 1e-12);
        }
    }
}

TEST_CASE("pure emission gives a rank-one kernel")
{
    Params p;
    p.gamma = 0.0;
    p.gamma1 = 0.0;
    p.horizon = 150.0;
    const auto ens = deterministic_correlations(p, CaseId::NoDephasing, BasisState::X1_0);
    double worst = 0.0;
    for (int j = 0; j < ens.grid.size; ++j) {
        for (int k = j; k < ens.grid.size; ++k) {
            worst = std::max(worst, std::abs(std::norm(ens.g1(j, k)) - ens.n_bar[j] * ens.n_bar[k]));
        }
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("regression is linear in the snapshots")
{
    const Params p = short_params();
    const auto gen = Generator::from_params(p);
    const auto a = evolve_exact(initial_state<double>(), gen, p.corr_spacing(), p.corr_points());
    const auto b = evolve_exact(initial_state<double>(BasisState::X1_0), gen, p.corr_spacing(),
                                p.corr_points());
    Snapshots mix(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        mix[j] = 0.3 * a[j] + 0.7 * b[j];
    }
    const PropagatorCache<double> cache(gen, p.corr_spacing(), p.corr_points());
    const Eigen::MatrixXcd lhs = regression_g1(mix, cache);
    const Eigen::MatrixXcd rhs = 0.3 * regression_g1(a, cache) + 0.7 * regression_g1(b, cache);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("shifted accumulation")
{
    const Params p = short_params();
    const auto gen = Generator::from_params(p);
    const auto snapshots = evolve_exact(initial_state<double>(), gen, p.corr_spacing(), p.corr_points());
    const int size = static_cast<int>(snapshots.size());
    const int shift = 5;
    const auto base = single_ensemble(snapshots, gen, p.corr_spacing());
    const auto moved = single_ensemble(snapshots, gen, p.corr_spacing(), shift, size + shift);
    for (int j = 0; j < shift; ++j) {
        CHECK(moved.n_bar[j] == 0.0);
    }
    for (int j = 0; j < size; ++j) {
        CHECK(moved.n_bar[j + shift] == base.n_bar[j]);
        for (int k = j; k < size; ++k) {
            CHECK(std::abs(moved.g1(j + shift, k + shift) - base.g1(j, k)) <= 1e-14);
        }
    }

    EnsembleAccumulator twice(base.grid);
    twice.add(snapshots, 0);
    twice.add(snapshots, 0);
    const auto doubled = finalize(twice, PropagatorCache<double>(gen, p.corr_spacing(), size));
    CHECK((doubled.n_bar - base.n_bar).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((doubled.g1 - base.g1).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(doubled.n_contributing == 2);

    EnsembleAccumulator small(base.grid);
    CHECK_THROWS_AS(small.add(snapshots, 1), DelayOutOfRange);
    CHECK_THROWS_AS(delay_slots(10.0, base.grid, 5.0), DelayOutOfRange);
    CHECK_THROWS_AS(delay_slots(-1.0, base.grid, 5.0), DelayOutOfRange);
    CHECK(delay_slots(0.0, base.grid, 5.0) == 0);
    CHECK(delay_slots(2.0 * p.corr_spacing(), base.grid, 5.0) == 2);
}

TEST_CASE("kernel accumulator shift semantics")
{
    TrajectoryKernel kernel;
    kernel.n = Eigen::VectorXd::Constant(3, 0.1);
    kernel.g1 = Eigen::MatrixXcd::Constant(3, 3, 0.1);
    KernelAccumulator acc(CorrelationGrid{0.25, 5});
    acc.add(kernel, 2);
    const auto ens = acc.finalize();
    CHECK(ens.n_bar[0] == 0.0);
    CHECK(ens.n_bar[2] == 0.1);
    CHECK(ens.g1(2, 4) == std::complex<double>(0.1));
    CHECK(ens.g1(1, 2) == std::complex<double>(0.0));
    CHECK_THROWS_AS(acc.add(kernel, 3), DelayOutOfRange);
    CHECK_THROWS_AS(KernelAccumulator(CorrelationGrid{0.25, 5}).finalize(), EmptyBatch);
}

TEST_CASE("case ii without dephasing reduces to case i")
{
    Params p;
    p.gamma2 = 0.5;
    p.horizon = 190.0;
    const auto one = deterministic_correlations(p, CaseId::NoDephasing);
    p.gamma = 0.0;
    const auto two = deterministic_correlations(p, CaseId::DephasingNoFeedForward);
    CHECK((one.n_bar - two.n_bar).cwiseAbs().maxCoeff() == 0.0);
    CHECK((one.g1 - two.g1).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(deterministic_correlations(p, CaseId::DephasingFeedForward), InvalidParams);
}

TEST_CASE("smoothed kernels")
{
    Params p;
    p.gamma2 = 1.0;
    p.horizon = 190.0;
    const auto gen = Generator::from_params(p);
    const auto ops = build_operators<double>(p);
    const SmeIntegrator<double> sme(gen, ops.O, p.eta, p.gamma, p.dt, p.scheme);
    TrajectoryOptions options;
    options.keep_factors = true;

    const auto reference = deterministic_correlations(p, CaseId::DephasingNoFeedForward);
    KernelAccumulator acc(reference.grid);
    const int n_traj = 150;
    double worst_excess = 0.0;
    for (int i = 0; i < n_traj; ++i) {
        const auto outcome = simulate_trajectory(p, gen, static_cast<std::uint64_t>(i), options);
        const auto kernel = smoothed_kernel(outcome, sme, p.corr_stride);
        CorrelationEnsemble single;
        single.n_bar = kernel.n;
        single.g1 = kernel.g1;
        worst_excess = std::max(worst_excess, cauchy_schwarz_excess(single));
        CHECK(kernel.n.minCoeff() >= 0.0);
        acc.add(kernel, 0);
    }
    CHECK(worst_excess <= 1e-10);

    // The smoothed estimate averages to the unconditional one.
    const auto mean = acc.finalize();
    const double lambda_mean = coincidence_probability(mean).lambda;
    const double lambda_ref = coincidence_probability(reference).lambda;
    CHECK(std::abs(lambda_mean - lambda_ref) <= 0.02);
    CHECK(std::abs(emission_probability(mean, p.kappa) - emission_probability(reference, p.kappa)) <=
          0.02);

    auto bare = simulate_trajectory(p, gen, 0);
    CHECK_THROWS_AS(smoothed_kernel(bare, sme, p.corr_stride), InvalidParams);
}
