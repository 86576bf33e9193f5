// End-to-end acceptance suite: one PASS/FAIL line per criterion, exit status 1
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sps/experiments.hpp"
#include "sps/parallel.hpp"

using namespace sps;

namespace {

constexpr int kTrajectories = 2000;
constexpr int kReportTrajectories = 7000;
constexpr double kImprovementGatePct = 15.0;
constexpr double kImprovementTargetPct = 25.0;
constexpr double kGapSigmas = 3.0;
const std::vector<double> kGamma2{0.1, 0.5, 1.0};

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
        }
        if (!detail.empty()) {
            detail += "; ";
        }
        detail += (ok ? "" : "[x] ") + what;
    }
};

int failures = 0;

void report(const char* name, const Outcome& o, std::chrono::steady_clock::time_point start)
{
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %-26s %s  [%.0fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), s);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c, d);
    return buf;
}

// Reference operating point: g = 0.1, kappa = 1, gamma = 0.1, gamma1 = 0.001, eta = 1.
ExperimentConfig reference_config(int n_traj)
{
    ExperimentConfig config;
    config.params.n_traj = n_traj;
    config.workers = resolve_workers(0);
    validate_config(config);
    return config;
}

struct SweepPoint {
    CaseResult one, two, three;
};

std::map<double, SweepPoint> run_sweep()
{
    const auto config = reference_config(kTrajectories);
    std::map<double, SweepPoint> points;
    for (const double gamma2 : kGamma2) {
        SweepPoint& pt = points[gamma2];
        pt.one = run_case(config, CaseId::NoDephasing, gamma2);
        pt.two = run_case(config, CaseId::DephasingNoFeedForward, gamma2);
        pt.three = run_case(config, CaseId::DephasingFeedForward, gamma2);
        std::printf("      gamma2=%.1f  i=%.6f  ii=%.6f  iii=%.6f +- %.6f  (C=%.2f G=%.4f)\n", gamma2,
                    pt.one.lambda, pt.two.lambda, pt.three.lambda, pt.three.mc_stderr, *pt.three.C,
                    *pt.three.G);
        std::fflush(stdout);
    }
    return points;
}

double improvement_pct(const SweepPoint& pt)
{
    return 100.0 * (pt.three.lambda - pt.two.lambda) / pt.two.lambda;
}

double improvement_stderr_pct(const SweepPoint& pt)
{
    return 100.0 * pt.three.mc_stderr / pt.two.lambda;
}

void ordering(const std::map<double, SweepPoint>& points)
{
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    for (const auto& [gamma2, pt] : points) {
        const double sigma = pt.three.mc_stderr;
        o.require(pt.one.lambda - pt.three.lambda > kGapSigmas * sigma &&
                      pt.three.lambda - pt.two.lambda > kGapSigmas * sigma,
                  fmt("G2=%.1f i-iii=%.4f iii-ii=%.4f (3sd=%.4f)", gamma2,
                      pt.one.lambda - pt.three.lambda, pt.three.lambda - pt.two.lambda,
                      kGapSigmas * sigma));
    }
    report("ordering i > iii > ii", o, start);
}

void magnitude(const std::map<double, SweepPoint>& points)
{
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    const SweepPoint& pt = points.at(0.1);
    const double gate = improvement_pct(pt);
    o.require(gate >= kImprovementGatePct,
              fmt("G2=0.1 n=2000: %.2f%% +- %.2f%% (gate %.0f%%)", gate, improvement_stderr_pct(pt),
                  kImprovementGatePct));

    const auto config = reference_config(kReportTrajectories);
    SweepPoint large{pt.one, pt.two, run_case(config, CaseId::DephasingFeedForward, 0.1)};
    o.detail += fmt("; n=7000: %.2f%% +- %.2f%% (target %.0f%%)", improvement_pct(large),
                    improvement_stderr_pct(large), kImprovementTargetPct);
    report("improvement magnitude", o, start);
}

void trend(const std::map<double, SweepPoint>& points)
{
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    const SweepPoint& low = points.at(0.1);
    const SweepPoint& high = points.at(1.0);
    const double diff = improvement_pct(low) - improvement_pct(high);
    const double combined =
        std::hypot(improvement_stderr_pct(low), improvement_stderr_pct(high));
    o.require(diff > combined, fmt("imp(0.1)=%.2f%% imp(1.0)=%.2f%% diff=%.2f%% > %.2f%%",
                                   improvement_pct(low), improvement_pct(high), diff, combined));
    if (improvement_pct(low) <= 0.0) {
        o.detail += "; note: no positive improvement at either end";
    }
    report("improvement trend", o, start);
}

void deterministic_numerics()
{
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    const auto config = reference_config(kTrajectories);
    for (const double gamma2 : kGamma2) {
        const Params p = resolve_params(config, gamma2);
        const auto gen = Generator::from_params(p);
        const auto rho0 = initial_state<double>();
        const auto series = evolve_deterministic(rho0, gen, p);
        const auto exact = evolve_exact(rho0, gen, p.corr_spacing(), p.corr_points());
        double sup = 0.0;
        double trace = 0.0;
        double min_eig = 1.0;
        for (std::size_t j = 0; j < series.snapshots.size(); ++j) {
            sup = std::max(sup, (series.snapshots[j] - exact[j]).cwiseAbs().maxCoeff());
            const auto d = diagnose(series.snapshots[j]);
            trace = std::max(trace, d.trace_error);
            min_eig = std::min(min_eig, d.min_eigenvalue);
        }
        const double balance = std::abs(excitation_balance(series, p) - 1.0);
        o.require(sup <= 1e-8 && trace <= 1e-9 && min_eig >= -1e-8 && balance <= 1e-6,
                  fmt("G2=%.1f sup=%.1e trace=%.1e mineig=%.1e", gamma2, sup, trace, min_eig) +
                      fmt(" bal=%.1e", balance));
    }
    report("deterministic numerics", o, start);
}

void stochastic_consistency()
{
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    const auto config = reference_config(kTrajectories);
    const int workers = config.workers;
    const Params p = resolve_params(config, 0.5);
    const auto gen = Generator::from_params(p);

    // (a) batch means of conditional states against the unconditional evolution.
    {
        const auto series = evolve_deterministic(initial_state<double>(), gen, p);
        const int n_batches = 100;
        const int per_batch = kTrajectories / n_batches;
        const std::size_t points = series.snapshots.size();
        std::vector<Snapshots> batch_sum(static_cast<std::size_t>(n_batches),
                                         Snapshots(points, Matrix4cd::Zero()));
        ordered_parallel_for(
            kTrajectories, workers,
            [&](std::size_t i) { return simulate_trajectory(p, gen, i).rho_snapshots; },
            [&](std::size_t i, Snapshots snapshots) {
                auto& sum = batch_sum[i / static_cast<std::size_t>(per_batch)];
                for (std::size_t j = 0; j < points; ++j) {
                    sum[j] += snapshots[j];
                }
            });
        int violations = 0;
        double worst = 0.0;
        for (std::size_t j = 0; j < points; ++j) {
            for (int r = 0; r < kDim; ++r) {
                for (int c = r; c < kDim; ++c) {
                    for (const bool imag : {false, true}) {
                        const auto part = [&](const Matrix4cd& m) {
                            return imag ? m(r, c).imag() : m(r, c).real();
                        };
                        double mean = 0.0;
                        double sq = 0.0;
                        for (const auto& batch : batch_sum) {
                            const double x = part(batch[j]) / per_batch;
                            mean += x;
                            sq += x * x;
                        }
                        mean /= n_batches;
                        const double var = std::max(0.0, (sq / n_batches - mean * mean) *
                                                             n_batches / (n_batches - 1));
                        const double se = std::sqrt(var / n_batches);
                        const double diff = std::abs(mean - part(series.snapshots[j]));
                        if (diff > 5.0 * se + 1e-12) {
                            ++violations;
                        }
                        if (se > 0.0) {
                            worst = std::max(worst, diff / se);
                        }
                    }
                }
            }
        }
        o.require(violations == 0, fmt("(a) %.0f snapshots, max |dev|/se=%.2f, violations=%.0f",
                                        static_cast<double>(points), worst, violations));
    }

    // (b) record noise variance.
    {
        const int n = 10000;
        TrajectoryOptions options;
        options.keep_snapshots = false;
        double sum = 0.0;
        double sq = 0.0;
        ordered_parallel_for(
            n, workers,
            [&](std::size_t i) {
                const auto out = simulate_trajectory(p, gen, i, options);
                return out.nu - out.tau;
            },
            [&](std::size_t, double x) {
                sum += x;
                sq += x * x;
            },
            16);
        const double mean = sum / n;
        const double var = (sq / n - mean * mean) * n / (n - 1);
        const double expected = p.horizon / (p.eta * p.gamma);
        o.require(std::abs(var / expected - 1.0) <= 0.1,
                  fmt("(b) var=%.1f beta^2 T=%.1f", var, expected));
    }

    // (c) unmonitored stochastic path.
    {
        Params quiet = p;
        quiet.eta = 0.0;
        const auto ops = build_operators<double>(quiet);
        const SmeIntegrator<double> sme(gen, ops.O, quiet.eta, quiet.gamma, quiet.dt, quiet.scheme);
        const auto series = evolve_deterministic(initial_state<double>(), gen, quiet);
        NoiseStream noise(quiet.master_seed, 0);
        Matrix4cd rho = initial_state<double>();
        double worst = 0.0;
        for (long k = 1; k <= quiet.steps(); ++k) {
            rho = sme.step(rho, noise.increment(quiet.dt));
            if (k % quiet.corr_stride == 0) {
                const auto j = static_cast<std::size_t>(k / quiet.corr_stride);
                worst = std::max(worst, (rho - series.snapshots[j]).cwiseAbs().maxCoeff());
            }
        }
        o.require(worst <= 1e-12, fmt("(c) eta=0 sup=%.1e", worst));
    }
    report("stochastic consistency", o, start);
}

void estimator()
{
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    double identity = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double m_tau = 100.0 * u(rng);
        const auto c = ammse_coeffs({m_tau, m_tau * m_tau, PriorSource::Explicit}, u(rng), u(rng),
                                    500.0 * u(rng));
        identity = std::max(identity, std::abs(c.G + c.m / m_tau - 1.0));
    }
    o.require(identity <= 1e-12, fmt("max |G + m/m_tau - 1|=%.1e", identity));

    int beaten = 0;
    for (const double m_tau : {5.0, 20.0, 60.0}) {
        const double eta = 1.0;
        const double gamma = 0.1;
        const double T = 200.0;
        const auto c = ammse_coeffs({m_tau, m_tau * m_tau, PriorSource::Explicit}, eta, gamma, T);
        std::exponential_distribution<double> exponential(1.0 / m_tau);
        std::normal_distribution<double> normal(0.0, std::sqrt(T / (eta * gamma)));
        std::vector<double> tau(10000);
        std::vector<double> nu(tau.size());
        for (std::size_t i = 0; i < tau.size(); ++i) {
            tau[i] = exponential(rng);
            nu[i] = tau[i] + normal(rng);
        }
        const auto mse = [&](double G, double m) {
            double s = 0.0;
            for (std::size_t i = 0; i < tau.size(); ++i) {
                const double e = tau[i] - (G * nu[i] + m);
                s += e * e;
            }
            return s / static_cast<double>(tau.size());
        };
        const double best = mse(c.G, c.m);
        std::normal_distribution<double> dG(0.0, 0.05);
        std::normal_distribution<double> dm(0.0, 0.1 * m_tau);
        for (int trial = 0; trial < 100; ++trial) {
            beaten += best <= mse(c.G + dG(rng), c.m + dm(rng)) ? 1 : 0;
        }
    }
    o.require(beaten == 300, fmt("AMMSE beats %.0f/300 perturbed estimators", beaten));
    report("estimator", o, start);
}

void hom_functional()
{
    const auto start = std::chrono::steady_clock::now();
    Outcome o;

    Params pure;
    pure.gamma = 0.0;
    pure.gamma1 = 0.0;
    pure.horizon = 150.0;
    const auto wavepacket = deterministic_correlations(pure, CaseId::NoDephasing, BasisState::X1_0);
    const double lambda_pure = coincidence_probability(wavepacket).lambda;
    o.require(std::abs(lambda_pure - 1.0) <= 1e-6, fmt("pure 1-L=%.1e", 1.0 - lambda_pure));

    auto incoherent = wavepacket;
    const Eigen::VectorXcd diag = incoherent.g1.diagonal();
    incoherent.g1.setZero();
    incoherent.g1.diagonal() = diag;
    const double lambda_incoherent = coincidence_probability(incoherent).lambda;
    o.require(lambda_incoherent == 0.5, fmt("incoherent L=%.17g", lambda_incoherent));

    const auto config = reference_config(kTrajectories);
    const double gamma2 = 0.5;
    const Params p = resolve_params(config, gamma2);
    const auto two = deterministic_correlations(p, CaseId::DephasingNoFeedForward);
    const double gap = std::abs(coincidence_probability(two).p_c -
                                coincidence_probability_expanded(two, two).p_c);
    o.require(gap <= 1e-12, fmt("expanded-reduced=%.1e", gap));

    auto zero = config;
    zero.zero_delay = true;
    const auto ii = run_case(config, CaseId::DephasingNoFeedForward, gamma2);
    const auto iii = run_case(zero, CaseId::DephasingFeedForward, gamma2);
    o.require(std::abs(iii.lambda - ii.lambda) <= kGapSigmas * iii.mc_stderr,
              fmt("zero-delay iii=%.5f ii=%.5f |d|=%.5f (3sd=%.5f)", iii.lambda, ii.lambda,
                  std::abs(iii.lambda - ii.lambda), kGapSigmas * iii.mc_stderr));
    report("HOM functional", o, start);
}

} // namespace

int main()
{
    try {
        std::printf("acceptance: %d worker(s), n_traj=%d\n", resolve_workers(0), kTrajectories);
        deterministic_numerics();
        estimator();
        hom_functional();
        stochastic_consistency();
        const auto points = run_sweep();
        ordering(points);
        magnitude(points);
        trend(points);
    } catch (const std::exception& e) {
        std::printf("FAIL  aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
