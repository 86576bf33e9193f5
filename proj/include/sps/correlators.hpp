#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "sps/liouville.hpp"
#include "sps/model.hpp"
#include "sps/trajectory.hpp"

namespace sps {

using Snapshots = std::vector<Matrix4cd, Eigen::aligned_allocator<Matrix4cd>>;

// Uniform grid t_j = j * spacing, j = 0 .. size-1.
struct CorrelationGrid {
    double spacing = 0.25;
    int size = 0;

    double time(int j) const { return spacing * j; }
    double span() const { return spacing * (size - 1); }
};

// Grid covering [0, horizon + delta_max].
CorrelationGrid make_grid(const Params& params, double delta_max = 0.0);

// Mean photon number and upper triangle (k >= j) of G1(t_j, t_k) = <a^dag(t_j) a(t_k)>.
struct CorrelationEnsemble {
    CorrelationGrid grid;
    Eigen::VectorXd n_bar;
    Eigen::MatrixXcd g1;
    int n_contributing = 0;
    double cauchy_schwarz_excess = 0.0; // max_{j<k} |g1|^2 - n_j n_k
    bool sampled = false;               // mean over conditional trajectories
};

// A single Lindblad evolution satisfies Cauchy-Schwarz exactly. A delay-shifted
// mean of conditional states need not: the regression propagates each
// conditional state without the later record, while n_bar at later times is
// conditioned on it and on the record-dependent shift. For such ensembles the
// excess is reported instead of enforced.
enum class CauchySchwarzCheck { Enforce, Report };

// n(t_j) = Tr[a^dag a rho(t_j)] = rho_22.
Eigen::VectorXd population_series(std::span<const Matrix4cd> snapshots);

// Quantum regression: G1(t_j, t_k) = Tr[a unvec(P_{k-j} vec(rho(t_j) a^dag))].
// Snapshots past the end of `snapshots` are treated as zero; the output has
// cache.size() rows and columns.
Eigen::MatrixXcd regression_g1(std::span<const Matrix4cd> snapshots,
                               const PropagatorCache<double>& cache);

// Index-ordered, delay-shifted sum of conditional snapshots. Because the
// regression map is linear in rho, regressing the shifted mean state gives the
// mean of the shifted per-trajectory kernels.
class EnsembleAccumulator {
public:
    explicit EnsembleAccumulator(const CorrelationGrid& grid);

    // Adds one trajectory shifted by `shift` grid slots. Throws
    // DelayOutOfRange if the shifted snapshots overrun the grid and
    // InvariantViolation if a snapshot carries field coherence <a> != 0.
    void add(std::span<const Matrix4cd> snapshots, int shift);
    void merge(const EnsembleAccumulator& other);

    int count() const { return count_; }
    const CorrelationGrid& grid() const { return grid_; }
    Snapshots mean_snapshots() const;

private:
    CorrelationGrid grid_;
    Snapshots sum_;
    int count_ = 0;
};

// Number of grid slots for a delay (nearest slot). Throws DelayOutOfRange for
// delays outside [0, delta_max].
int delay_slots(double delay, const CorrelationGrid& grid, double delta_max);

CorrelationEnsemble finalize(const EnsembleAccumulator& acc, const PropagatorCache<double>& cache,
                             CauchySchwarzCheck cs = CauchySchwarzCheck::Report);

CorrelationEnsemble assemble_ensemble(std::span<const TrajectoryOutcome> outcomes,
                                      std::span<const double> delays, const CorrelationGrid& grid,
                                      const PropagatorCache<double>& cache, double delta_max);

// How a monitored trajectory's populations and correlations are formed before
// the delay shift. Filtered regresses each conditional snapshot (record up to
// t_j only). Smoothed conditions both on the whole record: a backward effect
// matrix E(t) carries the record after t, and
//   n(t_j) = E_jj(G,0) rho_22(t_j) / Tr[E(t_j) rho(t_j)],
//   G1(t_j,t_k) = Tr[E(t_k) a M_{k<-j}(rho(t_j) a^dag)] / Tr[E(t_k) rho(t_k)],
// with M the record-driven linear step map. The delay is a function of the
// whole record, so only the smoothed kernel is the correlation of the delayed
// photon; the filtered one breaks Cauchy-Schwarz after shifting.
enum class Conditioning { Smoothed, Filtered };

const char* to_string(Conditioning c);
Conditioning parse_conditioning(const std::string& label);

// Per-trajectory n and upper triangle of G1 on the trajectory's own grid.
struct TrajectoryKernel {
    Eigen::VectorXd n;
    Eigen::MatrixXcd g1;
};

// Smoothed kernel of a trajectory simulated with keep_factors and
// keep_snapshots by `sme`. Throws InvalidParams when either is missing.
TrajectoryKernel smoothed_kernel(const TrajectoryOutcome& outcome, const SmeIntegrator<double>& sme,
                                 int corr_stride);

// Index-ordered, delay-shifted sum of per-trajectory kernels.
class KernelAccumulator {
public:
    explicit KernelAccumulator(const CorrelationGrid& grid);

    // Throws DelayOutOfRange if the shifted kernel overruns the grid.
    void add(const TrajectoryKernel& kernel, int shift);
    void merge(const KernelAccumulator& other);

    int count() const { return count_; }
    const CorrelationGrid& grid() const { return grid_; }

    // Mean kernel; all ensemble invariants are enforced.
    CorrelationEnsemble finalize() const;

private:
    CorrelationGrid grid_;
    Eigen::VectorXd n_sum_;
    Eigen::MatrixXcd g1_sum_;
    int count_ = 0;
};

// The single deterministic evolution of the case's generator from |X2,0>,
// zero delay.
CorrelationEnsemble deterministic_correlations(const Params& params, CaseId c,
                                               BasisState initial = BasisState::X2_0);

// Throws InvariantViolation unless n_bar in [0, 1+1e-8], g1 diagonal == n_bar
// to 1e-10, and (when enforced) |g1(j,k)|^2 <= n_j n_k + 1e-10.
void check_ensemble(const CorrelationEnsemble& ens,
                    CauchySchwarzCheck cs = CauchySchwarzCheck::Enforce);

double cauchy_schwarz_excess(const CorrelationEnsemble& ens);

// Debug dump: t_j, t_k, Re G1, Im G1 over the stored triangle.
void write_ensemble_csv(const CorrelationEnsemble& ens, const std::string& path);

} // namespace sps
