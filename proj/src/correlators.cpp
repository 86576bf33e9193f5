#include "sps/correlators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sps/format.hpp"

namespace sps {

namespace {

constexpr double kFieldCoherenceTol = 1e-10;

// Tr[a X] reads element (G,1),(G,0) of X; vec(rho a^dag) is rho's (G,1) column
// placed in the (G,0) column. Only these entries of each propagator are needed.
constexpr int kTraceRow = vec_index(index(BasisState::G_1), index(BasisState::G_0));

int vec_column(int row) { return vec_index(row, index(BasisState::G_0)); }

} // namespace

CorrelationGrid make_grid(const Params& params, double delta_max)
{
    CorrelationGrid grid;
    grid.spacing = params.corr_spacing();
    const int extra = static_cast<int>(std::ceil(delta_max / grid.spacing - 1e-9));
    grid.size = params.corr_points() + std::max(0, extra);
    return grid;
}

Eigen::VectorXd population_series(std::span<const Matrix4cd> snapshots)
{
    Eigen::VectorXd n(static_cast<Eigen::Index>(snapshots.size()));
    for (std::size_t j = 0; j < snapshots.size(); ++j) {
        n[static_cast<Eigen::Index>(j)] = snapshots[j](index(BasisState::G_1), index(BasisState::G_1)).real();
    }
    return n;
}

Eigen::MatrixXcd regression_g1(std::span<const Matrix4cd> snapshots,
                               const PropagatorCache<double>& cache)
{
    const int size = cache.size();
    // rows(lag, i) = P_lag(kTraceRow, vec_column(i))
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, kDim> rows(size, kDim);
    for (int lag = 0; lag < size; ++lag) {
        for (int i = 0; i < kDim; ++i) {
            rows(lag, i) = cache[lag](kTraceRow, vec_column(i));
        }
    }

    Eigen::MatrixXcd g1 = Eigen::MatrixXcd::Zero(size, size);
    const int filled = std::min<int>(size, static_cast<int>(snapshots.size()));
    const int photon = index(BasisState::G_1);
    for (int j = 0; j < filled; ++j) {
        const Eigen::Matrix<std::complex<double>, kDim, 1> column = snapshots[static_cast<std::size_t>(j)].col(photon);
        g1.row(j).tail(size - j) = (rows.topRows(size - j) * column).transpose();
    }
    return g1;
}

EnsembleAccumulator::EnsembleAccumulator(const CorrelationGrid& grid)
    : grid_(grid), sum_(static_cast<std::size_t>(grid.size), Matrix4cd::Zero())
{
}

void EnsembleAccumulator::add(std::span<const Matrix4cd> snapshots, int shift)
{
    if (shift < 0 || shift + static_cast<int>(snapshots.size()) > grid_.size) {
        throw DelayOutOfRange("shift of " + std::to_string(shift) + " slots overruns a grid of " +
                              std::to_string(grid_.size) + " points");
    }
    for (std::size_t j = 0; j < snapshots.size(); ++j) {
        const Matrix4cd& rho = snapshots[j];
        if (std::abs(rho(index(BasisState::G_1), index(BasisState::G_0))) > kFieldCoherenceTol) {
            throw InvariantViolation("snapshot carries field coherence <a> != 0");
        }
        sum_[static_cast<std::size_t>(shift) + j] += rho;
    }
    ++count_;
}

void EnsembleAccumulator::merge(const EnsembleAccumulator& other)
{
    if (other.grid_.size != grid_.size) {
        throw InvariantViolation("cannot merge accumulators on different grids");
    }
    for (std::size_t j = 0; j < sum_.size(); ++j) {
        sum_[j] += other.sum_[j];
    }
    count_ += other.count_;
}

Snapshots EnsembleAccumulator::mean_snapshots() const
{
    Snapshots mean(sum_.size(), Matrix4cd::Zero());
    if (count_ == 0) {
        return mean;
    }
    const double scale = 1.0 / count_;
    for (std::size_t j = 0; j < sum_.size(); ++j) {
        mean[j] = sum_[j] * scale;
    }
    return mean;
}

int delay_slots(double delay, const CorrelationGrid& grid, double delta_max)
{
    constexpr double slack = 1e-9;
    if (!(delay >= -slack) || delay > delta_max + slack) {
        throw DelayOutOfRange("delay " + format_double(delay) + " outside [0, " +
                              format_double(delta_max) + "]");
    }
    return static_cast<int>(std::lround(std::max(0.0, delay) / grid.spacing));
}

CorrelationEnsemble finalize(const EnsembleAccumulator& acc, const PropagatorCache<double>& cache,
                             CauchySchwarzCheck cs)
{
    if (cache.size() != acc.grid().size) {
        throw InvariantViolation("propagator cache does not match the correlation grid");
    }
    const Snapshots mean = acc.mean_snapshots();
    CorrelationEnsemble ens;
    ens.grid = acc.grid();
    ens.n_bar = population_series(mean);
    ens.g1 = regression_g1(mean, cache);
    ens.n_contributing = acc.count();
    ens.cauchy_schwarz_excess = cauchy_schwarz_excess(ens);
    ens.sampled = cs == CauchySchwarzCheck::Report;
    check_ensemble(ens, cs);
    return ens;
}

CorrelationEnsemble assemble_ensemble(std::span<const TrajectoryOutcome> outcomes,
                                      std::span<const double> delays, const CorrelationGrid& grid,
                                      const PropagatorCache<double>& cache, double delta_max)
{
    if (outcomes.size() != delays.size()) {
        throw DelayOutOfRange("need exactly one delay per trajectory");
    }
    EnsembleAccumulator acc(grid);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        acc.add(outcomes[i].rho_snapshots, delay_slots(delays[i], grid, delta_max));
    }
    return finalize(acc, cache);
}

CorrelationEnsemble deterministic_correlations(const Params& params, CaseId c, BasisState initial)
{
    if (c == CaseId::DephasingFeedForward) {
        throw InvalidParams({"deterministic correlations exist only for cases i and ii"});
    }
    const Params p = case_params(params, c);
    const auto gen = Generator::from_params(p);
    const auto series = evolve_deterministic(initial_state<double>(initial), gen, p);
    const CorrelationGrid grid = make_grid(p);
    const PropagatorCache<double> cache(gen, grid.spacing, grid.size);
    EnsembleAccumulator acc(grid);
    acc.add(series.snapshots, 0);
    return finalize(acc, cache, CauchySchwarzCheck::Enforce);
}

double cauchy_schwarz_excess(const CorrelationEnsemble& ens)
{
    const int size = static_cast<int>(ens.n_bar.size());
    double excess = 0.0;
    for (int j = 0; j < size; ++j) {
        for (int k = j + 1; k < size; ++k) {
            excess = std::max(excess, std::norm(ens.g1(j, k)) - ens.n_bar[j] * ens.n_bar[k]);
        }
    }
    return excess;
}

void check_ensemble(const CorrelationEnsemble& ens, CauchySchwarzCheck cs)
{
    const int size = static_cast<int>(ens.n_bar.size());
    for (int j = 0; j < size; ++j) {
        const double nj = ens.n_bar[j];
        if (!(nj >= -1e-12 && nj <= 1.0 + 1e-8)) {
            throw InvariantViolation("mean photon number out of range at slot " + std::to_string(j));
        }
        if (std::abs(ens.g1(j, j) - nj) > 1e-10) {
            throw InvariantViolation("G1 diagonal differs from n at slot " + std::to_string(j));
        }
        if (cs == CauchySchwarzCheck::Report) {
            continue;
        }
        for (int k = j + 1; k < size; ++k) {
            if (std::norm(ens.g1(j, k)) > nj * ens.n_bar[k] + 1e-10) {
                throw InvariantViolation("Cauchy-Schwarz violated at slots " + std::to_string(j) +
                                         "," + std::to_string(k));
            }
        }
    }
}

const char* to_string(Conditioning c)
{
    return c == Conditioning::Smoothed ? "smoothed" : "filtered";
}

Conditioning parse_conditioning(const std::string& label)
{
    for (const auto c : {Conditioning::Smoothed, Conditioning::Filtered}) {
        if (label == to_string(c)) {
            return c;
        }
    }
    throw InvalidParams({"conditioning: unknown mode '" + label + "'"});
}

TrajectoryKernel smoothed_kernel(const TrajectoryOutcome& outcome, const SmeIntegrator<double>& sme,
                                 int corr_stride)
{
    const auto& factors = outcome.factors;
    const auto& snapshots = outcome.rho_snapshots;
    const auto steps = static_cast<long>(factors.size());
    if (steps == 0 || corr_stride < 1 ||
        static_cast<long>(snapshots.size()) != steps / corr_stride + 1) {
        throw InvalidParams({"smoothed kernel needs per-step factors and correlation-grid snapshots"});
    }
    const int points = static_cast<int>(snapshots.size());
    const SuperMatrixd& drift = sme.drift_matrix();
    const auto weights_of = [](const StepFactors<double>& f) {
        return (f.weights * f.weights.transpose()).cast<std::complex<double>>().eval();
    };

    // Backward pass for the effect matrix, trace-normalized at every step
    // (only ratios at equal times enter).
    Snapshots effect(static_cast<std::size_t>(points));
    const SuperMatrixd adjoint = drift.adjoint();
    Matrix4cd e = Matrix4cd::Identity();
    effect.back() = e;
    for (long k = steps - 1; k >= 0; --k) {
        const SuperVectord v = adjoint * vec(e.cwiseProduct(weights_of(factors[static_cast<std::size_t>(k)])));
        e = hermitian_part(unvec(v));
        e /= e.trace().real();
        if (k % corr_stride == 0) {
            effect[static_cast<std::size_t>(k / corr_stride)] = e;
        }
    }

    // rho a^dag lives in the (G,0) column; there the drift acts as a 4x4 map
    // whose (X1,0),(G,1) block is all that feeds the photon amplitude.
    const int x1 = index(BasisState::X1_0);
    const int photon = index(BasisState::G_1);
    const int ground = index(BasisState::G_0);
    Eigen::Matrix2cd block;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            block(r, c) = drift(vec_index(x1 + r, ground), vec_index(x1 + c, ground));
        }
    }
    std::vector<Eigen::Matrix2cd, Eigen::aligned_allocator<Eigen::Matrix2cd>> slot_map(
        static_cast<std::size_t>(points), Eigen::Matrix2cd::Identity());
    for (int slot = 1; slot < points; ++slot) {
        Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
        for (long k = static_cast<long>(slot - 1) * corr_stride; k < static_cast<long>(slot) * corr_stride; ++k) {
            const auto& f = factors[static_cast<std::size_t>(k)];
            const Eigen::Vector2d d = f.weights.segment<2>(x1) * (f.weights(ground) / f.norm);
            m = (d.asDiagonal() * block * m).eval();
        }
        slot_map[static_cast<std::size_t>(slot)] = m;
    }

    TrajectoryKernel out;
    out.n.resize(points);
    out.g1 = Eigen::MatrixXcd::Zero(points, points);
    Eigen::VectorXd scale(points);
    for (int j = 0; j < points; ++j) {
        const auto& rho = snapshots[static_cast<std::size_t>(j)];
        const auto& ej = effect[static_cast<std::size_t>(j)];
        const double z = (ej * rho).trace().real();
        if (!(z > 0.0)) {
            throw NumericalBlowup("record likelihood vanished at slot " + std::to_string(j));
        }
        scale[j] = ej(ground, ground).real() / z;
        out.n[j] = scale[j] * rho(photon, photon).real();
    }
    for (int j = 0; j < points; ++j) {
        const auto& rho = snapshots[static_cast<std::size_t>(j)];
        Eigen::Vector2cd v(rho(x1, photon), rho(photon, photon));
        out.g1(j, j) = out.n[j];
        for (int k = j + 1; k < points; ++k) {
            v = slot_map[static_cast<std::size_t>(k)] * v;
            out.g1(j, k) = scale[k] * v(1);
        }
    }
    return out;
}

KernelAccumulator::KernelAccumulator(const CorrelationGrid& grid)
    : grid_(grid), n_sum_(Eigen::VectorXd::Zero(grid.size)),
      g1_sum_(Eigen::MatrixXcd::Zero(grid.size, grid.size))
{
}

void KernelAccumulator::add(const TrajectoryKernel& kernel, int shift)
{
    const auto points = static_cast<int>(kernel.n.size());
    if (shift < 0 || shift + points > grid_.size) {
        throw DelayOutOfRange("shift of " + std::to_string(shift) + " slots overruns a grid of " +
                              std::to_string(grid_.size) + " points");
    }
    n_sum_.segment(shift, points) += kernel.n;
    g1_sum_.block(shift, shift, points, points).triangularView<Eigen::Upper>() += kernel.g1;
    ++count_;
}

void KernelAccumulator::merge(const KernelAccumulator& other)
{
    if (other.grid_.size != grid_.size) {
        throw InvariantViolation("cannot merge accumulators on different grids");
    }
    n_sum_ += other.n_sum_;
    g1_sum_ += other.g1_sum_;
    count_ += other.count_;
}

CorrelationEnsemble KernelAccumulator::finalize() const
{
    if (count_ == 0) {
        throw EmptyBatch();
    }
    CorrelationEnsemble ens;
    ens.grid = grid_;
    ens.n_bar = n_sum_ / count_;
    ens.g1 = g1_sum_ / count_;
    ens.n_contributing = count_;
    ens.cauchy_schwarz_excess = cauchy_schwarz_excess(ens);
    check_ensemble(ens, CauchySchwarzCheck::Enforce);
    return ens;
}

void write_ensemble_csv(const CorrelationEnsemble& ens, const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    out << "t_j,t_k,re_g1,im_g1\n";
    const int size = ens.grid.size;
    for (int j = 0; j < size; ++j) {
        for (int k = j; k < size; ++k) {
            out << format_double(ens.grid.time(j)) << ',' << format_double(ens.grid.time(k)) << ','
                << format_double(ens.g1(j, k).real()) << ',' << format_double(ens.g1(j, k).imag())
                << '\n';
        }
    }
    if (!out) {
        throw IoError("write failed for " + path);
    }
}

} // namespace sps
