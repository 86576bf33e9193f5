#include "sps/hom.hpp"

#include <cmath>

namespace sps {

namespace {

// Trapezoid weight of node k on a grid of `size` points.
double edge_weight(int k, int size)
{
    return (k == 0 || k == size - 1) ? 0.5 : 1.0;
}

// Inner weight of node k >= j for the integral over tau in [0, T - t_j]; the
// tau = 0 node (k == j) is excluded.
double inner_weight(int j, int k, int size)
{
    if (k == j) {
        return 0.0;
    }
    return k == size - 1 ? 0.5 : 1.0;
}

template <typename Integrand>
std::pair<double, double> triangle_integrals(int size, double h, Integrand&& f)
{
    double numerator = 0.0;
    double denominator = 0.0;
    for (int j = 0; j < size; ++j) {
        double row_num = 0.0;
        double row_den = 0.0;
        for (int k = j + 1; k < size; ++k) {
            const auto [num, den] = f(j, k);
            const double w = inner_weight(j, k, size);
            row_num += w * num;
            row_den += w * den;
        }
        const double w = edge_weight(j, size);
        numerator += w * row_num;
        denominator += w * row_den;
    }
    return {numerator * h * h, denominator * h * h};
}

HomResult make_result(double numerator, double denominator, double p_emit, bool sampled)
{
    if (!(denominator >= 1e-12)) {
        throw DegenerateDenominator();
    }
    HomResult r;
    r.numerator = numerator;
    r.denominator = denominator;
    r.p_c = numerator / denominator;
    r.lambda = 1.0 - r.p_c;
    r.p_emit = p_emit;
    if (!(r.p_c >= -1e-12 && r.p_c <= 0.5 + 1e-6)) {
        throw InvariantViolation("coincidence probability outside [0, 1/2]");
    }
    // A conditional trajectory can carry kappa int n dt > 1, so for a sampled
    // ensemble p_emit <= 1 holds only in expectation.
    if (!(r.p_emit >= -1e-12 && (sampled || r.p_emit <= 1.0 + 1e-6))) {
        throw InvariantViolation("emission probability outside [0, 1]");
    }
    return r;
}

} // namespace

double emission_probability(const CorrelationEnsemble& ens, double kappa)
{
    return kappa * trapezoid(ens.n_bar, ens.grid.spacing);
}

HomResult coincidence_probability(const CorrelationEnsemble& ens, double kappa)
{
    const Eigen::VectorXd& n = ens.n_bar;
    const auto [num, den] = triangle_integrals(ens.grid.size, ens.grid.spacing, [&](int j, int k) {
        const double nn = n[j] * n[k];
        return std::pair{0.5 * (nn - std::norm(ens.g1(j, k))), nn};
    });
    return make_result(num, den, emission_probability(ens, kappa), ens.sampled);
}

HomResult coincidence_probability_expanded(const CorrelationEnsemble& first,
                                           const CorrelationEnsemble& second, double kappa)
{
    if (first.grid.size != second.grid.size || first.grid.spacing != second.grid.spacing) {
        throw InvariantViolation("sources must share a correlation grid");
    }
    const Eigen::VectorXd& n1 = first.n_bar;
    const Eigen::VectorXd& n2 = second.n_bar;
    const auto [num, den] = triangle_integrals(first.grid.size, first.grid.spacing, [&](int j, int k) {
        const double cross = (first.g1(j, k) * std::conj(second.g1(j, k))).real();
        const double g2 = 0.25 * (n1[j] * n2[k] + n2[j] * n1[k] - 2.0 * cross);
        const double out3 = 0.5 * (n1[j] + n2[j]);
        const double out4 = 0.5 * (n1[k] + n2[k]);
        return std::pair{g2, out3 * out4};
    });
    return make_result(num, den, emission_probability(first, kappa),
                       first.sampled || second.sampled);
}

} // namespace sps
