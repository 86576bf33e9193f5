#pragma once

#include <optional>

#include "sps/correlators.hpp"

namespace sps {

struct HomResult {
    double p_c = 0.0;
    double lambda = 0.0; // 1 - p_c
    double p_emit = 0.0;
    double numerator = 0.0;
    double denominator = 0.0;
    std::optional<double> mc_stderr;
};

// Coincidence probability of two independent identical sources behind a 50:50
// beam splitter,
//
//   p_c = int_0^T dt int_0^{T-t} dtau 1/2 [n(t) n(t+tau) - |G1(t,t+tau)|^2]
//         / int_0^T dt int_0^{T-t} dtau n(t) n(t+tau),
//
// over the full grid span T. Both integrals use trapezoid weights on the
// triangle, except that the tau = 0 line carries zero weight: it is a null set
// of the continuum integral and its numerator integrand vanishes identically.
HomResult coincidence_probability(const CorrelationEnsemble& ens, double kappa = 1.0);

// The same functional from the full four-term beam-splitter expansion with two
// possibly different sources:
//   G2_34 = 1/4 [n1(t) n2(t') + n2(t) n1(t') - 2 Re(G1_1(t,t') conj(G1_2(t,t')))],
//   <a3^dag a3>(t) <a4^dag a4>(t') = 1/4 (n1 + n2)(t) (n1 + n2)(t').
// p_emit is reported for the first source.
HomResult coincidence_probability_expanded(const CorrelationEnsemble& first,
                                           const CorrelationEnsemble& second, double kappa = 1.0);

// kappa * int n_bar dt (trapezoid).
double emission_probability(const CorrelationEnsemble& ens, double kappa);

} // namespace sps
