#pragma once

#include <span>
#include <vector>

#include "sadiv/model.hpp"

namespace sadiv {

/// Local jet of a field at one node plus the value of the claim integral.
struct DerivBundle {
    double v = 0.0;
    double v_x = 0.0;
    double v_w = 0.0;
    double v_xx = 0.0;
    double v_ww = 0.0;
    double i_delta = 0.0;  ///< claim integral I[v] at the node
};

/// Investment fraction gamma in [0,1] and dividend rate a in [0, M].
struct ControlPair {
    double gamma = 0.0;
    double a = 0.0;
};

/// Guards for the closed-form maximizer. None of them has a modelling
/// meaning; they keep the gamma ratio and the V_x = 1 test well defined.
struct MaximizerTolerances {
    double x_tol = 1e-6;     ///< surplus at or below this invests fully
    double curv_tol = 1e-6;  ///< v_xx above -curv_tol is treated as non-concave
    double tie_tol = 1e-6;   ///< |v_x - 1| <= tie_tol pays the premium rate
};

struct MaximizedHamiltonian {
    ControlPair ctrl;
    double value = 0.0;
};

/// (sigma^2/2) g^2 x^2 v_xx + [p + (r + (mu-r) g) x - a] v_x + v_w
///   + lambda i_delta + a - c v
double hamiltonian(const State& theta, const DerivBundle& d, ControlPair ctrl,
                   const ModelParams& params, double lambda);

/// Hamiltonian plus the vanishing-viscosity term (eps/2)(v_xx + v_ww).
double hamiltonian_n(const State& theta, const DerivBundle& d, ControlPair ctrl,
                     const ModelParams& params, double lambda, double eps_n);

/// Pointwise sup over [0,1] x [0,M]. Dividends are bang-bang in {0, p, M}
/// because the Hamiltonian is affine in a with slope 1 - v_x.
/// Throws NumericError on non-finite input.
MaximizedHamiltonian maximize_hamiltonian(const State& theta, const DerivBundle& d,
                                          const ModelParams& params, double lambda,
                                          double eps_n, const MaximizerTolerances& tol = {});

/// The investment part of the argmax on its own (same rules as above).
double optimal_gamma(double x, double v_x, double v_xx, const ModelParams& params,
                     const MaximizerTolerances& tol = {});

/// Dividend part of the argmax: M below v_x = 1, p on the tie band, 0 above.
double optimal_dividend(double v_x, const ModelParams& params, const MaximizerTolerances& tol = {});

/// Nonnegative weights W with int_0^{x+delta} v(x - u) dG(u) = sum_m W[m] slice[m]
/// for the piecewise-linear interpolant of `slice` on `y_nodes`. The nodes
/// must be increasing with y_nodes[0] the lowest admissible surplus (-delta).
/// Each cell uses exact increments of G and of int G, so tabulated laws need
/// no density.
std::vector<double> claim_weights(std::span<const double> y_nodes, double x, const ClaimLaw& claims);

/// I[v](s,x,w) = int_0^{x+delta} v(s, x-u, -delta) dG(u) - v(s,x,w), with the
/// post-claim slice given on `y_nodes` (y_nodes[0] == -delta). Returns
/// -v_here when x + delta <= 0.
double nonlocal_integral(std::span<const double> y_nodes, std::span<const double> slice,
                         double v_here, double x, const ClaimLaw& claims);

}  // namespace sadiv
