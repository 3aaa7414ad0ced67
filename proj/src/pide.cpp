#include "sadiv/pide.hpp"

#include <algorithm>
#include <cmath>

#include "sadiv/errors.hpp"

namespace sadiv {

double hamiltonian(const State& theta, const DerivBundle& d, ControlPair ctrl,
                   const ModelParams& params, double lambda) {
    const double x = theta.x;
    const double g = ctrl.gamma;
    const double drift = params.p + (params.r + (params.mu - params.r) * g) * x - ctrl.a;
    return 0.5 * params.sigma * params.sigma * g * g * x * x * d.v_xx + drift * d.v_x + d.v_w +
           lambda * d.i_delta + (ctrl.a - params.c * d.v);
}

double hamiltonian_n(const State& theta, const DerivBundle& d, ControlPair ctrl,
                     const ModelParams& params, double lambda, double eps_n) {
    return hamiltonian(theta, d, ctrl, params, lambda) + 0.5 * eps_n * d.v_xx + 0.5 * eps_n * d.v_ww;
}

double optimal_gamma(double x, double v_x, double v_xx, const ModelParams& params,
                     const MaximizerTolerances& tol) {
    if (x <= tol.x_tol) return 1.0;
    const double excess = params.mu - params.r;
    const double s2 = params.sigma * params.sigma;
    if (v_xx < -tol.curv_tol)
        return std::clamp(-excess * v_x / (s2 * x * v_xx), 0.0, 1.0);
    // Convex (or flat) in gamma: the max sits at an endpoint.
    const double at_one = 0.5 * s2 * x * x * v_xx + excess * x * v_x;
    return at_one > 0.0 ? 1.0 : 0.0;
}

double optimal_dividend(double v_x, const ModelParams& params, const MaximizerTolerances& tol) {
    if (v_x < 1.0 - tol.tie_tol) return params.M;
    if (v_x <= 1.0 + tol.tie_tol) return params.p;
    return 0.0;
}

MaximizedHamiltonian maximize_hamiltonian(const State& theta, const DerivBundle& d,
                                          const ModelParams& params, double lambda,
                                          double eps_n, const MaximizerTolerances& tol) {
    if (!std::isfinite(d.v) || !std::isfinite(d.v_x) || !std::isfinite(d.v_w) ||
        !std::isfinite(d.v_xx) || !std::isfinite(d.v_ww) || !std::isfinite(d.i_delta))
        throw NumericError("maximize_hamiltonian: non-finite derivative bundle");
    MaximizedHamiltonian out;
    out.ctrl.gamma = optimal_gamma(theta.x, d.v_x, d.v_xx, params, tol);
    out.ctrl.a = optimal_dividend(d.v_x, params, tol);
    out.value = hamiltonian_n(theta, d, out.ctrl, params, lambda, eps_n);
    return out;
}

std::vector<double> claim_weights(std::span<const double> y_nodes, double x, const ClaimLaw& claims) {
    std::vector<double> weights(y_nodes.size(), 0.0);
    if (y_nodes.empty() || x < y_nodes.front()) return weights;

    // Linear reconstruction at an arbitrary surplus: returns (index, share of
    // the upper node) such that v(y) = (1-share) v[i] + share v[i+1].
    auto locate = [&](double y) -> std::pair<std::size_t, double> {
        if (y >= y_nodes.back()) return {y_nodes.size() - 1, 0.0};
        auto it = std::upper_bound(y_nodes.begin(), y_nodes.end(), y);
        const auto i = static_cast<std::size_t>(std::distance(y_nodes.begin(), it)) - 1;
        return {i, (y - y_nodes[i]) / (y_nodes[i + 1] - y_nodes[i])};
    };
    auto deposit = [&](double y, double mass) {
        if (mass == 0.0) return;
        auto [i, share] = locate(y);
        weights[i] += (1.0 - share) * mass;
        if (share > 0.0) weights[i + 1] += share * mass;
    };

    // Breakpoints in surplus: x itself and every node below it, down to y_0.
    std::vector<double> ys;
    ys.push_back(x);
    for (std::size_t m = y_nodes.size(); m-- > 0;)
        if (y_nodes[m] < x) ys.push_back(y_nodes[m]);

    // Atom of G at u = 0 lands on v(x).
    deposit(x, claims.cdf(0.0));

    for (std::size_t k = 0; k + 1 < ys.size(); ++k) {
        const double ya = ys[k];
        const double yb = ys[k + 1];
        const double ua = x - ya;
        const double ub = x - yb;
        const double h = ub - ua;
        const double ga = claims.cdf(ua);
        const double gb = claims.cdf(ub);
        // int_(ua,ub] (u - ua) dG = h G(ub) - int_ua^ub G du
        const double first_moment = h * gb - claims.cdf_integral(ua, ub);
        const double wb = std::clamp(first_moment / h, 0.0, gb - ga);
        const double wa = (gb - ga) - wb;
        deposit(ya, wa);
        deposit(yb, wb);
    }
    return weights;
}

double nonlocal_integral(std::span<const double> y_nodes, std::span<const double> slice,
                         double v_here, double x, const ClaimLaw& claims) {
    if (y_nodes.empty() || x <= y_nodes.front()) return -v_here;
    const auto w = claim_weights(y_nodes, x, claims);
    double acc = 0.0;
    for (std::size_t m = 0; m < w.size(); ++m) acc += w[m] * slice[m];
    return acc - v_here;
}

}  // namespace sadiv
