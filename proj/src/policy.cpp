#include "sadiv/policy.hpp"

#include <algorithm>
#include <cmath>

#include "sadiv/errors.hpp"

namespace sadiv {

namespace {

std::pair<int, double> uniform_cell(double v, double lo, double h, int n) {
    double t = std::clamp((v - lo) / h, 0.0, static_cast<double>(n - 1));
    const int m = std::min(static_cast<int>(std::floor(t)), n - 2);
    return {m, t - m};
}

}  // namespace

PolicyField extract_policy(const ValueField& field, const ModelParams& params,
                           const WaitingLaw& waiting, const ClaimLaw& claims,
                           const ExtractOptions& options) {
    const Grid& g = field.grid();
    const ClaimQuadrature quad(g, claims);
    PolicyField pf{g, std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0),
                   field.hash(), 0, params};
    for (int k = 0; k < g.n_s(); ++k)
        for (int i = 0; i < g.n_x(); ++i) {
            if (g.x(i) < 0.0) continue;
            for (int j = 0; j < g.n_w(); ++j) {
                const DerivBundle d = extract_derivatives(field, quad, k, i, j);
                const State theta{g.s(k), g.x(i), g.w(j)};
                try {
                    const auto m = maximize_hamiltonian(theta, d, params,
                                                        waiting.intensity_extended(theta.w),
                                                        g.eps_n(), options.tol);
                    pf.gamma[g.index(k, i, j)] = m.ctrl.gamma;
                    pf.a[g.index(k, i, j)] = m.ctrl.a;
                } catch (const NumericError&) {
                    ++pf.flagged;
                }
            }
        }
    return pf;
}

PolicyField mollify_policy(const PolicyField& pf, int radius) {
    if (radius < 0) throw ConfigError("mollify_policy: radius must be nonnegative");
    if (radius == 0) return pf;
    const Grid& g = pf.grid;
    const int n[3] = {g.n_s(), g.n_x(), g.n_w()};
    std::vector<double> src = pf.gamma;
    std::vector<double> dst(src.size());
    // Separable tent kernel, one axis at a time.
    for (int axis = 0; axis < 3; ++axis) {
        for (int k = 0; k < n[0]; ++k)
            for (int i = 0; i < n[1]; ++i)
                for (int j = 0; j < n[2]; ++j) {
                    int idx[3] = {k, i, j};
                    const int c = idx[axis];
                    double acc = 0.0;
                    double wsum = 0.0;
                    for (int o = -radius; o <= radius; ++o) {
                        const int q = c + o;
                        if (q < 0 || q >= n[axis]) continue;
                        const double wt = radius + 1 - std::abs(o);
                        idx[axis] = q;
                        acc += wt * src[g.index(idx[0], idx[1], idx[2])];
                        wsum += wt;
                    }
                    dst[g.index(k, i, j)] = acc / wsum;
                }
        src.swap(dst);
    }
    PolicyField out = pf;
    for (std::size_t q = 0; q < src.size(); ++q) out.gamma[q] = std::clamp(src[q], 0.0, 1.0);
    return out;
}

double gamma_lipschitz(const PolicyField& pf) {
    const Grid& g = pf.grid;
    double lip = 0.0;
    for (int k = 0; k < g.n_s(); ++k)
        for (int i = 0; i < g.n_x(); ++i)
            for (int j = 0; j < g.n_w(); ++j) {
                const double v = pf.gamma[g.index(k, i, j)];
                if (k + 1 < g.n_s())
                    lip = std::max(lip, std::abs(pf.gamma[g.index(k + 1, i, j)] - v) / (g.s(k + 1) - g.s(k)));
                if (i + 1 < g.n_x())
                    lip = std::max(lip, std::abs(pf.gamma[g.index(k, i + 1, j)] - v) / (g.x(i + 1) - g.x(i)));
                if (j + 1 < g.n_w())
                    lip = std::max(lip, std::abs(pf.gamma[g.index(k, i, j + 1)] - v) / g.dw());
            }
    return lip;
}

FeedbackPolicy::FeedbackPolicy(std::shared_ptr<const PolicyField> field) : pf_(std::move(field)) {
    if (!pf_) throw ConfigError("FeedbackPolicy: null policy field");
}

ControlPair FeedbackPolicy::operator()(const State& theta) const {
    const Grid& g = pf_->grid;
    auto [k, fs] = uniform_cell(theta.s, 0.0, g.ds(), g.n_s());
    const int i = g.x_cell(theta.x);
    const double fx = std::clamp((theta.x - g.x(i)) / (g.x(i + 1) - g.x(i)), 0.0, 1.0);
    auto [j, fw] = uniform_cell(theta.w, -g.delta(), g.dw(), g.n_w());

    double gam = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                const double wt = (a ? fs : 1.0 - fs) * (b ? fx : 1.0 - fx) * (c ? fw : 1.0 - fw);
                if (wt != 0.0) gam += wt * pf_->gamma[g.index(k + a, i + b, j + c)];
            }
    const int kn = fs < 0.5 ? k : k + 1;
    const int in = fx < 0.5 ? i : i + 1;
    const int jn = fw < 0.5 ? j : j + 1;
    return {std::clamp(gam, 0.0, 1.0), pf_->a[g.index(kn, in, jn)]};
}

ClosedLoop closed_loop_coefficients(const ControlLaw& policy, const State& theta,
                                    const ModelParams& params) {
    const ControlPair u = policy(theta);
    ClosedLoop out;
    out.drift = params.p + (params.r + (params.mu - params.r) * u.gamma) * theta.x - u.a;
    out.vol = params.sigma * u.gamma * theta.x;
    out.dividend = u.a;
    return out;
}

}  // namespace sadiv
