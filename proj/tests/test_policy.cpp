#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "sadiv/errors.hpp"
#include "sadiv/policy.hpp"

using namespace sadiv;
using doctest::Approx;

namespace {

const ModelParams kRef{};
const auto kPoisson = WaitingLaw::exponential(1.0);
const auto kClaims = ClaimLaw::exponential(1.0);

// Field v = slope * x + 1 on a small lattice.
ValueField linear_field(double slope) {
    Grid g(kRef.T, 0.05, 0.05, 4.0, 6, 12, 5);
    std::vector<double> v(g.size());
    for (int k = 0; k < g.n_s(); ++k)
        for (int i = 0; i < g.n_x(); ++i)
            for (int j = 0; j < g.n_w(); ++j) v[g.index(k, i, j)] = slope * g.x(i) + 1.0;
    return ValueField(g, std::move(v));
}

}  // namespace

TEST_CASE("extraction on synthetic fields") {
    const auto pf = extract_policy(linear_field(0.5), kRef, kPoisson, kClaims);
    const Grid& g = pf.grid;
    for (int k = 0; k < g.n_s(); ++k)
        for (int j = 0; j < g.n_w(); ++j) {
            CHECK(pf.a[g.index(k, 0, j)] == 0.0);
            CHECK(pf.gamma[g.index(k, 0, j)] == 0.0);
            for (int i = 1; i < g.n_x(); ++i) {
                // v_x = 0.5 pays at the maximal rate; convex in gamma with
                // (mu - r) v_x > 0 invests fully.
                CHECK(pf.a[g.index(k, i, j)] == kRef.M);
                CHECK(pf.gamma[g.index(k, i, j)] == 1.0);
            }
        }
    CHECK(pf.flagged == 0);

    const auto steep = extract_policy(linear_field(2.0), kRef, kPoisson, kClaims);
    CHECK(steep.a[steep.grid.index(2, 5, 1)] == 0.0);
    // x = 0 is at or below x_tol.
    CHECK(steep.gamma[steep.grid.index(2, 1, 1)] == 1.0);
}

TEST_CASE("extraction agrees with the solver's maximizer") {
    const Grid g(kRef.T, 0.05, 0.05, 6.0, 12, 24, 10);
    const ValueField f = solve_backward(g, Psi(PsiSpec{}, kRef.T, 0.05), kRef, kPoisson, kClaims);
    const auto pf = extract_policy(f, kRef, kPoisson, kClaims);
    CHECK(pf.provenance == f.hash());
    const ClaimQuadrature quad(g, kClaims);
    RngStream rng(5);
    for (int n = 0; n < 200; ++n) {
        const int k = static_cast<int>(rng.uniform() * g.n_s());
        const int i = 1 + static_cast<int>(rng.uniform() * (g.n_x() - 1));
        const int j = static_cast<int>(rng.uniform() * g.n_w());
        const DerivBundle d = extract_derivatives(f, quad, k, i, j);
        const State th{g.s(k), g.x(i), g.w(j)};
        const auto best = maximize_hamiltonian(th, d, kRef, kPoisson.intensity_extended(th.w), g.eps_n());
        CHECK(pf.gamma[g.index(k, i, j)] == best.ctrl.gamma);
        CHECK(pf.a[g.index(k, i, j)] == best.ctrl.a);
        for (int q = 0; q < 20; ++q) {
            const ControlPair u{rng.uniform(), kRef.M * rng.uniform()};
            CHECK(best.value >= hamiltonian_n(th, d, u, kRef, kPoisson.intensity_extended(th.w), g.eps_n()) - 1e-9);
        }
    }
}

TEST_CASE("mollification") {
    auto pf = extract_policy(linear_field(0.5), kRef, kPoisson, kClaims);
    const Grid& g = pf.grid;
    const int mid = 6;
    for (int k = 0; k < g.n_s(); ++k)
        for (int i = 0; i < g.n_x(); ++i)
            for (int j = 0; j < g.n_w(); ++j) pf.gamma[g.index(k, i, j)] = i >= mid ? 1.0 : 0.0;

    const auto same = mollify_policy(pf, 0);
    CHECK(same.gamma == pf.gamma);
    CHECK(same.a == pf.a);

    auto max_jump = [&](const PolicyField& q) {
        double m = 0.0;
        for (int i = 2; i + 1 < g.n_x() - 1; ++i)
            m = std::max(m, std::abs(q.gamma[g.index(2, i + 1, 2)] - q.gamma[g.index(2, i, 2)]));
        return m;
    };
    const auto smooth = mollify_policy(pf, 1);
    CHECK(max_jump(pf) == 1.0);
    CHECK(max_jump(smooth) == Approx(0.5));
    // Weights 1:2:1 across the step.
    CHECK(smooth.gamma[g.index(2, mid - 1, 2)] == Approx(0.25));
    CHECK(smooth.gamma[g.index(2, mid, 2)] == Approx(0.75));
    CHECK(smooth.a == pf.a);
    CHECK(gamma_lipschitz(smooth) < gamma_lipschitz(pf));

    RngStream rng(8);
    for (double& x : pf.gamma) x = rng.uniform();
    for (double x : mollify_policy(pf, 2).gamma) CHECK((x >= 0.0 && x <= 1.0));
}

TEST_CASE("closed-loop coefficients") {
    const State th{0.2, 1.5, 0.1};
    auto cl = closed_loop_coefficients(ConstantPolicy({0.0, 0.0}), th, kRef);
    CHECK(cl.drift == Approx(kRef.p + kRef.r * th.x));
    CHECK(cl.vol == 0.0);
    cl = closed_loop_coefficients(ConstantPolicy({1.0, kRef.M}), th, kRef);
    CHECK(cl.drift == Approx(kRef.p + kRef.mu * th.x - kRef.M));
    CHECK(cl.vol == Approx(kRef.sigma * th.x));
    CHECK(cl.dividend == kRef.M);
    CHECK(closed_loop_coefficients(ConstantPolicy({0.6, kRef.p}), {0.2, 0.0, 0.1}, kRef).vol == 0.0);
}

TEST_CASE("feedback interpolation") {
    auto pf = std::make_shared<PolicyField>(extract_policy(linear_field(0.5), kRef, kPoisson, kClaims));
    const Grid g = pf->grid;
    for (int k = 0; k < g.n_s(); ++k)
        for (int i = 0; i < g.n_x(); ++i)
            for (int j = 0; j < g.n_w(); ++j) pf->gamma[g.index(k, i, j)] = i % 2 ? 1.0 : 0.0;
    const FeedbackPolicy fb(pf);
    const double xm = 0.5 * (g.x(3) + g.x(4));
    const auto u = fb({g.s(2), xm, g.w(1)});
    CHECK(u.gamma == Approx(0.5));
    CHECK(u.a == kRef.M);
    const auto far = fb({0.3, 1e6, 0.1});
    CHECK((far.gamma >= 0.0 && far.gamma <= 1.0));
}
