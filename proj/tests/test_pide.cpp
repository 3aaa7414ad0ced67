#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "sadiv/errors.hpp"
#include "sadiv/pide.hpp"
#include "sadiv/rng.hpp"

using namespace sadiv;
using doctest::Approx;

namespace {

// Term-by-term evaluation, grouped differently from the library.
double symbolic_h(const State& th, const DerivBundle& d, ControlPair u, const ModelParams& m, double lam) {
    const double diffusion = m.sigma * m.sigma * u.gamma * u.gamma * th.x * th.x * d.v_xx / 2.0;
    const double premium = m.p * d.v_x;
    const double safe = m.r * th.x * d.v_x;
    const double risky = (m.mu - m.r) * u.gamma * th.x * d.v_x;
    const double paid = u.a * (1.0 - d.v_x);
    return diffusion + premium + safe + risky + paid + d.v_w + lam * d.i_delta - m.c * d.v;
}

DerivBundle random_bundle(RngStream& rng) {
    DerivBundle d;
    d.v = 4.0 * rng.uniform();
    d.v_x = 3.0 * rng.uniform();
    d.v_w = 2.0 * rng.uniform() - 1.0;
    d.v_xx = 6.0 * rng.uniform() - 4.0;
    d.v_ww = 2.0 * rng.uniform() - 1.0;
    d.i_delta = -rng.uniform();
    return d;
}

}  // namespace

TEST_CASE("hamiltonian examples") {
    const ModelParams m;
    const State th{0.2, 1.3, 0.1};
    CHECK(hamiltonian(th, DerivBundle{}, {0.4, m.M}, m, 1.0) == Approx(m.M));
    DerivBundle d;
    d.v_x = 1.0;
    CHECK(hamiltonian(th, d, {0.0, 0.0}, m, 1.0) == Approx(m.p + m.r * th.x));

    RngStream rng(3);
    for (int n = 0; n < 100; ++n) {
        const State t{rng.uniform(), 5.0 * rng.uniform(), rng.uniform()};
        const DerivBundle b = random_bundle(rng);
        const ControlPair u{rng.uniform(), m.M * rng.uniform()};
        const double lam = 0.5 + rng.uniform();
        const double lhs = hamiltonian(t, b, u, m, lam);
        const double rhs = symbolic_h(t, b, u, m, lam);
        CHECK(std::abs(lhs - rhs) <= 1e-14 * std::max(1.0, std::abs(rhs)) * 10);
    }
}

TEST_CASE("perturbed hamiltonian") {
    const ModelParams m;
    const State th{0.5, 1.0, 0.2};
    RngStream rng(11);
    const DerivBundle b = random_bundle(rng);
    CHECK(hamiltonian_n(th, b, {0.3, 1.0}, m, 1.0, 0.0) == hamiltonian(th, b, {0.3, 1.0}, m, 1.0));

    DerivBundle d;
    d.v_xx = 2.0;
    d.v_ww = 2.0;
    CHECK(hamiltonian_n(th, d, {0.0, 0.0}, m, 1.0, 0.1) ==
          Approx(hamiltonian(th, d, {0.0, 0.0}, m, 1.0) + 0.2).epsilon(1e-14));

    for (int n = 0; n < 50; ++n) {
        const DerivBundle r = random_bundle(rng);
        const double eps = 0.2 * rng.uniform();
        const double expect = hamiltonian(th, r, {0.7, m.p}, m, 1.1) + eps / 2.0 * r.v_xx + eps / 2.0 * r.v_ww;
        CHECK(std::abs(hamiltonian_n(th, r, {0.7, m.p}, m, 1.1, eps) - expect) <= 1e-14 * 10);
    }
}

TEST_CASE("maximizer") {
    ModelParams m;
    MaximizerTolerances exact{1e-6, 1e-6, 0.0};
    CHECK(optimal_dividend(1.0, m, exact) == m.p);
    CHECK(optimal_dividend(0.5, m) == m.M);
    CHECK(optimal_dividend(1.5, m) == 0.0);

    m.mu = 0.08;
    m.r = 0.03;
    m.sigma = 0.2;
    const State th{0.3, 1.0, 0.1};
    DerivBundle d;
    d.v_x = 2.0;
    d.v_xx = -1.0;
    const auto best = maximize_hamiltonian(th, d, m, 1.0, 0.05);
    CHECK(best.ctrl.gamma == 1.0);
    CHECK(best.ctrl.a == 0.0);
    double brute = -std::numeric_limits<double>::infinity();
    for (int g = 0; g <= 1000; ++g)
        for (double a : {0.0, m.p, m.M})
            brute = std::max(brute, hamiltonian_n(th, d, {g / 1000.0, a}, m, 1.0, 0.05));
    CHECK(std::abs(best.value - brute) <= 1e-9);

    d.v_xx = 1.0;
    CHECK(optimal_gamma(1.0, 2.0, 1.0, m) == 1.0);
    CHECK(optimal_gamma(0.0, 2.0, -5.0, m) == 1.0);

    d.v_x = std::nan("");
    CHECK_THROWS_AS(maximize_hamiltonian(th, d, m, 1.0, 0.05), NumericError);
}

TEST_CASE("maximizer dominates random controls") {
    const ModelParams m;
    RngStream rng(17);
    for (int n = 0; n < 200; ++n) {
        const State th{rng.uniform(), 4.0 * rng.uniform(), rng.uniform()};
        const DerivBundle d = random_bundle(rng);
        const auto best = maximize_hamiltonian(th, d, m, 1.0, 0.05);
        for (int q = 0; q < 200; ++q) {
            const ControlPair u{rng.uniform(), m.M * rng.uniform()};
            CHECK(best.value >= hamiltonian_n(th, d, u, m, 1.0, 0.05) - 1e-9);
        }
    }
}

TEST_CASE("claim integral") {
    // v(y) = y, x = 1, delta = 0, Exponential(1): int_0^1 (1-u) e^{-u} du - 1.
    std::vector<double> y, v;
    for (int i = 0; i <= 2000; ++i) {
        y.push_back(i * 1e-3);
        v.push_back(i * 1e-3);
    }
    const auto ex = ClaimLaw::exponential(1.0);
    CHECK(nonlocal_integral(y, v, 1.0, 1.0, ex) == Approx(std::exp(-1.0) - 1.0).epsilon(1e-10));

    // Constant integrand with delta = 0.05.
    std::vector<double> yd, k;
    for (int i = 0; i <= 100; ++i) {
        yd.push_back(-0.05 + i * 0.03);
        k.push_back(2.5);
    }
    const double x = 1.2;
    CHECK(nonlocal_integral(yd, k, 2.5, x, ex) == Approx(2.5 * ex.cdf(x + 0.05) - 2.5).epsilon(1e-12));
    CHECK(nonlocal_integral(yd, k, 0.7, -0.05, ex) == Approx(-0.7));
    CHECK(nonlocal_integral(yd, k, 0.7, -0.2, ex) == Approx(-0.7));

    const auto w = claim_weights(yd, x, ex);
    double total = 0.0;
    for (double q : w) {
        CHECK(q >= 0.0);
        total += q;
    }
    CHECK(total == Approx(ex.cdf(x + 0.05)).epsilon(1e-12));

    // Point mass at 0 returns the slice at x itself.
    std::vector<double> lin;
    for (double q : yd) lin.push_back(3.0 * q + 1.0);
    CHECK(nonlocal_integral(yd, lin, 0.0, 0.4, ClaimLaw::point_mass(0.0)) == Approx(3.0 * 0.4 + 1.0));
}
