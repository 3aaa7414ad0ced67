#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sadiv/errors.hpp"
#include "sadiv/solver.hpp"

using namespace sadiv;
using doctest::Approx;

namespace {

const ModelParams kRef{};
const auto kPoisson = WaitingLaw::exponential(1.0);
const auto kClaims = ClaimLaw::exponential(1.0);

Grid small_grid(double delta = 0.05, double eps = 0.05) {
    return Grid(kRef.T, delta, eps, 6.0, 16, 30, 12);
}

}  // namespace

TEST_CASE("boundary function shape") {
    const double delta = 0.05;
    const Psi psi(PsiSpec{}, kRef.T, delta);
    // Outside D_1.
    CHECK(psi(0.5, -1.5, 0.2) == 0.0);
    CHECK(psi(0.5, 1.0, -1.5) == 0.0);
    CHECK(psi(0.5, 1.0, 2.0) == 0.0);
    CHECK(psi(kRef.T + delta, 1.0, 0.3) == 0.0);
    CHECK(psi(kRef.T + 2.0 * delta, 1.0, 0.3) == 0.0);

    const double x0 = -PsiSpec{}.strip / 2.0;
    for (double s : {0.1, 0.5, 0.9})
        for (double w : {0.0, s / 2.0, s}) {
            const double h = 1e-6;
            const double fd = (psi(s, x0 + h, w) - psi(s, x0 - h, w)) / (2.0 * h);
            CHECK(fd >= PsiSpec{}.slope_b);
        }
    for (double x = -0.2; x < 3.0; x += 0.013) {
        CHECK(psi(0.4, x, 0.2) >= 0.0);
        CHECK(psi(0.4, x, 0.2) <= PsiSpec{}.k1 + 1e-15);
        CHECK(psi(0.4, x + 0.013, 0.2) >= psi(0.4, x, 0.2));
    }

    PsiSpec weak;
    weak.k1 = 0.01;
    CHECK_THROWS_AS(Psi(weak, kRef.T, delta), ConfigError);
}

TEST_CASE("grid layout") {
    const Grid g = small_grid();
    CHECK(g.x(0) == -0.05);
    CHECK(g.x(1) == 0.0);
    CHECK(g.x(g.n_x() - 1) == 6.0);
    CHECK(g.s(g.n_s() - 1) == kRef.T + 0.05);
    CHECK(g.w(0) == -0.05);
    CHECK(g.x_cell(0.0) == 1);
    CHECK(g.x_cell(-1.0) == 0);
    CHECK(g.x_cell(99.0) == g.n_x() - 2);
    CHECK_THROWS_AS(Grid(1.0, 0.05, 0.05, 6.0, 1, 30, 12), ConfigError);
}

TEST_CASE("one explicit step from a zero terminal slice") {
    // Small drift so that a single step over [0, T + delta] is CFL-stable.
    ModelParams m;
    m.p = 0.05;
    m.M = 0.1;
    m.mu = 0.04;
    m.sigma = 0.1;
    const double T = 0.001, delta = 0.01;
    const Grid g(T, delta, 0.0, 1.0, 2, 11, 2);
    const Psi psi(PsiSpec{}, T, delta);
    SchemeOptions opt;
    opt.substeps = 1;
    const ValueField f = solve_backward(g, psi, m, kPoisson, kClaims, opt);
    const double ds = T + delta;
    for (int i = 1; i < g.n_x(); ++i) CHECK(f.at(0, i, 0) == Approx(ds * m.M).epsilon(1e-12));
    for (int i = 0; i < g.n_x(); ++i) CHECK(std::abs(f.at(1, i, 0)) <= 1e-15);
}

TEST_CASE("pinned faces and classification") {
    const Grid g = small_grid();
    const Psi psi(PsiSpec{}, kRef.T, g.delta());
    const ValueField f = solve_backward(g, psi, kRef, kPoisson, kClaims);
    const int kT = g.n_s() - 1;
    for (int i = 0; i < g.n_x(); ++i)
        for (int j = 0; j < g.n_w(); ++j) {
            CHECK(f.at(kT, i, j) == psi(g.s(kT), g.x(i), g.w(j)));
            CHECK(f.classify(kT, i, j) == NodeClass::Pinned);
        }
    for (int k = 0; k < g.n_s(); ++k)
        for (int j = 0; j < g.n_w(); ++j)
            if (g.in_domain(k, j)) CHECK(f.at(k, 0, j) == psi(g.s(k), g.x(0), g.w(j)));
    CHECK(f.classify(0, 3, g.n_w() - 1) == NodeClass::Outside);
    CHECK(f.classify(3, 3, 0) == NodeClass::Interior);
    CHECK(f.value_at(g.s(3), g.x(5), g.w(2)) == f.at(3, 5, 2));
}

TEST_CASE("monotone scheme properties") {
    const Grid g = small_grid();
    const Psi psi(PsiSpec{}, kRef.T, g.delta());
    const ValueField f = solve_backward(g, psi, kRef, kPoisson, kClaims);

    double worst = 0.0, spread = 0.0;
    for (int k = 0; k < g.n_s(); ++k)
        for (int j = 0; j < g.n_w(); ++j) {
            if (!g.in_domain(k, j)) continue;
            for (int i = 0; i + 1 < g.n_x(); ++i) worst = std::max(worst, f.at(k, i, j) - f.at(k, i + 1, j));
        }
    CHECK(worst <= 1e-12);

    // Constant intensity and a w-independent Psi on the lattice: slices agree.
    REQUIRE(psi.w_independent_on_grid());
    for (int k = 0; k < g.n_s(); ++k)
        for (int i = 0; i < g.n_x(); ++i) {
            double lo = 1e300, hi = -1e300;
            for (int j = 0; j < g.n_w(); ++j) {
                if (!g.in_domain(k, j)) continue;
                lo = std::min(lo, f.at(k, i, j));
                hi = std::max(hi, f.at(k, i, j));
            }
            spread = std::max(spread, hi - lo);
        }
    CHECK(spread <= 1e-10);

    // Larger boundary data cannot lower the solution.
    PsiSpec big;
    big.k1 = 0.1;
    const ValueField f2 = solve_backward(g, Psi(big, kRef.T, g.delta()), kRef, kPoisson, kClaims);
    double drop = 0.0;
    for (std::size_t n = 0; n < f.values().size(); ++n) drop = std::max(drop, f.values()[n] - f2.values()[n]);
    CHECK(drop <= 1e-12);

    // Dividends are bounded by M per unit time over the remaining horizon.
    const double cap = kRef.M * (kRef.T + g.delta()) + PsiSpec{}.k1;
    for (double v : f.values()) CHECK(v <= cap);
}

TEST_CASE("threads do not change the result") {
    const Grid g = small_grid();
    const Psi psi(PsiSpec{}, kRef.T, g.delta());
    SchemeOptions one, four;
    four.threads = 4;
    const auto a = solve_backward(g, psi, kRef, kPoisson, kClaims, one);
    const auto b = solve_backward(g, psi, kRef, kPoisson, kClaims, four);
    CHECK(a.hash() == b.hash());
    CHECK(a.values() == b.values());
}

TEST_CASE("CFL guard") {
    const Grid g = Grid::make(kRef, GridSpec{}, 0.05, 0.05, 2.0, kClaims.mean());
    const Psi psi(PsiSpec{}, kRef.T, 0.05);
    SchemeOptions opt;
    opt.substeps = 1;
    const double dt = cfl_step(g, kRef, kPoisson);
    CHECK(dt > 0.0);
    CHECK(dt < g.ds());
    try {
        solve_backward(g, psi, kRef, kPoisson, kClaims, opt);
        FAIL("expected a CFL refusal");
    } catch (const CflError& e) {
        CHECK(e.required_ds() == Approx(dt));
    }
}

TEST_CASE("boundary-function validation") {
    const Grid g = Grid::make(kRef, GridSpec{}, 0.05, 0.05, 2.0, kClaims.mean());
    const Psi psi(PsiSpec{}, kRef.T, 0.05);
    CHECK_THROWS_AS(validate_psi(psi, kRef, kPoisson, kClaims, g, kRef.M), ConfigError);
    const PsiReport rep = validate_psi(psi, kRef, kPoisson, kClaims, g, kRef.M / 2.0);
    CHECK(rep.nodes_checked > 0);
    CHECK(rep.slope_pass);
    CHECK(rep.min_strip_slope >= PsiSpec{}.slope_b);
    // The residual dips below the margin only where eta switches off.
    if (!rep.pass) CHECK(rep.worst.s > kRef.T);
}

TEST_CASE("refinement study") {
    GridSpec base{10, 20, 8, 6.0};
    const auto same = refine_study(base, {{0.05, 0.05}, {0.05, 0.05}}, PsiSpec{}, kRef, kPoisson, kClaims, {});
    REQUIRE(same.sup_differences.size() == 1);
    CHECK(same.sup_differences[0] == 0.0);
    CHECK(same.levels[0].value_at_query == same.levels[1].value_at_query);
}
