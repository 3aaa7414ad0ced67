#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sadiv/errors.hpp"
#include "sadiv/io.hpp"
#include "sadiv/verify.hpp"

using namespace sadiv;
using doctest::Approx;
namespace fs = std::filesystem;

TEST_CASE("sandwich constants") {
    ModelParams m;
    m.M = 2.0;
    m.p = 1.0;
    m.mu = 0.05;
    m.r = 0.03;
    m.T = 1.0;
    CHECK(sandwich_q1(m) == Approx(4.0));  // max{2 + 2, 2 (1 + 0.05)}
    m.c = 0.05;
    CHECK(sandwich_q2(m, WaitingLaw::exponential(1.0)) == Approx(2.05));

    ModelParams big;
    big.p = 3.0;
    big.M = 3.0;
    big.mu = 0.5;
    CHECK(sandwich_q1(big) == Approx(2.0 * (3.0 + 0.5)));

    CHECK(boundary_distance({0.5, 0.3, 0.2}, 1.0) == Approx(0.2));
    CHECK(boundary_distance({0.5, 3.0, 0.4}, 1.0) == Approx(0.1 / std::sqrt(2.0)));
    CHECK(boundary_distance({0.95, 3.0, 0.5}, 1.0) == Approx(0.05));
    CHECK(boundary_distance({0.0, 1.0, 0.0}, 1.0) == 0.0);
}

TEST_CASE("heuristic set") {
    const ModelParams m;
    const auto hs = default_heuristics(m);
    REQUIRE(hs.size() == 5);
    for (const auto& h : hs) {
        CHECK((h.gamma >= 0.0 && h.gamma <= 1.0));
        CHECK((h.a == 0.0 || h.a == m.p || h.a == m.M));
    }
}

TEST_CASE("Monte Carlo against a degenerate solve") {
    ModelParams m;
    m.p = 1.0;
    m.M = 1.0;
    m.c = 0.1;
    const auto waiting = WaitingLaw::exponential(1.0);
    const auto claims = ClaimLaw::point_mass(0.0);
    const ControlPair forced{0.0, m.p};
    SchemeOptions opt;
    opt.forced_control = forced;
    const Grid g(m.T, 0.0, 0.0, 4.0, 101, 41, 3);
    const ValueField f = solve_backward(g, Psi(PsiSpec{}, m.T, 0.0), m, waiting, claims, opt);
    const double exact = (1.0 - std::exp(-0.1)) / 0.1;
    CHECK(std::abs(f.value_at(0.0, 2.0, 0.0) - exact) < 5e-3);

    SimConfig sim;
    sim.n_paths = 200;
    const auto e = mc_vs_pde(f, ConstantPolicy(forced), m, waiting, claims, sim, 5e-3);
    CHECK(e.pass);
    CHECK(e.measured < 5e-3);

    // Paying nothing earns nothing and sits below any nonnegative value.
    const auto sweep = suboptimality_sweep(f, {{0.0, 0.0}}, m, waiting, claims, sim, 0.0);
    CHECK(sweep.pass);
}

TEST_CASE("regression baseline") {
    RunConfig cfg = parse_config(
        "grid: {n_s: 12, n_x: 24, n_w: 10}\n"
        "sim: {n_paths: 50}\n"
        "verify:\n  checks: [monotonicity, sandwich, w_invariance, maximizer, assumption62_exponential]\n");
    const fs::path dir = fs::temp_directory_path() / "sadiv_test_verify";
    fs::create_directories(dir);
    const fs::path base = dir / "baseline.json";
    fs::remove(base);

    const auto first = run_verification(cfg, base, true);
    CHECK(first.checks.size() == 5);
    CHECK(first.pass);
    REQUIRE(fs::exists(base));

    const auto again = run_verification(cfg, base, false);
    REQUIRE(again.checks.size() == 6);
    CHECK(again.checks.back().name == "baseline");
    CHECK(again.checks.back().pass);
    CHECK(again.pass);

    const auto j = again.to_json();
    CHECK(j.at("schema") == "v1");
    CHECK(j.at("checks").size() == 6);

    auto tampered = read_json(base);
    tampered["values"]["V_start"] = tampered["values"]["V_start"].get<double>() + 1e-6;
    write_json(tampered, base);
    const auto drifted = run_verification(cfg, base, false);
    CHECK_FALSE(drifted.checks.back().pass);
    CHECK_FALSE(drifted.pass);

    cfg.verify.checks = {"no_such_check"};
    CHECK_THROWS_AS(run_verification(cfg, base, false), ConfigError);
}
