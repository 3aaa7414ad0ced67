#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sadiv/errors.hpp"
#include "sadiv/sim.hpp"

using namespace sadiv;
using doctest::Approx;

namespace {

ModelParams deterministic_params() {
    ModelParams m;
    m.p = 1.0;
    m.M = 1.0;
    m.c = 0.1;
    m.r = 0.03;
    return m;
}

// int_0^1 p e^{-c t} dt
double deterministic_oracle() { return (1.0 - std::exp(-0.1)) / 0.1; }

}  // namespace

TEST_CASE("config validation") {
    SimConfig cfg;
    CHECK_NOTHROW(cfg.validate(1.0));
    cfg.n_paths = 0;
    CHECK_THROWS_AS(cfg.validate(1.0), ConfigError);
    cfg = SimConfig{};
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(1.0), ConfigError);
    cfg = SimConfig{};
    cfg.start = {0.5, 1.0, 0.7};
    CHECK_THROWS_AS(cfg.validate(1.0), ConfigError);
    CHECK(SimConfig{}.hash() == SimConfig{}.hash());
    cfg = SimConfig{};
    cfg.seed = 2;
    CHECK(cfg.hash() != SimConfig{}.hash());
}

TEST_CASE("ruined at the start") {
    SimConfig cfg;
    cfg.start = {0.0, -0.1, 0.0};
    const auto rec = simulate_path(ConstantPolicy({0.0, 2.0}), ModelParams{}, WaitingLaw::exponential(1.0),
                                   ClaimLaw::exponential(1.0), cfg, RngStream(1));
    REQUIRE(rec.ruin_time.has_value());
    CHECK(*rec.ruin_time == 0.0);
    CHECK(rec.discounted_dividends == 0.0);
}

TEST_CASE("deterministic instance") {
    const ModelParams m = deterministic_params();
    const ConstantPolicy pol({0.0, m.p});
    SimConfig cfg;
    cfg.n_paths = 1000;
    const auto claims = ClaimLaw::point_mass(0.0);
    const auto rec = simulate_path(pol, m, WaitingLaw::exponential(1.0), claims, cfg, RngStream(3));
    CHECK_FALSE(rec.ruin_time.has_value());
    CHECK(std::abs(rec.discounted_dividends - deterministic_oracle()) <= 2.0 * cfg.dt);

    const auto est = estimate_J(pol, m, WaitingLaw::exponential(1.0), claims, cfg);
    CHECK(est.valid);
    CHECK(est.n_paths == 1000);
    CHECK(std::abs(est.mean - deterministic_oracle()) <= 3.0 * est.std_error + 2.0 * cfg.dt);

    // Halving dt moves the estimate by no more than twice the first-order
    // prediction |J(dt) - J(dt/2)| <= 2 * C dt with C read off the coarse error.
    SimConfig fine = cfg;
    fine.dt = cfg.dt / 2.0;
    fine.n_paths = 10;
    SimConfig coarse = fine;
    coarse.dt = cfg.dt;
    const double jc = estimate_J(pol, m, WaitingLaw::exponential(1.0), claims, coarse).mean;
    const double jf = estimate_J(pol, m, WaitingLaw::exponential(1.0), claims, fine).mean;
    CHECK(std::abs(jc - jf) <= 2.0 * std::max(std::abs(jc - deterministic_oracle()), 1e-12) + 1e-12);
}

TEST_CASE("estimator bookkeeping") {
    const ModelParams m;
    const auto waiting = WaitingLaw::exponential(1.0);
    const auto claims = ClaimLaw::exponential(1.0);
    const ConstantPolicy pol({0.5, m.p});

    SimConfig one;
    one.n_paths = 1;
    std::vector<PathRecord> recs;
    const auto e1 = estimate_J(pol, m, waiting, claims, one, &recs);
    REQUIRE(recs.size() == 1);
    CHECK(e1.mean == recs[0].discounted_dividends);
    CHECK(e1.std_error == 0.0);

    SimConfig half;
    half.n_paths = 200;
    SimConfig full = half;
    full.n_paths = 400;
    std::vector<PathRecord> a, b;
    estimate_J(pol, m, waiting, claims, half, &a);
    estimate_J(pol, m, waiting, claims, full, &b);
    for (int k = 0; k < 200; ++k) CHECK(a[k].discounted_dividends == b[k].discounted_dividends);

    SimConfig threaded = full;
    threaded.threads = 4;
    const auto s1 = estimate_J(pol, m, waiting, claims, full);
    const auto s4 = estimate_J(pol, m, waiting, claims, threaded);
    CHECK(s1.mean == s4.mean);
    CHECK(s1.std_error == s4.std_error);

    const double cap = m.M * (1.0 - std::exp(-m.c * m.T)) / m.c;
    for (const auto& r : b) {
        CHECK(r.discounted_dividends >= 0.0);
        CHECK(r.discounted_dividends <= cap + 1e-12);
        if (r.ruin_time) CHECK((*r.ruin_time >= 0.0 && *r.ruin_time <= m.T));
    }
}

TEST_CASE("claim counts follow the renewal function") {
    ModelParams m = deterministic_params();
    const ConstantPolicy pol({0.0, 0.0});
    SimConfig cfg;
    cfg.n_paths = 4000;
    cfg.dt = 0.01;
    const auto zero = ClaimLaw::point_mass(0.0);

    auto count_stats = [&](const WaitingLaw& law) {
        std::vector<PathRecord> recs;
        estimate_J(pol, m, law, zero, cfg, &recs);
        double s = 0.0, s2 = 0.0;
        for (const auto& r : recs) {
            s += r.n_claims;
            s2 += double(r.n_claims) * r.n_claims;
        }
        const double n = recs.size();
        const double mean = s / n;
        return std::pair{mean, std::sqrt((s2 / n - mean * mean) / (n - 1))};
    };

    const auto [pm, pse] = count_stats(WaitingLaw::exponential(1.0));
    CHECK(std::abs(pm - 1.0) <= 3.0 * pse);

    // Erlang(2,1) from w = 0: m(1) = int_0^1 (1 - e^{-2u})/2 du.
    const double renewal = 0.5 - (1.0 - std::exp(-2.0)) / 4.0;
    const auto [em, ese] = count_stats(WaitingLaw::erlang(2, 1.0));
    CHECK(std::abs(em - renewal) <= 3.0 * ese);
}

TEST_CASE("recorded trajectories") {
    SimConfig cfg;
    cfg.record_paths = true;
    cfg.dt = 0.01;
    const auto rec = simulate_path(ConstantPolicy({0.3, 1.5}), ModelParams{}, WaitingLaw::exponential(1.0),
                                   ClaimLaw::exponential(1.0), cfg, RngStream(12));
    REQUIRE(rec.trajectory.size() >= 2);
    CHECK(rec.trajectory.front().t == 0.0);
    for (std::size_t n = 1; n < rec.trajectory.size(); ++n) {
        CHECK(rec.trajectory[n].t >= rec.trajectory[n - 1].t);
        CHECK(rec.trajectory[n].dividends >= rec.trajectory[n - 1].dividends);
    }
}
