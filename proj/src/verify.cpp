#include "sadiv/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include "sadiv/errors.hpp"
#include "sadiv/io.hpp"

namespace sadiv {

namespace {

using Clock = std::chrono::steady_clock;

CheckEntry entry(std::string name, double measured, double tolerance, bool pass) {
    CheckEntry e;
    e.name = std::move(name);
    e.measured = measured;
    e.tolerance = tolerance;
    e.pass = pass;
    return e;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class F>
CheckEntry timed(F&& f) {
    const auto t0 = Clock::now();
    CheckEntry e = f();
    e.runtime_s = seconds_since(t0);
    return e;
}

CheckEntry maximizer_check(std::uint64_t seed) {
    ModelParams params;
    RngStream rng = RngStream(seed).split(0x6d61);
    double worst = std::numeric_limits<double>::infinity();
    for (int n = 0; n < 1000; ++n) {
        const State theta{rng.uniform(), 5.0 * rng.uniform(), rng.uniform()};
        DerivBundle d;
        d.v = 2.0 * rng.uniform();
        d.v_x = 3.0 * rng.uniform() - 0.5;
        d.v_xx = 4.0 * rng.uniform() - 3.0;
        d.v_w = rng.uniform() - 0.5;
        d.v_ww = rng.uniform() - 0.5;
        d.i_delta = -rng.uniform();
        const double lam = 1.0;
        const double eps = 0.05;
        const double closed = maximize_hamiltonian(theta, d, params, lam, eps).value;
        double brute = -std::numeric_limits<double>::infinity();
        for (int q = 0; q <= 1000; ++q)
            for (double a : {0.0, params.p, params.M})
                brute = std::max(brute, hamiltonian_n(theta, d, {q * 1e-3, a}, params, lam, eps));
        worst = std::min(worst, closed - brute);
    }
    CheckEntry e = entry("maximizer", worst, -1e-9, worst >= -1e-9);
    e.detail = "min over 1000 bundles of closed-form value minus grid-search value";
    return e;
}

CheckEntry deterministic_oracle(const SimConfig& base) {
    ModelParams m;
    m.p = 1.0;
    m.M = 1.0;
    m.c = 0.1;
    m.r = 0.03;
    m.T = 1.0;
    const auto waiting = WaitingLaw::exponential(1.0);
    const auto claims = ClaimLaw::point_mass(0.0);
    const ControlPair forced{0.0, m.p};
    const double exact = m.p * (1.0 - std::exp(-m.c * m.T)) / m.c;

    SimConfig sim = base;
    sim.n_paths = 1000;
    sim.dt = 1e-3;
    sim.start = {0.0, 2.0, 0.0};
    sim.record_paths = false;
    const ConstantPolicy pol(forced);
    const MCEstimate est = estimate_J(pol, m, waiting, claims, sim);

    const Grid grid(m.T, 0.0, 0.0, 4.0, 101, 41, 3);
    const Psi psi(PsiSpec{}, m.T, 0.0);
    SchemeOptions opt;
    opt.forced_control = forced;
    const ValueField field = solve_backward(grid, psi, m, waiting, claims, opt);
    const double pde = field.value_at(0.0, 2.0, 0.0);

    const double err = std::max(std::abs(est.mean - exact), std::abs(pde - exact));
    CheckEntry e = entry("deterministic_oracle", err, 5e-3, err <= 5e-3);
    e.data = {{"exact", exact}, {"mc", est.mean}, {"mc_se", est.std_error}, {"pde", pde}};
    e.detail = "point-mass-0 claims, forced (0,p): MC and PDE against p(1-e^{-cT})/c";
    return e;
}

CheckEntry cauchy_check(const RunConfig& cfg) {
    RefineOptions ro;
    ro.x_query_max = cfg.sim.start.x;
    ro.query = cfg.sim.start;
    const ConvergenceTable t = refine_study(cfg.grid, cfg.scheme.schedule, cfg.psi, cfg.model, cfg.waiting,
                                            cfg.claims, cfg.scheme.options, ro);
    const double last = t.sup_differences.back();
    CheckEntry e = entry("cauchy", last, 0.05, t.strictly_decreasing && last < 0.05);
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : t.levels)
        levels.push_back({{"eps_n", l.eps_n}, {"delta", l.delta}, {"value_at_start", l.value_at_query}});
    e.data = {{"levels", levels}, {"sup_differences", t.sup_differences},
              {"strictly_decreasing", t.strictly_decreasing}};
    e.detail = "successive sup_D differences along the (eps_n, delta) schedule";
    return e;
}

}  // namespace

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks)
        arr.push_back({{"name", c.name},
                       {"measured", c.measured},
                       {"tolerance", c.tolerance},
                       {"pass", c.pass},
                       {"runtime_s", c.runtime_s},
                       {"detail", c.detail},
                       {"data", c.data}});
    return {{"schema", "v1"}, {"kind", "verification_report"}, {"pass", pass}, {"checks", arr}};
}

const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names = {
        "mc_vs_pde",    "suboptimality", "cauchy",       "monotonicity",
        "sandwich",     "boundedness",   "w_invariance", "assumption62_exponential",
        "assumption62_erlang", "psi_validation", "maximizer", "deterministic_oracle"};
    return names;
}

std::vector<ControlPair> default_heuristics(const ModelParams& m) {
    return {{0.0, m.M}, {1.0, 0.0}, {0.5, m.p}, {0.0, m.p}, {1.0, m.M}};
}

CheckEntry mc_vs_pde(const ValueField& field, const ControlLaw& policy, const ModelParams& params,
                     const WaitingLaw& waiting, const ClaimLaw& claims, const SimConfig& sim, double tol) {
    const MCEstimate est = estimate_J(policy, params, waiting, claims, sim);
    const double v = field.value_at(sim.start.s, sim.start.x, sim.start.w);
    const double gap = std::abs(est.mean - v);
    const double bound = 3.0 * est.std_error + tol;
    CheckEntry e = entry("mc_vs_pde", gap, bound, est.valid && gap <= bound);
    e.data = {{"V", v}, {"J", est.mean}, {"std_error", est.std_error}, {"n_paths", est.n_paths},
              {"n_aborted", est.n_aborted}};
    e.detail = "|J(extracted policy) - V(start)| against 3 SE + scheme budget";
    return e;
}

CheckEntry suboptimality_sweep(const ValueField& field, const std::vector<ControlPair>& heuristics,
                               const ModelParams& params, const WaitingLaw& waiting,
                               const ClaimLaw& claims, const SimConfig& sim, double tol) {
    const double v = field.value_at(sim.start.s, sim.start.x, sim.start.w);
    double worst = -std::numeric_limits<double>::infinity();
    bool ok = true;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& h : heuristics) {
        const ConstantPolicy pol(h);
        const MCEstimate est = estimate_J(pol, params, waiting, claims, sim);
        const double excess = est.mean - v - 3.0 * est.std_error;
        worst = std::max(worst, excess);
        ok = ok && est.valid && excess <= tol;
        rows.push_back({{"gamma", h.gamma}, {"a", h.a}, {"J", est.mean}, {"std_error", est.std_error},
                        {"pass", excess <= tol}});
    }
    CheckEntry e = entry("suboptimality", worst, tol, ok && !heuristics.empty());
    e.data = {{"V", v}, {"heuristics", rows}};
    e.detail = "worst J(heuristic) - V - 3 SE";
    return e;
}

double sandwich_q1(const ModelParams& m) { return std::max(2.0 + m.M, 2.0 * (m.p + m.mu * m.T)); }

double sandwich_q2(const ModelParams& m, const WaitingLaw& waiting) {
    return (m.c + waiting.sup_intensity(0.0, m.T)) * m.T + 1.0;
}

double boundary_distance(const State& th, double T) {
    return std::min({th.x, th.w, (th.s - th.w) / std::sqrt(2.0), T - th.s, th.s});
}

std::vector<CheckEntry> bounds_and_shape(const ValueField& field, const Psi& psi,
                                         const ModelParams& params, const WaitingLaw& waiting,
                                         double slack) {
    const Grid& g = field.grid();
    std::vector<CheckEntry> out;

    out.push_back(timed([&] {
        double worst = 0.0;
        State at{};
        for (int k = 0; k < g.n_s(); ++k)
            for (int j = 0; j < g.n_w(); ++j)
                for (int i = 1; i < g.n_x(); ++i) {
                    const double drop = field.at(k, i - 1, j) - field.at(k, i, j);
                    if (drop > worst) {
                        worst = drop;
                        at = {g.s(k), g.x(i), g.w(j)};
                    }
                }
        CheckEntry e = entry("monotonicity", worst, 1e-12, worst <= 1e-12);
        e.data = {{"worst_at", {at.s, at.x, at.w}}};
        e.detail = "largest decrease of V between neighbouring surplus nodes";
        return e;
    }));

    out.push_back(timed([&] {
        const double q1 = sandwich_q1(params);
        const double q2 = sandwich_q2(params, waiting);
        double worst = -std::numeric_limits<double>::infinity();
        State at{};
        for (int k = 0; k < g.n_s(); ++k)
            for (int i = 0; i < g.n_x(); ++i)
                for (int j = 0; j < g.n_w(); ++j) {
                    if (!g.in_physical(k, i, j)) continue;
                    const State th{g.s(k), g.x(i), g.w(j)};
                    const double d = boundary_distance(th, params.T);
                    const double v = field.at(k, i, j);
                    const double lo = d - q2 * (params.T - th.s) - slack;
                    const double hi = 2.0 * d + q1 * (params.T - th.s) + slack;
                    const double viol = std::max(lo - v, v - hi);
                    if (viol > worst) {
                        worst = viol;
                        at = th;
                    }
                }
        CheckEntry e = entry("sandwich", worst, 0.0, worst <= 0.0);
        e.data = {{"Q1", q1}, {"Q2", q2}, {"slack", slack}, {"worst_at", {at.s, at.x, at.w}}};
        e.detail = "largest excursion outside the barrier pair on D (negative = inside)";
        return e;
    }));

    out.push_back(timed([&] {
        double worst = -std::numeric_limits<double>::infinity();
        double sup_psi = 0.0;
        for (int k = 0; k < g.n_s(); ++k)
            for (int i = 0; i < g.n_x(); ++i)
                for (int j = 0; j < g.n_w(); ++j)
                    if (g.in_domain(k, j)) sup_psi = std::max(sup_psi, psi(g.s(k), g.x(i), g.w(j)));
        for (int k = 0; k < g.n_s(); ++k)
            for (int i = 0; i < g.n_x(); ++i)
                for (int j = 0; j < g.n_w(); ++j) {
                    if (!g.in_physical(k, i, j)) continue;
                    const double horizon = params.T + g.delta() - g.s(k);
                    const double cap = params.M * (1.0 - std::exp(-params.c * horizon)) / params.c + sup_psi;
                    const double v = field.at(k, i, j);
                    worst = std::max({worst, -v, v - cap});
                }
        CheckEntry e = entry("boundedness", worst, 0.0, worst <= 0.0);
        e.detail = "0 <= V <= M(1-e^{-c(T+delta-s)})/c + sup Psi on D";
        return e;
    }));

    out.push_back(timed([&] {
        CheckEntry e = entry("w_invariance", 0.0, 1e-10, true);
        if (!waiting.is_constant_intensity() || !psi.w_independent_on_grid()) {
            e.detail = "not applicable: intensity or Psi depends on w";
            return e;
        }
        double worst = 0.0;
        for (int k = 0; k < g.n_s(); ++k)
            for (int i = 0; i < g.n_x(); ++i) {
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                for (int j = 0; j < g.n_w(); ++j) {
                    lo = std::min(lo, field.at(k, i, j));
                    hi = std::max(hi, field.at(k, i, j));
                }
                worst = std::max(worst, hi - lo);
            }
        e.measured = worst;
        e.pass = worst <= 1e-10;
        e.detail = "max over (s,x) of the spread of V across w";
        return e;
    }));
    return out;
}

std::vector<CheckEntry> assumption_reports(const Psi& psi, const ModelParams& params,
                                           const WaitingLaw& waiting, const ClaimLaw& claims,
                                           const Grid& grid, double k2) {
    std::vector<CheckEntry> out;
    const std::pair<const char*, WaitingLaw> laws[2] = {
        {"assumption62_exponential", WaitingLaw::exponential(1.0)},
        {"assumption62_erlang", WaitingLaw::erlang(2, 1.0)}};
    for (const auto& [name, law] : laws) {
        out.push_back(timed([&, name = name, &law = law] {
            const IntegrabilityReport r = assumption62_check(law, 2.0, params.T);
            const double bound = r.closed_bound.value_or(std::numeric_limits<double>::infinity());
            CheckEntry e = entry(name, r.value, bound + 1e-4, r.pass && r.value <= bound + 1e-4);
            e.data = {{"law", law.describe()}, {"gamma_prime", 2.0}};
            e.detail = "int_0^T int_0^t t^{(1-g)/2} f_sigma(u)^g du dt against its closed bound";
            return e;
        }));
    }
    out.push_back(timed([&] {
        const PsiReport r = validate_psi(psi, params, waiting, claims, grid, k2);
        CheckEntry e = entry("psi_validation", r.min_margin, 0.0, r.pass && r.slope_pass);
        e.data = {{"worst_at", {r.worst.s, r.worst.x, r.worst.w}},
                  {"nodes_checked", r.nodes_checked},
                  {"min_strip_slope", r.min_strip_slope},
                  {"slope_b", psi.spec().slope_b},
                  {"slope_pass", r.slope_pass},
                  {"k2", k2}};
        e.detail = "min over lattice nodes of Psi_t + H^n(Psi; 0, M) - (M - k2), and strip slope";
        return e;
    }));
    return out;
}

VerificationReport run_verification(const RunConfig& cfg, const std::filesystem::path& baseline, bool record) {
    auto selected = [&](const std::string& n) {
        return cfg.verify.checks.empty() ||
               std::find(cfg.verify.checks.begin(), cfg.verify.checks.end(), n) != cfg.verify.checks.end();
    };
    for (const auto& n : cfg.verify.checks)
        if (std::find(check_names().begin(), check_names().end(), n) == check_names().end())
            throw ConfigError("verify: unknown check '" + n + "'");

    const Grid grid = Grid::make(cfg.model, cfg.grid, cfg.scheme.delta, cfg.scheme.eps_n, cfg.sim.start.x,
                                 cfg.claims.mean());
    const Psi psi(cfg.psi, cfg.model.T, cfg.scheme.delta);
    const ValueField field = solve_backward(grid, psi, cfg.model, cfg.waiting, cfg.claims, cfg.scheme.options);
    auto pf = std::make_shared<PolicyField>(
        mollify_policy(extract_policy(field, cfg.model, cfg.waiting, cfg.claims, cfg.extract), cfg.mollify_radius));
    const FeedbackPolicy policy(pf);

    VerificationReport rep;
    auto push = [&](CheckEntry e) {
        if (selected(e.name)) rep.checks.push_back(std::move(e));
    };

    if (selected("mc_vs_pde"))
        push(timed([&] {
            return mc_vs_pde(field, policy, cfg.model, cfg.waiting, cfg.claims, cfg.sim, cfg.verify.mc_tolerance);
        }));
    if (selected("suboptimality")) {
        const auto hs = cfg.verify.heuristics.empty() ? default_heuristics(cfg.model) : cfg.verify.heuristics;
        push(timed([&] {
            return suboptimality_sweep(field, hs, cfg.model, cfg.waiting, cfg.claims, cfg.sim,
                                       cfg.verify.heuristic_tolerance);
        }));
    }
    if (selected("cauchy")) push(timed([&] { return cauchy_check(cfg); }));
    for (auto& e : bounds_and_shape(field, psi, cfg.model, cfg.waiting, cfg.verify.sandwich_slack)) push(e);
    for (auto& e : assumption_reports(psi, cfg.model, cfg.waiting, cfg.claims, grid, cfg.verify.k2)) push(e);
    if (selected("maximizer")) push(timed([&] { return maximizer_check(cfg.sim.seed); }));
    if (selected("deterministic_oracle")) push(timed([&] { return deterministic_oracle(cfg.sim); }));

    // Regression values of record.
    nlohmann::json values = {{"field_hash", std::to_string(field.hash())},
                             {"V_start", field.value_at(cfg.sim.start.s, cfg.sim.start.x, cfg.sim.start.w)}};
    for (const auto& c : rep.checks) values[c.name] = c.measured;
    if (record) {
        write_json({{"schema", "v1"}, {"kind", "baseline"}, {"values", values}}, baseline);
    } else if (!baseline.empty() && std::filesystem::exists(baseline)) {
        const auto base = read_json(baseline).at("values");
        double worst = 0.0;
        nlohmann::json diffs = nlohmann::json::object();
        bool same_hash = base.value("field_hash", "") == values["field_hash"].get<std::string>();
        for (auto it = base.begin(); it != base.end(); ++it) {
            if (!it->is_number() || !values.contains(it.key())) continue;
            const double d = std::abs(values[it.key()].get<double>() - it->get<double>());
            diffs[it.key()] = d;
            worst = std::max(worst, d);
        }
        CheckEntry e = entry("baseline", worst, 1e-12, same_hash && worst <= 1e-12);
        e.data = {{"differences", diffs}, {"field_hash_match", same_hash}};
        e.detail = "drift of regression values against the recorded baseline";
        rep.checks.push_back(e);
    }

    rep.pass = !rep.checks.empty();
    for (const auto& c : rep.checks) rep.pass = rep.pass && c.pass;
    // Fail closed: every selected check must be present.
    for (const auto& n : check_names())
        if (selected(n) && std::none_of(rep.checks.begin(), rep.checks.end(),
                                        [&](const CheckEntry& c) { return c.name == n; }))
            rep.pass = false;
    return rep;
}

}  // namespace sadiv
