// Command-line entry point: solve, policy, simulate, verify.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sadiv/config.hpp"
#include "sadiv/errors.hpp"
#include "sadiv/io.hpp"
#include "sadiv/policy.hpp"
#include "sadiv/sim.hpp"
#include "sadiv/solver.hpp"
#include "sadiv/verify.hpp"

namespace fs = std::filesystem;
using namespace sadiv;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
    bool record = false;
    std::string field;
    std::string policy;
    std::string baseline;
};

RunConfig load(const Flags& f) {
    RunConfig cfg = load_config(f.config);
    if (f.seed) cfg.sim.seed = *f.seed;
    if (f.threads) {
        if (*f.threads < 1) throw ConfigError("--threads must be at least 1");
        cfg.sim.threads = *f.threads;
        cfg.scheme.options.threads = *f.threads;
    }
    if (f.out) cfg.output_dir = *f.out;
    return cfg;
}

nlohmann::json run_meta(const RunConfig& cfg) {
    return {{"params", params_to_json(cfg.model)},
            {"waiting", cfg.waiting.describe()},
            {"claims", cfg.claims.describe()}};
}

ValueField solve(const RunConfig& cfg) {
    const Grid grid = Grid::make(cfg.model, cfg.grid, cfg.scheme.delta, cfg.scheme.eps_n, cfg.sim.start.x,
                                 cfg.claims.mean());
    const Psi psi(cfg.psi, cfg.model.T, cfg.scheme.delta);
    return solve_backward(grid, psi, cfg.model, cfg.waiting, cfg.claims, cfg.scheme.options);
}

int cmd_solve(const Flags& f) {
    const RunConfig cfg = load(f);
    const ValueField field = solve(cfg);
    const fs::path out = cfg.output_dir / "value_field.csv";
    write_field(field, out, run_meta(cfg));
    std::printf("V(%g, %g, %g) = %.17g\nwrote %s\n", cfg.sim.start.s, cfg.sim.start.x, cfg.sim.start.w,
                field.value_at(cfg.sim.start.s, cfg.sim.start.x, cfg.sim.start.w), out.c_str());
    return 0;
}

int cmd_policy(const Flags& f) {
    const RunConfig cfg = load(f);
    const fs::path in = f.field.empty() ? cfg.output_dir / "value_field.csv" : fs::path(f.field);
    if (!fs::exists(in)) throw ConfigError(in.string() + ": no solved field (run 'solve' first or pass --field)");
    const ValueField field = read_field(in);
    PolicyField pf = extract_policy(field, cfg.model, cfg.waiting, cfg.claims, cfg.extract);
    pf = mollify_policy(pf, cfg.mollify_radius);
    const fs::path out = cfg.output_dir / "policy.csv";
    write_policy(pf, out);
    std::printf("flagged nodes: %zu, gamma Lipschitz constant: %.6g\nwrote %s\n", pf.flagged,
                gamma_lipschitz(pf), out.c_str());
    return 0;
}

int cmd_simulate(const Flags& f) {
    const RunConfig cfg = load(f);
    const fs::path in = f.policy.empty() ? cfg.output_dir / "policy.csv" : fs::path(f.policy);
    if (!fs::exists(in)) throw ConfigError(in.string() + ": no policy (run 'policy' first or pass --policy)");
    const FeedbackPolicy policy(std::make_shared<PolicyField>(read_policy(in)));
    std::vector<PathRecord> recs;
    const MCEstimate est = estimate_J(policy, cfg.model, cfg.waiting, cfg.claims, cfg.sim,
                                      cfg.sim.record_paths ? &recs : nullptr);
    const fs::path out = cfg.output_dir / "estimate.json";
    write_json(estimate_to_json(est, cfg.sim), out);
    if (cfg.sim.record_paths) write_paths(recs, cfg.output_dir / "paths.csv");
    std::printf("J = %.17g  SE = %.6g  paths = %d  aborted = %d%s\nwrote %s\n", est.mean, est.std_error,
                est.n_paths, est.n_aborted, est.valid ? "" : "  (INVALID)", out.c_str());
    return est.valid ? 0 : 3;
}

int cmd_verify(const Flags& f) {
    const RunConfig cfg = load(f);
    const fs::path baseline = f.baseline.empty() ? cfg.output_dir / "baseline.json" : fs::path(f.baseline);
    const VerificationReport rep = run_verification(cfg, baseline, f.record);
    const fs::path out = cfg.output_dir / "verification_report.json";
    write_json(rep.to_json(), out);
    for (const auto& c : rep.checks)
        std::printf("%-26s %s  measured=%.6g  tol=%.6g  (%.2fs)\n", c.name.c_str(), c.pass ? "PASS" : "FAIL",
                    c.measured, c.tolerance, c.runtime_s);
    if (f.record) std::printf("recorded baseline %s\n", baseline.c_str());
    std::printf("overall: %s\nwrote %s\n", rep.pass ? "PASS" : "FAIL", out.c_str());
    return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-horizon optimal dividends with investment under renewal claims"};
    app.require_subcommand(1);
    Flags f;

    auto common = [&f](CLI::App* sub) {
        sub->add_option("--config", f.config, "YAML configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", f.seed, "Override the simulation seed");
        sub->add_option("--threads", f.threads, "Worker threads (results do not depend on it)");
        sub->add_option("--out", f.out, "Output directory");
        sub->add_flag("--record", f.record, "Write the regression baseline instead of comparing");
    };
    auto* s_solve = app.add_subcommand("solve", "Solve the auxiliary equation; write the value field");
    auto* s_policy = app.add_subcommand("policy", "Extract the feedback policy from a solved field");
    auto* s_sim = app.add_subcommand("simulate", "Monte Carlo estimate of J under a stored policy");
    auto* s_verify = app.add_subcommand("verify", "Run the verification checks");
    for (auto* s : {s_solve, s_policy, s_sim, s_verify}) common(s);
    s_policy->add_option("--field", f.field, "Value field CSV (default <out>/value_field.csv)");
    s_sim->add_option("--policy", f.policy, "Policy CSV (default <out>/policy.csv)");
    s_verify->add_option("--baseline", f.baseline, "Baseline JSON (default <out>/baseline.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*s_solve) return cmd_solve(f);
        if (*s_policy) return cmd_policy(f);
        if (*s_sim) return cmd_simulate(f);
        return cmd_verify(f);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    }
}
