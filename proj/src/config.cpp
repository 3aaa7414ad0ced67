#include "sadiv/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "sadiv/errors.hpp"
#include "sadiv/verify.hpp"

namespace sadiv {

namespace {

class Reader {
public:
    explicit Reader(std::string origin) : origin_(std::move(origin)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const {
        std::ostringstream os;
        os << origin_;
        if (node.IsDefined() && node.Mark().line >= 0) os << ':' << node.Mark().line + 1;
        os << ": " << msg;
        throw ConfigError(os.str());
    }

    void require_map(const YAML::Node& node, const std::string& name) const {
        if (!node.IsMap()) fail(node, "'" + name + "' must be a mapping");
    }

    void only_keys(const YAML::Node& node, const std::string& name, std::set<std::string> allowed) const {
        require_map(node, name);
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in '" + name + "'");
        }
    }

    template <class T>
    void get(const YAML::Node& map, const std::string& key, T& out) const {
        const YAML::Node n = map[key];
        if (!n) return;
        try {
            out = n.as<T>();
        } catch (const YAML::Exception&) {
            fail(n, "bad value for '" + key + "'");
        }
    }

    template <class T>
    T need(const YAML::Node& map, const std::string& key, const std::string& section) const {
        const YAML::Node n = map[key];
        if (!n) fail(map, "missing key '" + key + "' in '" + section + "'");
        T out{};
        get(map, key, out);
        return out;
    }

    // Runs `build` and re-anchors domain errors from the model layer at `node`.
    template <class F>
    auto anchored(const YAML::Node& node, F&& build) const {
        try {
            return build();
        } catch (const ConfigError& e) {
            fail(node, e.what());
        } catch (const DomainError& e) {
            fail(node, e.what());
        }
    }

private:
    std::string origin_;
};

WaitingLaw parse_waiting(const Reader& rd, const YAML::Node& n) {
    rd.require_map(n, "waiting");
    const auto type = rd.need<std::string>(n, "type", "waiting");
    if (type == "exponential") {
        rd.only_keys(n, "waiting", {"type", "rate"});
        return rd.anchored(n, [&] { return WaitingLaw::exponential(rd.need<double>(n, "rate", "waiting")); });
    }
    if (type == "erlang") {
        rd.only_keys(n, "waiting", {"type", "shape", "rate"});
        return rd.anchored(n, [&] {
            return WaitingLaw::erlang(rd.need<int>(n, "shape", "waiting"), rd.need<double>(n, "rate", "waiting"));
        });
    }
    if (type == "tabulated") {
        rd.only_keys(n, "waiting", {"type", "nodes", "values"});
        return rd.anchored(n, [&] {
            return WaitingLaw::tabulated(rd.need<std::vector<double>>(n, "nodes", "waiting"),
                                         rd.need<std::vector<double>>(n, "values", "waiting"));
        });
    }
    rd.fail(n["type"], "unknown waiting law '" + type + "' (exponential, erlang, tabulated)");
}

ClaimLaw parse_claims(const Reader& rd, const YAML::Node& n) {
    rd.require_map(n, "claims");
    const auto type = rd.need<std::string>(n, "type", "claims");
    if (type == "exponential") {
        rd.only_keys(n, "claims", {"type", "mean"});
        return rd.anchored(n, [&] { return ClaimLaw::exponential(rd.need<double>(n, "mean", "claims")); });
    }
    if (type == "tabulated") {
        rd.only_keys(n, "claims", {"type", "nodes", "values"});
        return rd.anchored(n, [&] {
            return ClaimLaw::tabulated(rd.need<std::vector<double>>(n, "nodes", "claims"),
                                       rd.need<std::vector<double>>(n, "values", "claims"));
        });
    }
    if (type == "point_mass") {
        rd.only_keys(n, "claims", {"type", "at"});
        return rd.anchored(n, [&] { return ClaimLaw::point_mass(rd.need<double>(n, "at", "claims")); });
    }
    rd.fail(n["type"], "unknown claim law '" + type + "' (exponential, tabulated, point_mass)");
}

ControlPair parse_control(const Reader& rd, const YAML::Node& n, const std::string& name,
                          const ModelParams& m) {
    rd.only_keys(n, name, {"gamma", "a"});
    ControlPair c;
    c.gamma = rd.need<double>(n, "gamma", name);
    // Dividend rates may be given symbolically.
    const YAML::Node a = n["a"];
    if (!a) rd.fail(n, "missing key 'a' in '" + name + "'");
    const auto text = a.as<std::string>();
    if (text == "p")
        c.a = m.p;
    else if (text == "M")
        c.a = m.M;
    else
        rd.get(n, "a", c.a);
    if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) rd.fail(n, "gamma must lie in [0,1]");
    if (!(c.a >= 0.0 && c.a <= m.M)) rd.fail(n, "a must lie in [0,M]");
    return c;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
    Reader rd(origin);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        std::ostringstream os;
        os << origin << ':' << e.mark.line + 1 << ": " << e.msg;
        throw ConfigError(os.str());
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    rd.only_keys(root, "<root>",
                 {"model", "waiting", "claims", "grid", "psi", "scheme", "policy", "sim", "verify", "output"});

    RunConfig cfg;
    if (const auto n = root["model"]) {
        rd.only_keys(n, "model", {"p", "r", "mu", "sigma", "c", "M", "T"});
        rd.get(n, "p", cfg.model.p);
        rd.get(n, "r", cfg.model.r);
        rd.get(n, "mu", cfg.model.mu);
        rd.get(n, "sigma", cfg.model.sigma);
        rd.get(n, "c", cfg.model.c);
        rd.get(n, "M", cfg.model.M);
        rd.get(n, "T", cfg.model.T);
        rd.anchored(n, [&] { cfg.model.validate(); return 0; });
    }
    if (const auto n = root["waiting"]) cfg.waiting = parse_waiting(rd, n);
    if (const auto n = root["claims"]) cfg.claims = parse_claims(rd, n);

    if (const auto n = root["grid"]) {
        rd.only_keys(n, "grid", {"n_s", "n_x", "n_w", "x_max"});
        rd.get(n, "n_s", cfg.grid.n_s);
        rd.get(n, "n_x", cfg.grid.n_x);
        rd.get(n, "n_w", cfg.grid.n_w);
        rd.get(n, "x_max", cfg.grid.x_max);
        if (cfg.grid.n_s < 2 || cfg.grid.n_x < 3 || cfg.grid.n_w < 2)
            rd.fail(n, "grid needs n_s >= 2, n_x >= 3, n_w >= 2");
        if (cfg.grid.x_max < 0.0) rd.fail(n, "x_max must be nonnegative (0 = automatic)");
    }

    if (const auto n = root["psi"]) {
        rd.only_keys(n, "psi", {"k1", "slope_b", "strip", "rise", "fall", "w_ramp"});
        rd.get(n, "k1", cfg.psi.k1);
        rd.get(n, "slope_b", cfg.psi.slope_b);
        rd.get(n, "strip", cfg.psi.strip);
        rd.get(n, "rise", cfg.psi.rise);
        rd.get(n, "fall", cfg.psi.fall);
        rd.get(n, "w_ramp", cfg.psi.w_ramp);
    }

    if (const auto n = root["scheme"]) {
        rd.only_keys(n, "scheme", {"eps_n", "delta", "substeps", "cfl_safety", "schedule", "forced_control"});
        rd.get(n, "eps_n", cfg.scheme.eps_n);
        rd.get(n, "delta", cfg.scheme.delta);
        rd.get(n, "substeps", cfg.scheme.options.substeps);
        rd.get(n, "cfl_safety", cfg.scheme.options.cfl_safety);
        if (const auto sch = n["schedule"]) {
            if (!sch.IsSequence()) rd.fail(sch, "'schedule' must be a list of [eps_n, delta] pairs");
            cfg.scheme.schedule.clear();
            for (const auto& item : sch) {
                if (!item.IsSequence() || item.size() != 2) rd.fail(item, "schedule entries are [eps_n, delta]");
                const double e = item[0].as<double>();
                const double d = item[1].as<double>();
                if (!(e >= 0.0 && d >= 0.0 && d < 1.0)) rd.fail(item, "schedule needs eps_n >= 0, 0 <= delta < 1");
                cfg.scheme.schedule.emplace_back(e, d);
            }
        }
        if (const auto fc = n["forced_control"])
            cfg.scheme.options.forced_control = parse_control(rd, fc, "forced_control", cfg.model);
        if (!(cfg.scheme.eps_n >= 0.0)) rd.fail(n, "eps_n must be nonnegative");
        if (!(cfg.scheme.delta >= 0.0 && cfg.scheme.delta < 1.0)) rd.fail(n, "delta must lie in [0,1)");
        if (cfg.scheme.options.substeps < 0) rd.fail(n, "substeps must be nonnegative (0 = automatic)");
        if (!(cfg.scheme.options.cfl_safety > 0.0 && cfg.scheme.options.cfl_safety <= 1.0))
            rd.fail(n, "cfl_safety must lie in (0,1]");
    }

    if (const auto n = root["policy"]) {
        rd.only_keys(n, "policy", {"mollify_radius", "x_tol", "curv_tol", "tie_tol"});
        rd.get(n, "mollify_radius", cfg.mollify_radius);
        rd.get(n, "x_tol", cfg.extract.tol.x_tol);
        rd.get(n, "curv_tol", cfg.extract.tol.curv_tol);
        rd.get(n, "tie_tol", cfg.extract.tol.tie_tol);
        if (cfg.mollify_radius < 0) rd.fail(n, "mollify_radius must be nonnegative");
        cfg.scheme.options.tol = cfg.extract.tol;
    }

    if (const auto n = root["sim"]) {
        rd.only_keys(n, "sim", {"dt", "n_paths", "seed", "start", "record_paths", "threads"});
        rd.get(n, "dt", cfg.sim.dt);
        rd.get(n, "n_paths", cfg.sim.n_paths);
        rd.get(n, "seed", cfg.sim.seed);
        rd.get(n, "record_paths", cfg.sim.record_paths);
        rd.get(n, "threads", cfg.sim.threads);
        if (const auto st = n["start"]) {
            rd.only_keys(st, "start", {"s", "x", "w"});
            rd.get(st, "s", cfg.sim.start.s);
            rd.get(st, "x", cfg.sim.start.x);
            rd.get(st, "w", cfg.sim.start.w);
        }
        rd.anchored(n, [&] { cfg.sim.validate(cfg.model.T); return 0; });
    }
    cfg.scheme.options.threads = cfg.sim.threads;

    if (const auto n = root["verify"]) {
        rd.only_keys(n, "verify",
                     {"checks", "sandwich_slack", "mc_tolerance", "heuristic_tolerance", "k2", "heuristics"});
        rd.get(n, "checks", cfg.verify.checks);
        for (const auto& name : cfg.verify.checks) {
            const auto& known = check_names();
            if (std::find(known.begin(), known.end(), name) == known.end())
                rd.fail(n["checks"], "unknown check '" + name + "'");
        }
        rd.get(n, "sandwich_slack", cfg.verify.sandwich_slack);
        rd.get(n, "mc_tolerance", cfg.verify.mc_tolerance);
        rd.get(n, "heuristic_tolerance", cfg.verify.heuristic_tolerance);
        rd.get(n, "k2", cfg.verify.k2);
        if (const auto hs = n["heuristics"]) {
            if (!hs.IsSequence()) rd.fail(hs, "'heuristics' must be a list");
            for (const auto& h : hs) cfg.verify.heuristics.push_back(parse_control(rd, h, "heuristics", cfg.model));
        }
        if (cfg.verify.k2 != 0.0 && !(cfg.verify.k2 > 0.0 && cfg.verify.k2 < cfg.model.M))
            rd.fail(n, "k2 must lie in (0, M)");
    }
    if (cfg.verify.k2 == 0.0) cfg.verify.k2 = 0.5 * cfg.model.M;

    if (const auto n = root["output"]) {
        rd.only_keys(n, "output", {"dir"});
        std::string dir = cfg.output_dir.string();
        rd.get(n, "dir", dir);
        cfg.output_dir = dir;
    }

    // Cross-section check: Psi must be buildable for the configured collar.
    rd.anchored(root["psi"] ? root["psi"] : root, [&] {
        Psi(cfg.psi, cfg.model.T, cfg.scheme.delta);
        return 0;
    });
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(path.string() + ": cannot open config");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path.string());
}

}  // namespace sadiv
