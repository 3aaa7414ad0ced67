#include "sadiv/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sadiv/errors.hpp"

namespace sadiv {

namespace {

std::filesystem::path sidecar(const std::filesystem::path& csv) {
    return std::filesystem::path(csv.string() + ".json");
}

std::string hex64(std::uint64_t h) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + p.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + p.string());
    return is;
}

// Splits a CSV data line into doubles; throws on malformed fields.
std::vector<double> parse_row(const std::string& line, std::size_t expect, const std::string& where) {
    std::vector<double> out;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
        const char* comma = std::find(p, end, ',');
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(p, comma, v);
        if (ec != std::errc() || ptr != comma) throw ConfigError(where + ": malformed number");
        out.push_back(v);
        if (comma == end) break;
        p = comma + 1;
    }
    if (out.size() != expect) throw ConfigError(where + ": wrong column count");
    return out;
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& csv, const std::string& header,
                                          std::size_t cols) {
    auto is = open_in(csv);
    std::string line;
    if (!std::getline(is, line) || line != header)
        throw ConfigError(csv.string() + ":1: expected header '" + header + "'");
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        rows.push_back(parse_row(line, cols, csv.string() + ":" + std::to_string(lineno)));
    }
    return rows;
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json grid_to_json(const Grid& g) {
    return {{"T", g.T()},     {"delta", g.delta()}, {"eps_n", g.eps_n()}, {"x_max", g.x_max()},
            {"n_s", g.n_s()}, {"n_x", g.n_x()},     {"n_w", g.n_w()}};
}

Grid grid_from_json(const nlohmann::json& j) {
    try {
        return Grid(j.at("T").get<double>(), j.at("delta").get<double>(), j.at("eps_n").get<double>(),
                    j.at("x_max").get<double>(), j.at("n_s").get<int>(), j.at("n_x").get<int>(),
                    j.at("n_w").get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("grid metadata: ") + e.what());
    }
}

nlohmann::json params_to_json(const ModelParams& p) {
    return {{"p", p.p}, {"r", p.r}, {"mu", p.mu}, {"sigma", p.sigma}, {"c", p.c}, {"M", p.M}, {"T", p.T}};
}

ModelParams params_from_json(const nlohmann::json& j) {
    try {
        ModelParams p;
        p.p = j.at("p").get<double>();
        p.r = j.at("r").get<double>();
        p.mu = j.at("mu").get<double>();
        p.sigma = j.at("sigma").get<double>();
        p.c = j.at("c").get<double>();
        p.M = j.at("M").get<double>();
        p.T = j.at("T").get<double>();
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model metadata: ") + e.what());
    }
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    auto os = open_out(path);
    os << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    auto is = open_in(path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_field(const ValueField& field, const std::filesystem::path& csv, const nlohmann::json& extra) {
    const Grid& g = field.grid();
    {
        auto os = open_out(csv);
        os << "s,x,w,v\n";
        for (int k = 0; k < g.n_s(); ++k)
            for (int i = 0; i < g.n_x(); ++i)
                for (int j = 0; j < g.n_w(); ++j)
                    os << format_double(g.s(k)) << ',' << format_double(g.x(i)) << ','
                       << format_double(g.w(j)) << ',' << format_double(field.at(k, i, j)) << '\n';
    }
    nlohmann::json meta = {{"schema", "v1"}, {"kind", "value_field"}, {"grid", grid_to_json(g)},
                           {"hash", hex64(field.hash())}};
    if (extra.is_object()) meta.update(extra);
    write_json(meta, sidecar(csv));
}

ValueField read_field(const std::filesystem::path& csv) {
    const auto meta = read_json(sidecar(csv));
    Grid g = grid_from_json(meta.at("grid"));
    const auto rows = read_csv(csv, "s,x,w,v", 4);
    if (rows.size() != g.size()) throw ConfigError(csv.string() + ": row count does not match grid");
    std::vector<double> vals(rows.size());
    for (std::size_t q = 0; q < rows.size(); ++q) vals[q] = rows[q][3];
    return ValueField(std::move(g), std::move(vals));
}

void write_policy(const PolicyField& pf, const std::filesystem::path& csv) {
    const Grid& g = pf.grid;
    {
        auto os = open_out(csv);
        os << "s,x,w,gamma,a\n";
        for (int k = 0; k < g.n_s(); ++k)
            for (int i = 0; i < g.n_x(); ++i)
                for (int j = 0; j < g.n_w(); ++j) {
                    const auto q = g.index(k, i, j);
                    os << format_double(g.s(k)) << ',' << format_double(g.x(i)) << ','
                       << format_double(g.w(j)) << ',' << format_double(pf.gamma[q]) << ','
                       << format_double(pf.a[q]) << '\n';
                }
    }
    const nlohmann::json meta = {{"schema", "v1"},
                                 {"kind", "policy_field"},
                                 {"grid", grid_to_json(g)},
                                 {"params", params_to_json(pf.params)},
                                 {"provenance", hex64(pf.provenance)},
                                 {"flagged_nodes", pf.flagged}};
    write_json(meta, sidecar(csv));
}

PolicyField read_policy(const std::filesystem::path& csv) {
    const auto meta = read_json(sidecar(csv));
    Grid g = grid_from_json(meta.at("grid"));
    const ModelParams params = params_from_json(meta.at("params"));
    const auto rows = read_csv(csv, "s,x,w,gamma,a", 5);
    if (rows.size() != g.size()) throw ConfigError(csv.string() + ": row count does not match grid");
    PolicyField pf{g, std::vector<double>(rows.size()), std::vector<double>(rows.size()), 0, 0, params};
    for (std::size_t q = 0; q < rows.size(); ++q) {
        const double gam = rows[q][3];
        const double a = rows[q][4];
        if (!(gam >= 0.0 && gam <= 1.0))
            throw ConfigError(csv.string() + ":" + std::to_string(q + 2) + ": gamma outside [0,1]");
        if (a != 0.0 && a != params.p && a != params.M)
            throw ConfigError(csv.string() + ":" + std::to_string(q + 2) + ": dividend rate not in {0,p,M}");
        pf.gamma[q] = gam;
        pf.a[q] = a;
    }
    pf.provenance = std::stoull(meta.at("provenance").get<std::string>(), nullptr, 16);
    pf.flagged = meta.value("flagged_nodes", std::size_t{0});
    return pf;
}

nlohmann::json estimate_to_json(const MCEstimate& est, const SimConfig& cfg) {
    return {{"schema", "v1"},
            {"kind", "mc_estimate"},
            {"mean", est.mean},
            {"std_error", est.std_error},
            {"n_paths", est.n_paths},
            {"n_aborted", est.n_aborted},
            {"valid", est.valid},
            {"config_hash", hex64(est.config_hash)},
            {"dt", cfg.dt},
            {"seed", cfg.seed},
            {"start", {{"s", cfg.start.s}, {"x", cfg.start.x}, {"w", cfg.start.w}}}};
}

void write_paths(const std::vector<PathRecord>& recs, const std::filesystem::path& csv) {
    auto os = open_out(csv);
    os << "path,t,x,w,gamma,a,dividends\n";
    for (std::size_t n = 0; n < recs.size(); ++n)
        for (const auto& pt : recs[n].trajectory)
            os << n << ',' << format_double(pt.t) << ',' << format_double(pt.x) << ','
               << format_double(pt.w) << ',' << format_double(pt.gamma) << ',' << format_double(pt.a)
               << ',' << format_double(pt.dividends) << '\n';
}

}  // namespace sadiv
