#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sadiv/policy.hpp"
#include "sadiv/sim.hpp"
#include "sadiv/solver.hpp"

namespace sadiv {

/// Doubles as text with 17 significant digits (round-trips exactly).
std::string format_double(double v);

/// CSV with columns s,x,w,v plus `<path>.json` holding the lattice and the
/// field hash. `extra` is merged into the sidecar.
void write_field(const ValueField& field, const std::filesystem::path& csv,
                 const nlohmann::json& extra = nlohmann::json::object());
ValueField read_field(const std::filesystem::path& csv);

/// CSV with columns s,x,w,gamma,a plus `<path>.json` metadata.
void write_policy(const PolicyField& pf, const std::filesystem::path& csv);
PolicyField read_policy(const std::filesystem::path& csv);

nlohmann::json estimate_to_json(const MCEstimate& est, const SimConfig& cfg);

/// One row per recorded point: path,t,x,w,gamma,a,dividends.
void write_paths(const std::vector<PathRecord>& recs, const std::filesystem::path& csv);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

nlohmann::json grid_to_json(const Grid& g);
Grid grid_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const ModelParams& p);
ModelParams params_from_json(const nlohmann::json& j);

}  // namespace sadiv
