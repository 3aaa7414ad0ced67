#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sadiv/model.hpp"
#include "sadiv/policy.hpp"
#include "sadiv/sim.hpp"
#include "sadiv/solver.hpp"

namespace sadiv {

struct SchemeConfig {
    double eps_n = 0.05;
    double delta = 0.05;
    SchemeOptions options;
    std::vector<std::pair<double, double>> schedule{{0.1, 0.1}, {0.05, 0.05}, {0.025, 0.025}};
};

struct VerifyConfig {
    std::vector<std::string> checks;  ///< empty = all
    double sandwich_slack = 0.1;
    double mc_tolerance = 0.1;          ///< scheme budget for the policy gap
    double heuristic_tolerance = 0.05;  ///< scheme budget for the heuristic sweep
    double k2 = 0.0;  ///< margin for the Psi residual; 0 selects M/2
    /// Empty selects the standard five: (0,M), (1,0), (0.5,p), (0,p), (1,M).
    std::vector<ControlPair> heuristics;
};

/// Everything one CLI run needs. Built only through load_config / parse_config.
struct RunConfig {
    ModelParams model;
    WaitingLaw waiting = WaitingLaw::exponential(1.0);
    ClaimLaw claims = ClaimLaw::exponential(1.0);
    GridSpec grid;
    PsiSpec psi;
    SchemeConfig scheme;
    ExtractOptions extract;
    int mollify_radius = 0;
    SimConfig sim;
    VerifyConfig verify;
    std::filesystem::path output_dir = "out";
};

/// Parses YAML text. Errors name `origin:line` and the offending key;
/// unknown keys are rejected. Throws ConfigError.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

}  // namespace sadiv
