#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sadiv/config.hpp"
#include "sadiv/policy.hpp"
#include "sadiv/sim.hpp"
#include "sadiv/solver.hpp"

namespace sadiv {

struct CheckEntry {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    double runtime_s = 0.0;
    std::string detail;
    nlohmann::json data = nlohmann::json::object();
};

struct VerificationReport {
    std::vector<CheckEntry> checks;
    bool pass = false;

    nlohmann::json to_json() const;
};

/// Names accepted in VerifyConfig::checks, in report order.
const std::vector<std::string>& check_names();

/// |J(policy) - V(start)| against 3 SE + tol.
CheckEntry mc_vs_pde(const ValueField& field, const ControlLaw& policy, const ModelParams& params,
                     const WaitingLaw& waiting, const ClaimLaw& claims, const SimConfig& sim, double tol);

/// J(pi) <= V(start) + 3 SE + tol for every heuristic; measured is the worst
/// J - V - 3 SE.
CheckEntry suboptimality_sweep(const ValueField& field, const std::vector<ControlPair>& heuristics,
                               const ModelParams& params, const WaitingLaw& waiting,
                               const ClaimLaw& claims, const SimConfig& sim, double tol);

/// The standard heuristics (0,M), (1,0), (0.5,p), (0,p), (1,M).
std::vector<ControlPair> default_heuristics(const ModelParams& params);

/// Sandwich bounds with Q1 = max{2+M, 2(p+mu T)}, Q2 = (c + sup lambda) T + 1.
double sandwich_q1(const ModelParams& params);
double sandwich_q2(const ModelParams& params, const WaitingLaw& waiting);
/// min(x, w, (s-w)/sqrt(2), T-s, s): distance to the boundary of D.
double boundary_distance(const State& theta, double T);

/// Monotonicity, sandwich, boundedness and (for constant intensity with a
/// w-independent Psi) w-invariance.
std::vector<CheckEntry> bounds_and_shape(const ValueField& field, const Psi& psi,
                                         const ModelParams& params, const WaitingLaw& waiting,
                                         double slack);

/// Integrability integrals for Exponential(1) and Erlang(2,1) with gamma' = 2,
/// and validate_psi on the configured lattice.
std::vector<CheckEntry> assumption_reports(const Psi& psi, const ModelParams& params,
                                           const WaitingLaw& waiting, const ClaimLaw& claims,
                                           const Grid& grid, double k2);

/// Runs the selected checks for a configuration. Baseline handling: when
/// `record` is set the regression values are written to `baseline`; otherwise
/// an existing baseline is compared and reported as its own entry.
VerificationReport run_verification(const RunConfig& cfg, const std::filesystem::path& baseline,
                                    bool record);

}  // namespace sadiv
