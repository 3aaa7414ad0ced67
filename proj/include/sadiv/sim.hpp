#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sadiv/model.hpp"
#include "sadiv/policy.hpp"
#include "sadiv/rng.hpp"

namespace sadiv {

struct SimConfig {
    double dt = 1e-3;
    int n_paths = 20000;
    std::uint64_t seed = 1;
    bool record_paths = false;
    State start{0.0, 2.0, 0.0};
    int threads = 1;

    /// Throws ConfigError for dt <= 0, n_paths < 1 or a start outside D.
    void validate(double T) const;
    std::uint64_t hash() const;
};

struct PathPoint {
    double t, x, w, gamma, a, dividends;
};

struct PathRecord {
    std::optional<double> ruin_time;
    double discounted_dividends = 0.0;
    int n_claims = 0;
    bool aborted = false;  ///< non-finite surplus; excluded from estimates
    std::vector<PathPoint> trajectory;  ///< filled when record_paths is set
};

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n_paths = 0;    ///< paths that entered the estimate
    int n_aborted = 0;
    bool valid = true;  ///< false when more than 1% of paths aborted
    std::uint64_t config_hash = 0;
};

/// One closed-loop path from cfg.start up to min(ruin, T). Claim epochs are
/// exact; the diffusion is stepped by Euler-Maruyama with step <= dt. Uses
/// rng.split(0) for waiting times, split(1) for claim sizes, split(2) for
/// Brownian increments.
PathRecord simulate_path(const ControlLaw& policy, const ModelParams& params,
                         const WaitingLaw& waiting, const ClaimLaw& claims, const SimConfig& cfg,
                         const RngStream& rng);

/// Mean and standard error over cfg.n_paths paths; path k uses
/// RngStream(cfg.seed).split(k). Thread-count invariant.
MCEstimate estimate_J(const ControlLaw& policy, const ModelParams& params,
                      const WaitingLaw& waiting, const ClaimLaw& claims, const SimConfig& cfg,
                      std::vector<PathRecord>* records = nullptr);

}  // namespace sadiv
