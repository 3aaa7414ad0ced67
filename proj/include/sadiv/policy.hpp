#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "sadiv/solver.hpp"

namespace sadiv {

/// Feedback maps (gamma, a) stored on the nodes of a solved field.
struct PolicyField {
    Grid grid;
    std::vector<double> gamma;  ///< in [0, 1]
    std::vector<double> a;      ///< in {0, p, M}
    std::uint64_t provenance = 0;  ///< hash of the source ValueField
    std::size_t flagged = 0;       ///< nodes with non-finite derivatives, set to (0, 0)
    ModelParams params;
};

struct ExtractOptions {
    MaximizerTolerances tol{};
};

/// Applies maximize_hamiltonian at every node with x >= 0 using the solver's
/// derivative rules. Nodes with x < 0 get (0, 0).
PolicyField extract_policy(const ValueField& field, const ModelParams& params,
                           const WaitingLaw& waiting, const ClaimLaw& claims,
                           const ExtractOptions& options = {});

/// Tent-kernel average of gamma over `radius` cells in each direction,
/// re-clamped to [0,1]. The dividend map is left untouched.
PolicyField mollify_policy(const PolicyField& pf, int radius);

/// Largest |gamma difference| / spacing over neighbouring node pairs.
double gamma_lipschitz(const PolicyField& pf);

/// Any Markov feedback rule theta -> (gamma, a).
class ControlLaw {
public:
    virtual ~ControlLaw() = default;
    virtual ControlPair operator()(const State& theta) const = 0;
};

/// Interpolated PolicyField: multilinear gamma, nearest-node a, clamped to
/// the lattice.
class FeedbackPolicy : public ControlLaw {
public:
    explicit FeedbackPolicy(std::shared_ptr<const PolicyField> field);
    ControlPair operator()(const State& theta) const override;
    const PolicyField& field() const noexcept { return *pf_; }

private:
    std::shared_ptr<const PolicyField> pf_;
};

/// The same controls everywhere.
class ConstantPolicy : public ControlLaw {
public:
    explicit ConstantPolicy(ControlPair c) : c_(c) {}
    ControlPair operator()(const State&) const override { return c_; }

private:
    ControlPair c_;
};

struct ClosedLoop {
    double drift = 0.0;
    double vol = 0.0;
    double dividend = 0.0;
};

/// drift = p + (r + (mu - r) gamma) x - a, vol = sigma gamma x, dividend = a.
ClosedLoop closed_loop_coefficients(const ControlLaw& policy, const State& theta,
                                    const ModelParams& params);

}  // namespace sadiv
