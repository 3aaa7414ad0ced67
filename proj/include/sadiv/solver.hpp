#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sadiv/model.hpp"
#include "sadiv/pide.hpp"

namespace sadiv {

// ---------------------------------------------------------------------------
// Boundary function

/// Shape of the boundary function Psi(s,x,w) = k1 rho(x) eta(s) chi(s,w).
///
/// rho rises from 0 to 1: smooth onset over `rise`, constant slope 1/L on the
/// strip [-strip, 0], then a smooth fall to zero slope over `fall`. L is the
/// total area under the slope profile, so Psi_x = k1/L on the strip. eta
/// switches the function off across the terminal collar [T, T + delta]; chi
/// cuts it off near w = -1 and w = s + 1.
struct PsiSpec {
    double k1 = 0.07;      ///< sup of Psi
    double slope_b = 1.05; ///< required lower bound of Psi_x on the strip (> 1)
    double strip = 0.01;   ///< strip width delta_0
    double rise = 0.01;    ///< onset width below the strip
    double fall = 0.1;     ///< saturation width above x = 0
    double w_ramp = 0.5;   ///< cut-off width of chi at w = -1 and w = s + 1
};

class Psi {
public:
    /// Throws ConfigError when the shape is infeasible, e.g. k1 too small to
    /// carry slope_b across the strip.
    Psi(const PsiSpec& spec, double T, double delta);

    double operator()(double s, double x, double w) const;

    const PsiSpec& spec() const noexcept { return spec_; }
    double delta() const noexcept { return delta_; }
    double horizon() const noexcept { return T_; }
    /// Slope of Psi in x on the strip where eta = chi = 1.
    double strip_slope() const noexcept { return spec_.k1 / length_; }
    /// True when Psi does not depend on w anywhere on [-delta, s + delta].
    bool w_independent_on_grid() const;

    double rho(double x) const;
    double eta(double s) const;
    double chi(double s, double w) const;

private:
    PsiSpec spec_;
    double T_;
    double delta_;
    double length_;  // integral of the slope profile
};

// ---------------------------------------------------------------------------
// Grid and field

struct GridSpec {
    int n_s = 40;        ///< stored time slices on [0, T + delta]
    int n_x = 60;        ///< surplus nodes on [-delta, x_max]
    int n_w = 40;        ///< age nodes on [-delta, T + 2 delta]
    double x_max = 0.0;  ///< 0 selects the automatic truncation
};

/// Tensor lattice covering the extended domain. Nodes with w > s + delta lie
/// outside it; the solver carries the scheme's continuation there.
///
/// Surplus nodes: x_0 = -delta, then n_x - 1 uniform nodes from 0 to x_max
/// (uniform from 0 when delta = 0), so x = 0 is always a node.
class Grid {
public:
    Grid(double T, double delta, double eps_n, double x_max, int n_s, int n_x, int n_w);

    /// x_max = x_query + 5 E[U] + (p + mu x_query) T unless spec.x_max > 0.
    static Grid make(const ModelParams& params, const GridSpec& spec, double delta, double eps_n,
                     double x_query_max, double claim_mean);

    double T() const noexcept { return T_; }
    double delta() const noexcept { return delta_; }
    double eps_n() const noexcept { return eps_n_; }
    double x_max() const noexcept { return x_max_; }
    int n_s() const noexcept { return n_s_; }
    int n_x() const noexcept { return n_x_; }
    int n_w() const noexcept { return n_w_; }
    double ds() const noexcept { return ds_; }
    /// Uniform surplus spacing above x = 0.
    double dx() const noexcept { return dx_; }
    double dw() const noexcept { return dw_; }

    double s(int k) const { return k == n_s_ - 1 ? T_ + delta_ : k * ds_; }
    double x(int i) const { return xs_[static_cast<std::size_t>(i)]; }
    double w(int j) const { return j == 0 ? -delta_ : -delta_ + j * dw_; }
    const std::vector<double>& x_nodes() const noexcept { return xs_; }
    /// Index i with x(i) <= x < x(i+1), clamped to [0, n_x - 2].
    int x_cell(double x) const;

    std::size_t size() const noexcept {
        return static_cast<std::size_t>(n_s_) * n_x_ * n_w_;
    }
    std::size_t index(int k, int i, int j) const noexcept {
        return (static_cast<std::size_t>(k) * n_x_ + i) * n_w_ + j;
    }
    bool in_domain(int k, int j) const { return w(j) <= s(k) + delta_ + 1e-12; }
    /// Node lies in the physical domain D (0 <= s <= T, x >= 0, 0 <= w <= s).
    bool in_physical(int k, int i, int j) const;

private:
    double T_, delta_, eps_n_, x_max_;
    int n_s_, n_x_, n_w_;
    double ds_, dx_, dw_;
    std::vector<double> xs_;
};

enum class NodeClass { Interior, Pinned, Outside };

/// Solved V^{n,delta} on a Grid. Read-only once returned by the solver.
class ValueField {
public:
    ValueField(Grid grid, std::vector<double> values);

    const Grid& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double at(int k, int i, int j) const { return values_[grid_.index(k, i, j)]; }

    /// Pinned: terminal slice or the x = -delta face. Outside: w > s + delta.
    NodeClass classify(int k, int i, int j) const;

    /// Trilinear interpolation, clamped to the lattice.
    double value_at(double s, double x, double w) const;

    /// FNV-1a over the raw values and grid shape.
    std::uint64_t hash() const;

private:
    Grid grid_;
    std::vector<double> values_;
};

/// Row i holds the claim weights for x_i against the w = -delta slice.
class ClaimQuadrature {
public:
    ClaimQuadrature(const Grid& grid, const ClaimLaw& claims);
    const std::vector<double>& row(int i) const { return rows_[static_cast<std::size_t>(i)]; }

private:
    std::vector<std::vector<double>> rows_;
};

/// Derivatives at a stored node: central differences inside, one-sided at the
/// lattice edges, v_xx floored at -1e8. i_delta uses the same slab.
DerivBundle extract_derivatives(const ValueField& field, const ClaimQuadrature& quad, int k, int i,
                                int j);

// ---------------------------------------------------------------------------
// Validation of Psi

struct PsiReport {
    double min_margin = 0.0;  ///< min over nodes of residual - (M - k2)
    State worst;
    std::size_t nodes_checked = 0;
    bool pass = false;
    double min_strip_slope = 0.0;  ///< smallest finite-difference Psi_x on the strip
    bool slope_pass = false;
};

/// Evaluates Psi_t + H^n(theta, Psi, ..., gamma = 0, a = M) at every in-domain
/// grid node with s > 0 and compares it with M - k2. Also probes Psi_x on the
/// strip [-strip, 0] for s in (0, T], w in [0, s].
PsiReport validate_psi(const Psi& psi, const ModelParams& params, const WaitingLaw& waiting,
                       const ClaimLaw& claims, const Grid& grid, double k2);

// ---------------------------------------------------------------------------
// Backward solve

struct SchemeOptions {
    int substeps = 0;             ///< explicit steps per stored slice; 0 = smallest CFL-safe count
    double cfl_safety = 0.9;      ///< fraction of the CFL bound used in auto mode
    int threads = 1;
    MaximizerTolerances tol{};
    std::optional<ControlPair> forced_control;  ///< skip the sup (degenerate oracles)
};

/// Largest stable explicit step for the lattice.
double cfl_step(const Grid& grid, const ModelParams& params, const WaitingLaw& waiting,
                const std::optional<ControlPair>& forced = std::nullopt);

/// Explicit monotone backward march from s = T + delta. Throws CflError if a
/// fixed substep count is unstable and NumericError on NaN.
ValueField solve_backward(const Grid& grid, const Psi& psi, const ModelParams& params,
                          const WaitingLaw& waiting, const ClaimLaw& claims,
                          const SchemeOptions& options = {});

struct RefineLevel {
    double eps_n = 0.0;
    double delta = 0.0;
    double value_at_query = 0.0;
};

struct ConvergenceTable {
    std::vector<RefineLevel> levels;
    std::vector<double> sup_differences;  ///< between consecutive levels, over D
    bool strictly_decreasing = false;
};

struct RefineOptions {
    bool halve_grid = false;  ///< also double node counts per level
    double x_query_max = 2.0;
    State query{0.0, 2.0, 0.0};
    double compare_x_max = 0.0;  ///< 0 = compare on all of D within the lattice
};

/// Solve along an (eps_n, delta) schedule and report sup_D differences of
/// consecutive solutions on a common lattice of D.
ConvergenceTable refine_study(const GridSpec& base, const std::vector<std::pair<double, double>>& schedule,
                              const PsiSpec& psi_spec, const ModelParams& params,
                              const WaitingLaw& waiting, const ClaimLaw& claims,
                              const SchemeOptions& scheme, const RefineOptions& options = {});

}  // namespace sadiv
