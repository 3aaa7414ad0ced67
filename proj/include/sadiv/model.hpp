#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sadiv/rng.hpp"

namespace sadiv {

/// Economic constants of the surplus dynamics
///   dX = [p + (r + (mu - r) gamma) X - a] dt + sigma gamma X dB - dQ
/// and the objective E int e^{-c(t-s)} a_t dt up to ruin or the horizon T.
struct ModelParams {
    double p = 1.5;      ///< premium rate
    double r = 0.03;     ///< risk-free rate
    double mu = 0.08;    ///< stock drift, mu > r
    double sigma = 0.3;  ///< stock volatility
    double c = 0.05;     ///< discount rate
    double M = 2.0;      ///< maximal dividend rate, M >= p
    double T = 1.0;      ///< horizon

    /// Throws ConfigError naming the first violated constraint.
    void validate() const;

    /// Upper bound M (1 - e^{-cT}) / c on discounted dividends of any strategy.
    double dividend_cap() const;
};

/// Elapsed-time triple (s, x, w): calendar time, surplus, time since last claim.
struct State {
    double s = 0.0;
    double x = 0.0;
    double w = 0.0;

    bool in_physical_domain(double T) const;
    bool in_extended_domain(double T, double delta) const;
};

struct ExponentialWaiting {
    double rate;
};
struct ErlangWaiting {
    int shape;
    double rate;
};
struct TabulatedIntensity {
    std::vector<double> nodes;   ///< strictly increasing, nodes.front() == 0
    std::vector<double> values;  ///< lambda at nodes, all > 0
};

/// Inter-arrival law F of the renewal claim counter, described by its
/// intensity lambda(w) = f(w) / Fbar(w). Immutable after construction.
class WaitingLaw {
public:
    using Variant = std::variant<ExponentialWaiting, ErlangWaiting, TabulatedIntensity>;

    static WaitingLaw exponential(double rate);
    static WaitingLaw erlang(int shape, double rate);
    /// Piecewise-linear intensity; the table must start at 0.
    static WaitingLaw tabulated(std::vector<double> nodes, std::vector<double> values);

    const Variant& variant() const noexcept { return law_; }
    std::string describe() const;
    bool is_constant_intensity() const;

    /// lambda(w). Throws DomainError for w < 0 or w beyond a tabulated table.
    double intensity(double w) const;

    /// lambda(w) with the edge values continued outside the natural domain:
    /// lambda(0) for w < 0 and the last tabulated value past the table. Only
    /// the solver's collar uses this.
    double intensity_extended(double w) const;

    /// Largest intensity over [lo, hi] (extended sense).
    double sup_intensity(double lo, double hi) const;

    /// int_0^w lambda(u) du.
    double cumulative_hazard(double w) const;
    /// Fbar(t) = P(T_1 > t).
    double survival(double t) const;
    /// f(t) = lambda(t) Fbar(t).
    double density(double t) const;

    /// Fbar(w + t) / Fbar(w): survival of the residual waiting time at age w.
    double survival_delayed(double w, double t) const;

    /// Draw the time to the next claim given the current age w. Returns
    /// +infinity when the claim would fall past a tabulated table (no claim in
    /// the modelled window).
    double sample_first_waiting(double w, RngStream& rng) const;

    /// Same draw from a given uniform variate u in (0,1).
    double first_waiting_from_uniform(double w, double u) const;

    /// Renewal density m'(u) = sum_n f_n(u), the n-fold convolution series.
    double renewal_density(double u) const;

private:
    explicit WaitingLaw(Variant v);

    Variant law_;
    // Tabulated laws only: renewal density on a uniform grid.
    std::shared_ptr<const std::vector<double>> renewal_table_;
    double renewal_table_step_ = 0.0;
};

struct ExponentialClaim {
    double mean;
};
struct TabulatedCdf {
    std::vector<double> nodes;   ///< strictly increasing, nodes.front() >= 0
    std::vector<double> values;  ///< nondecreasing, front 0, back 1
};
/// All claims equal to `at`. Not continuous; exists for degenerate oracles.
struct PointMassClaim {
    double at;
};

/// Claim-size law G on [0, inf). Immutable after construction.
class ClaimLaw {
public:
    using Variant = std::variant<ExponentialClaim, TabulatedCdf, PointMassClaim>;

    static ClaimLaw exponential(double mean);
    static ClaimLaw tabulated(std::vector<double> nodes, std::vector<double> values);
    static ClaimLaw point_mass(double at);

    const Variant& variant() const noexcept { return law_; }
    std::string describe() const;

    /// G(u); zero for u < 0.
    double cdf(double u) const;
    /// int_a^b G(u) du for 0 <= a <= b.
    double cdf_integral(double a, double b) const;
    double mean() const;

    double sample(RngStream& rng) const;
    double sample_from_uniform(double u) const;

private:
    explicit ClaimLaw(Variant v) : law_(std::move(v)) {}
    Variant law_;
};

/// Density of sigma_{N_t}, the last claim epoch before t, on (0, t]:
/// Fbar(t - u) m'(u). Throws DomainError unless 0 < u <= t.
double sigma_nt_density(const WaitingLaw& law, double t, double u);

/// Atom of sigma_{N_t} at u = 0 (no claim by time t): Fbar(t).
double sigma_nt_atom(const WaitingLaw& law, double t);

struct IntegrabilityReport {
    double value = 0.0;
    std::optional<double> closed_bound;  ///< 2 lambda^g / (5 - g) T^{(5-g)/2}
    bool pass = false;                   ///< finite integral
};

/// Numeric value of int_0^T int_0^t t^{(1-g)/2} f_sigma(u)^g du dt for
/// 1 < g < 5. The closed bound is attached for exponential and Erlang laws.
IntegrabilityReport assumption62_check(const WaitingLaw& law, double gamma_prime, double T);

}  // namespace sadiv
