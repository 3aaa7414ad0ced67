#include "sadiv/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "sadiv/errors.hpp"

namespace sadiv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Index i with nodes[i] <= v <= nodes[i+1]; v must lie inside the table.
std::size_t segment_of(const std::vector<double>& nodes, double v) {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), v);
    auto i = static_cast<std::size_t>(std::distance(nodes.begin(), it));
    if (i == 0) return 0;
    return std::min(i - 1, nodes.size() - 2);
}

double lerp_table(const std::vector<double>& nodes, const std::vector<double>& values, double v) {
    const std::size_t i = segment_of(nodes, v);
    const double t = (v - nodes[i]) / (nodes[i + 1] - nodes[i]);
    return values[i] + t * (values[i + 1] - values[i]);
}

void check_table(const std::vector<double>& nodes, const std::vector<double>& values,
                 const char* what) {
    if (nodes.size() < 2 || nodes.size() != values.size())
        throw ConfigError(std::string(what) + ": need at least two (node, value) pairs");
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (!(nodes[i] > nodes[i - 1]))
            throw ConfigError(std::string(what) + ": nodes must be strictly increasing");
    for (double v : values)
        if (!std::isfinite(v)) throw ConfigError(std::string(what) + ": non-finite value");
}

// Partial exponential sum sum_{i<k} z^i / i!.
double erlang_partial_sum(int k, double z) {
    double term = 1.0;
    double sum = 1.0;
    for (int i = 1; i < k; ++i) {
        term *= z / i;
        sum += term;
    }
    return sum;
}

// Renewal density of Erlang(k, rate): sum_n rate * Poisson(nk - 1; rate u).
double erlang_renewal_density(int k, double rate, double u) {
    const double z = rate * u;
    if (z <= 0.0) return k == 1 ? rate : 0.0;
    const double log_z = std::log(z);
    double sum = 0.0;
    for (int n = 1;; ++n) {
        const int m = n * k - 1;
        const double term = rate * std::exp(-z + m * log_z - std::lgamma(m + 1.0));
        sum += term;
        // Past the Poisson mode successive pmf ratios are <= z / (m + 1) < 1,
        // so the remaining series is bounded by a geometric tail.
        if (m + 1 > z) {
            const double ratio = z / (m + 1.0);
            const double tail = term * ratio / (1.0 - ratio);
            if (tail < 1e-10) break;
        }
        if (n > 100000) throw NumericError("erlang renewal series did not converge");
    }
    return sum;
}

}  // namespace

void ModelParams::validate() const {
    auto need = [](bool ok, const char* msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(std::isfinite(p) && p > 0.0, "model.p must be > 0");
    need(std::isfinite(r) && r > 0.0, "model.r must be > 0");
    need(std::isfinite(mu) && mu > r, "model.mu must exceed model.r");
    need(std::isfinite(sigma) && sigma > 0.0, "model.sigma must be > 0");
    need(std::isfinite(c) && c > 0.0, "model.c must be > 0");
    need(std::isfinite(T) && T > 0.0, "model.T must be > 0");
    need(std::isfinite(M) && M >= p, "model.M must satisfy M >= p");
}

double ModelParams::dividend_cap() const { return M * (1.0 - std::exp(-c * T)) / c; }

bool State::in_physical_domain(double T) const {
    return s >= 0.0 && s <= T && x >= 0.0 && w >= 0.0 && w <= s;
}

bool State::in_extended_domain(double T, double delta) const {
    return s > 0.0 && s <= T + delta && x >= -delta && w >= -delta && w <= s + delta;
}

// ---------------------------------------------------------------------------
// WaitingLaw

WaitingLaw::WaitingLaw(Variant v) : law_(std::move(v)) {}

WaitingLaw WaitingLaw::exponential(double rate) {
    if (!(std::isfinite(rate) && rate > 0.0))
        throw ConfigError("exponential waiting law needs rate > 0");
    return WaitingLaw(ExponentialWaiting{rate});
}

WaitingLaw WaitingLaw::erlang(int shape, double rate) {
    if (shape < 1) throw ConfigError("erlang waiting law needs shape >= 1");
    if (!(std::isfinite(rate) && rate > 0.0))
        throw ConfigError("erlang waiting law needs rate > 0");
    return WaitingLaw(ErlangWaiting{shape, rate});
}

WaitingLaw WaitingLaw::tabulated(std::vector<double> nodes, std::vector<double> values) {
    check_table(nodes, values, "tabulated intensity");
    if (nodes.front() != 0.0) throw ConfigError("tabulated intensity must start at w = 0");
    for (double v : values)
        if (!(v > 0.0)) throw ConfigError("tabulated intensity must be strictly positive");
    WaitingLaw law(TabulatedIntensity{std::move(nodes), std::move(values)});

    // Renewal density by the truncated convolution series sum_n f_n on a
    // uniform grid. Stop once the remaining mass bound
    // sum_{m>n} F_m(end) <= F_n(end) F(end) / (1 - F(end)) drops below 1e-10.
    const auto& tab = std::get<TabulatedIntensity>(law.law_);
    const std::size_t n = 2000;
    const double end = tab.nodes.back();
    const double h = end / static_cast<double>(n);
    std::vector<double> f(n + 1);
    for (std::size_t i = 0; i <= n; ++i) f[i] = law.density(static_cast<double>(i) * h);
    const double big_f = 1.0 - law.survival(end);
    std::vector<double> fn = f;
    std::vector<double> sum = f;
    auto mass = [h](const std::vector<double>& g) {
        double m = 0.5 * (g.front() + g.back());
        for (std::size_t i = 1; i + 1 < g.size(); ++i) m += g[i];
        return m * h;
    };
    for (int term = 2;; ++term) {
        const double tail_bound = mass(fn) * big_f / std::max(1e-300, 1.0 - big_f);
        if (tail_bound < 1e-10) break;
        if (term > 500) throw NumericError("tabulated renewal series did not converge");
        std::vector<double> next(n + 1, 0.0);
        for (std::size_t i = 1; i <= n; ++i) {
            double acc = 0.5 * (fn[0] * f[i] + fn[i] * f[0]);
            for (std::size_t j = 1; j < i; ++j) acc += fn[j] * f[i - j];
            next[i] = acc * h;
        }
        fn = std::move(next);
        for (std::size_t i = 0; i <= n; ++i) sum[i] += fn[i];
    }
    law.renewal_table_ = std::make_shared<const std::vector<double>>(std::move(sum));
    law.renewal_table_step_ = h;
    return law;
}

std::string WaitingLaw::describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(Overloaded{
                   [&](const ExponentialWaiting& e) { os << "exponential(rate=" << e.rate << ")"; },
                   [&](const ErlangWaiting& e) {
                       os << "erlang(shape=" << e.shape << ",rate=" << e.rate << ")";
                   },
                   [&](const TabulatedIntensity& t) {
                       os << "tabulated(";
                       for (std::size_t i = 0; i < t.nodes.size(); ++i)
                           os << (i ? ";" : "") << t.nodes[i] << ":" << t.values[i];
                       os << ")";
                   }},
               law_);
    return os.str();
}

bool WaitingLaw::is_constant_intensity() const {
    if (std::holds_alternative<ExponentialWaiting>(law_)) return true;
    if (const auto* e = std::get_if<ErlangWaiting>(&law_)) return e->shape == 1;
    const auto& t = std::get<TabulatedIntensity>(law_);
    return std::all_of(t.values.begin(), t.values.end(),
                       [&](double v) { return v == t.values.front(); });
}

double WaitingLaw::intensity(double w) const {
    if (!(w >= 0.0)) throw DomainError("intensity: elapsed time must be >= 0");
    return std::visit(
        Overloaded{[](const ExponentialWaiting& e) { return e.rate; },
                   [w](const ErlangWaiting& e) {
                       if (e.shape == 1) return e.rate;
                       const double z = e.rate * w;
                       // lambda^k w^{k-1} / (k-1)!  over  sum_{i<k} z^i / i!
                       const double num =
                           e.rate * std::exp((e.shape - 1) * std::log(z) - std::lgamma(e.shape));
                       return w == 0.0 ? 0.0 : num / erlang_partial_sum(e.shape, z);
                   },
                   [w](const TabulatedIntensity& t) {
                       if (w > t.nodes.back())
                           throw DomainError("intensity: elapsed time beyond tabulated domain");
                       return lerp_table(t.nodes, t.values, w);
                   }},
        law_);
}

double WaitingLaw::intensity_extended(double w) const {
    if (w < 0.0) return intensity(0.0);
    if (const auto* t = std::get_if<TabulatedIntensity>(&law_))
        if (w > t->nodes.back()) return t->values.back();
    return intensity(w);
}

double WaitingLaw::sup_intensity(double lo, double hi) const {
    if (const auto* t = std::get_if<TabulatedIntensity>(&law_)) {
        double best = std::max(intensity_extended(lo), intensity_extended(hi));
        for (std::size_t i = 0; i < t->nodes.size(); ++i)
            if (t->nodes[i] >= lo && t->nodes[i] <= hi) best = std::max(best, t->values[i]);
        return best;
    }
    // Exponential is constant; the Erlang intensity increases towards its rate.
    return intensity_extended(hi);
}

double WaitingLaw::cumulative_hazard(double w) const {
    if (!(w >= 0.0)) throw DomainError("cumulative hazard: elapsed time must be >= 0");
    return std::visit(
        Overloaded{[w](const ExponentialWaiting& e) { return e.rate * w; },
                   [w](const ErlangWaiting& e) {
                       const double z = e.rate * w;
                       return z - std::log(erlang_partial_sum(e.shape, z));
                   },
                   [w](const TabulatedIntensity& t) {
                       if (w > t.nodes.back())
                           throw DomainError("cumulative hazard: beyond tabulated domain");
                       double acc = 0.0;
                       for (std::size_t i = 0; i + 1 < t.nodes.size(); ++i) {
                           const double a = t.nodes[i];
                           if (w <= a) break;
                           const double b = std::min(w, t.nodes[i + 1]);
                           const double lb = lerp_table(t.nodes, t.values, b);
                           acc += 0.5 * (b - a) * (t.values[i] + lb);
                       }
                       return acc;
                   }},
        law_);
}

double WaitingLaw::survival(double t) const { return std::exp(-cumulative_hazard(t)); }

double WaitingLaw::density(double t) const {
    if (const auto* e = std::get_if<ErlangWaiting>(&law_)) {
        if (t < 0.0) throw DomainError("density: time must be >= 0");
        if (t == 0.0) return e->shape == 1 ? e->rate : 0.0;
        return e->rate * std::exp((e->shape - 1) * std::log(e->rate * t) - e->rate * t -
                                  std::lgamma(e->shape));
    }
    return intensity(t) * survival(t);
}

double WaitingLaw::survival_delayed(double w, double t) const {
    if (!(w >= 0.0) || !(t >= 0.0))
        throw DomainError("survival_delayed: need w >= 0 and t >= 0");
    if (t == 0.0) return 1.0;
    if (const auto* e = std::get_if<ExponentialWaiting>(&law_)) return std::exp(-e->rate * t);
    if (const auto* e = std::get_if<ErlangWaiting>(&law_)) {
        const double ratio = erlang_partial_sum(e->shape, e->rate * (w + t)) /
                             erlang_partial_sum(e->shape, e->rate * w);
        return std::exp(-e->rate * t) * ratio;
    }
    return std::exp(-(cumulative_hazard(w + t) - cumulative_hazard(w)));
}

double WaitingLaw::first_waiting_from_uniform(double w, double u) const {
    if (!(w >= 0.0)) throw DomainError("sample_first_waiting: w must be >= 0");
    const double target = -std::log(u);
    if (const auto* e = std::get_if<ExponentialWaiting>(&law_)) return target / e->rate;

    // Residual hazard H(w + t) - H(w) is increasing in t; invert by bisection.
    double end = kInf;
    if (const auto* t = std::get_if<TabulatedIntensity>(&law_)) {
        end = t->nodes.back() - w;
        if (end <= 0.0 || cumulative_hazard(t->nodes.back()) - cumulative_hazard(w) < target)
            return kInf;
    }
    const double h0 = cumulative_hazard(w);
    auto residual = [&](double t) { return cumulative_hazard(w + t) - h0 - target; };
    double lo = 0.0;
    double hi = std::min(end, 1.0);
    while (residual(hi) < 0.0) {
        lo = hi;
        hi = std::min(end, 2.0 * hi);
        if (hi > 1e12) throw NumericError("sample_first_waiting: could not bracket");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (residual(mid) < 0.0) lo = mid; else hi = mid;
        if (hi - lo <= 1e-14 * std::max(1.0, hi)) return 0.5 * (lo + hi);
    }
    throw NumericError("sample_first_waiting: bisection did not converge");
}

double WaitingLaw::sample_first_waiting(double w, RngStream& rng) const {
    return first_waiting_from_uniform(w, rng.uniform());
}

double WaitingLaw::renewal_density(double u) const {
    if (!(u >= 0.0)) throw DomainError("renewal_density: u must be >= 0");
    if (const auto* e = std::get_if<ExponentialWaiting>(&law_)) return e->rate;
    if (const auto* e = std::get_if<ErlangWaiting>(&law_))
        return erlang_renewal_density(e->shape, e->rate, u);
    const auto& table = *renewal_table_;
    const double pos = u / renewal_table_step_;
    if (pos > static_cast<double>(table.size() - 1) + 1e-9)
        throw DomainError("renewal_density: beyond tabulated domain");
    const auto i = std::min(static_cast<std::size_t>(pos), table.size() - 2);
    const double frac = pos - static_cast<double>(i);
    return table[i] + frac * (table[i + 1] - table[i]);
}

// ---------------------------------------------------------------------------
// ClaimLaw

ClaimLaw ClaimLaw::exponential(double mean) {
    if (!(std::isfinite(mean) && mean > 0.0))
        throw ConfigError("exponential claim law needs mean > 0");
    return ClaimLaw(ExponentialClaim{mean});
}

ClaimLaw ClaimLaw::tabulated(std::vector<double> nodes, std::vector<double> values) {
    check_table(nodes, values, "tabulated claim cdf");
    if (nodes.front() < 0.0) throw ConfigError("tabulated claim cdf: support must be in [0, inf)");
    if (values.front() != 0.0 || values.back() != 1.0)
        throw ConfigError("tabulated claim cdf must run from 0 to 1");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] < values[i - 1])
            throw ConfigError("tabulated claim cdf must be nondecreasing");
    return ClaimLaw(TabulatedCdf{std::move(nodes), std::move(values)});
}

ClaimLaw ClaimLaw::point_mass(double at) {
    if (!(std::isfinite(at) && at >= 0.0)) throw ConfigError("point-mass claim needs at >= 0");
    return ClaimLaw(PointMassClaim{at});
}

std::string ClaimLaw::describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(Overloaded{[&](const ExponentialClaim& e) { os << "exponential(mean=" << e.mean << ")"; },
                          [&](const TabulatedCdf& t) {
                              os << "tabulated(";
                              for (std::size_t i = 0; i < t.nodes.size(); ++i)
                                  os << (i ? ";" : "") << t.nodes[i] << ":" << t.values[i];
                              os << ")";
                          },
                          [&](const PointMassClaim& p) { os << "point_mass(at=" << p.at << ")"; }},
               law_);
    return os.str();
}

double ClaimLaw::cdf(double u) const {
    if (u < 0.0) return 0.0;
    return std::visit(Overloaded{[u](const ExponentialClaim& e) { return -std::expm1(-u / e.mean); },
                                 [u](const TabulatedCdf& t) {
                                     if (u <= t.nodes.front()) return 0.0;
                                     if (u >= t.nodes.back()) return 1.0;
                                     return lerp_table(t.nodes, t.values, u);
                                 },
                                 [u](const PointMassClaim& p) { return u >= p.at ? 1.0 : 0.0; }},
                      law_);
}

double ClaimLaw::cdf_integral(double a, double b) const {
    if (b <= a) return 0.0;
    a = std::max(a, 0.0);
    return std::visit(
        Overloaded{[&](const ExponentialClaim& e) {
                       return (b - a) - e.mean * (std::exp(-a / e.mean) - std::exp(-b / e.mean));
                   },
                   [&](const TabulatedCdf& t) {
                       // G is piecewise linear: integrate each overlapping piece exactly.
                       double acc = 0.0;
                       const double hi_end = t.nodes.back();
                       if (b > hi_end) acc += b - std::max(a, hi_end);
                       for (std::size_t i = 0; i + 1 < t.nodes.size(); ++i) {
                           const double lo = std::max(a, t.nodes[i]);
                           const double hi = std::min(b, t.nodes[i + 1]);
                           if (hi <= lo) continue;
                           acc += 0.5 * (hi - lo) * (cdf(lo) + cdf(hi));
                       }
                       return acc;
                   },
                   [&](const PointMassClaim& p) { return std::max(0.0, b - std::max(a, p.at)); }},
        law_);
}

double ClaimLaw::mean() const {
    return std::visit(Overloaded{[](const ExponentialClaim& e) { return e.mean; },
                                 [this](const TabulatedCdf& t) {
                                     return t.nodes.back() - cdf_integral(0.0, t.nodes.back());
                                 },
                                 [](const PointMassClaim& p) { return p.at; }},
                      law_);
}

double ClaimLaw::sample_from_uniform(double u) const {
    return std::visit(Overloaded{[u](const ExponentialClaim& e) { return -e.mean * std::log(u); },
                                 [u](const TabulatedCdf& t) {
                                     for (std::size_t i = 0; i + 1 < t.nodes.size(); ++i) {
                                         const double g0 = t.values[i];
                                         const double g1 = t.values[i + 1];
                                         if (u <= g1 && g1 > g0)
                                             return t.nodes[i] + (u - g0) / (g1 - g0) *
                                                                     (t.nodes[i + 1] - t.nodes[i]);
                                     }
                                     return t.nodes.back();
                                 },
                                 [](const PointMassClaim& p) { return p.at; }},
                      law_);
}

double ClaimLaw::sample(RngStream& rng) const {
    if (const auto* p = std::get_if<PointMassClaim>(&law_)) return p->at;
    return sample_from_uniform(rng.uniform());
}

// ---------------------------------------------------------------------------

double sigma_nt_density(const WaitingLaw& law, double t, double u) {
    if (!(u > 0.0 && u <= t)) throw DomainError("sigma_nt_density: need 0 < u <= t");
    return law.survival(t - u) * law.renewal_density(u);
}

double sigma_nt_atom(const WaitingLaw& law, double t) { return law.survival(t); }

IntegrabilityReport assumption62_check(const WaitingLaw& law, double gamma_prime, double T) {
    if (!(gamma_prime > 1.0 && gamma_prime < 5.0))
        throw DomainError("assumption62_check: exponent must satisfy 1 < g < 5");
    if (!(T >= 0.0)) throw DomainError("assumption62_check: horizon must be >= 0");

    IntegrabilityReport report;
    const double g = gamma_prime;
    std::visit(Overloaded{[&](const ExponentialWaiting& e) {
                              report.closed_bound = 2.0 * std::pow(e.rate, g) / (5.0 - g) *
                                                    std::pow(T, (5.0 - g) / 2.0);
                          },
                          [&](const ErlangWaiting& e) {
                              report.closed_bound = 2.0 * std::pow(e.rate, g) / (5.0 - g) *
                                                    std::pow(T, (5.0 - g) / 2.0);
                          },
                          [](const TabulatedIntensity&) {}},
               law.variant());
    if (T == 0.0) {
        report.pass = true;
        return report;
    }

    using boost::math::quadrature::gauss_kronrod;
    auto inner = [&](double t) {
        auto integrand = [&](double u) {
            if (u <= 0.0) u = std::numeric_limits<double>::min();
            return std::pow(sigma_nt_density(law, t, std::min(u, t)), g);
        };
        return gauss_kronrod<double, 31>::integrate(integrand, 0.0, t, 12, 1e-12);
    };
    // The weight t^{(1-g)/2} is singular at t = 0; the double-exponential
    // rule clusters nodes at the endpoint and never evaluates it there.
    boost::math::quadrature::tanh_sinh<double> outer;
    const double value = outer.integrate(
        [&](double t) { return std::pow(t, (1.0 - g) / 2.0) * inner(t); }, 0.0, T, 1e-10);

    report.value = value;
    report.pass = std::isfinite(value) && value < 1e12;
    return report;
}

}  // namespace sadiv
