#include "sadiv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <thread>

#include "sadiv/errors.hpp"
#include "sadiv/parallel.hpp"

namespace sadiv {

namespace {

// Quintic smoothstep and its antiderivative.
double smooth(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}
double smooth_integral(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 0.5 + (t - 1.0);
    const double t4 = t * t * t * t;
    return t4 * (2.5 + t * (-3.0 + t));
}

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
}

// Cell index and fraction for uniform nodes lo + m*h, m = 0..n-1.
std::pair<int, double> cell(double v, double lo, double h, int n) {
    if (n < 2) return {0, 0.0};
    double t = (v - lo) / h;
    t = std::clamp(t, 0.0, static_cast<double>(n - 1));
    int m = std::min(static_cast<int>(std::floor(t)), n - 2);
    return {m, t - m};
}

}  // namespace

// ---------------------------------------------------------------------------

Psi::Psi(const PsiSpec& spec, double T, double delta) : spec_(spec), T_(T), delta_(delta) {
    if (!(T > 0.0)) throw ConfigError("psi: horizon must be positive");
    if (!(delta >= 0.0 && delta < 1.0)) throw ConfigError("psi: delta must lie in [0, 1)");
    if (!(spec.k1 > 0.0)) throw ConfigError("psi: k1 must be positive");
    if (!(spec.slope_b > 1.0)) throw ConfigError("psi: slope_b must exceed 1");
    if (!(spec.strip > 0.0 && spec.rise > 0.0 && spec.fall > 0.0))
        throw ConfigError("psi: strip, rise and fall widths must be positive");
    if (spec.strip + spec.rise > 1.0)
        throw ConfigError("psi: strip + rise must not exceed 1 (Psi vanishes below x = -1)");
    if (!(spec.w_ramp > 0.0 && spec.w_ramp < 1.0)) throw ConfigError("psi: w_ramp must lie in (0, 1)");
    length_ = 0.5 * spec.rise + spec.strip + 0.5 * spec.fall;
    if (spec.k1 / length_ < spec.slope_b) {
        std::ostringstream os;
        os << "psi: k1 = " << spec.k1 << " cannot carry slope " << spec.slope_b
           << " across the profile; need k1 >= " << spec.slope_b * length_;
        throw ConfigError(os.str());
    }
}

double Psi::rho(double x) const {
    const double a0 = -spec_.strip - spec_.rise;
    double area;
    if (x <= a0) {
        area = 0.0;
    } else if (x <= -spec_.strip) {
        area = spec_.rise * smooth_integral((x - a0) / spec_.rise);
    } else if (x <= 0.0) {
        area = 0.5 * spec_.rise + (x + spec_.strip);
    } else {
        const double t = std::min(x / spec_.fall, 1.0);
        area = 0.5 * spec_.rise + spec_.strip + spec_.fall * (t - smooth_integral(t));
    }
    return area / length_;
}

double Psi::eta(double s) const {
    if (delta_ == 0.0) return s < T_ ? 1.0 : 0.0;
    return 1.0 - smooth((s - T_) / delta_);
}

double Psi::chi(double s, double w) const {
    const double lo = -1.0;
    const double hi = s + 1.0;
    if (w < lo || w > hi) return 0.0;
    return smooth((w - lo) / spec_.w_ramp) * smooth((hi - w) / spec_.w_ramp);
}

double Psi::operator()(double s, double x, double w) const {
    if (s > T_ + 1.0 || x < -1.0) return 0.0;
    return spec_.k1 * rho(x) * eta(s) * chi(s, w);
}

bool Psi::w_independent_on_grid() const { return delta_ <= 1.0 - spec_.w_ramp; }

// ---------------------------------------------------------------------------

Grid::Grid(double T, double delta, double eps_n, double x_max, int n_s, int n_x, int n_w)
    : T_(T), delta_(delta), eps_n_(eps_n), x_max_(x_max), n_s_(n_s), n_x_(n_x), n_w_(n_w) {
    if (!(T > 0.0)) throw ConfigError("grid: T must be positive");
    if (!(delta >= 0.0)) throw ConfigError("grid: delta must be nonnegative");
    if (!(eps_n >= 0.0)) throw ConfigError("grid: eps_n must be nonnegative");
    if (!(x_max > 0.0)) throw ConfigError("grid: x_max must be positive");
    if (n_s < 2 || n_x < 3 || n_w < 2) throw ConfigError("grid: need n_s >= 2, n_x >= 3, n_w >= 2");
    ds_ = (T + delta) / (n_s - 1);
    dw_ = (T + 2.0 * delta) / (n_w - 1);
    xs_.resize(static_cast<std::size_t>(n_x));
    if (delta > 0.0) {
        dx_ = x_max / (n_x - 2);
        xs_[0] = -delta;
        for (int i = 1; i < n_x; ++i) xs_[static_cast<std::size_t>(i)] = (i - 1) * dx_;
    } else {
        dx_ = x_max / (n_x - 1);
        for (int i = 0; i < n_x; ++i) xs_[static_cast<std::size_t>(i)] = i * dx_;
    }
    xs_.back() = x_max;
}

Grid Grid::make(const ModelParams& params, const GridSpec& spec, double delta, double eps_n,
                double x_query_max, double claim_mean) {
    double x_max = spec.x_max;
    if (x_max <= 0.0)
        x_max = x_query_max + 5.0 * claim_mean + (params.p + params.mu * x_query_max) * params.T;
    return Grid(params.T, delta, eps_n, x_max, spec.n_s, spec.n_x, spec.n_w);
}

int Grid::x_cell(double x) const {
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const int i = static_cast<int>(it - xs_.begin()) - 1;
    return std::clamp(i, 0, n_x_ - 2);
}

bool Grid::in_physical(int k, int i, int j) const {
    const double tol = 1e-12;
    const double sk = s(k);
    const double wj = w(j);
    return sk <= T_ + tol && x(i) >= -tol && wj >= -tol && wj <= sk + tol;
}

// ---------------------------------------------------------------------------

ValueField::ValueField(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw ConfigError("value field: size does not match grid");
}

NodeClass ValueField::classify(int k, int i, int j) const {
    if (!grid_.in_domain(k, j)) return NodeClass::Outside;
    if (k == grid_.n_s() - 1 || i == 0) return NodeClass::Pinned;
    return NodeClass::Interior;
}

double ValueField::value_at(double s, double x, double w) const {
    const Grid& g = grid_;
    auto [k, fs] = cell(s, 0.0, g.ds(), g.n_s());
    const int i = g.x_cell(x);
    const double fx = std::clamp((x - g.x(i)) / (g.x(i + 1) - g.x(i)), 0.0, 1.0);
    auto [j, fw] = cell(w, -g.delta(), g.dw(), g.n_w());
    double acc = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                const double wt = (a ? fs : 1.0 - fs) * (b ? fx : 1.0 - fx) * (c ? fw : 1.0 - fw);
                if (wt == 0.0) continue;
                acc += wt * at(k + a, i + b, j + c);
            }
    return acc;
}

std::uint64_t ValueField::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    const int shape[3] = {grid_.n_s(), grid_.n_x(), grid_.n_w()};
    const double geom[4] = {grid_.T(), grid_.delta(), grid_.eps_n(), grid_.x_max()};
    fnv_bytes(h, shape, sizeof shape);
    fnv_bytes(h, geom, sizeof geom);
    fnv_bytes(h, values_.data(), values_.size() * sizeof(double));
    return h;
}

ClaimQuadrature::ClaimQuadrature(const Grid& grid, const ClaimLaw& claims) {
    const auto y = grid.x_nodes();
    rows_.reserve(y.size());
    for (double x : y) rows_.push_back(claim_weights(y, x, claims));
}

DerivBundle extract_derivatives(const ValueField& field, const ClaimQuadrature& quad, int k, int i,
                                int j) {
    const Grid& g = field.grid();
    const int nx = g.n_x();
    const int nw = g.n_w();
    DerivBundle d;
    d.v = field.at(k, i, j);

    const int ic = std::clamp(i, 1, nx - 2);
    const double hm = g.x(ic) - g.x(ic - 1);
    const double hp = g.x(ic + 1) - g.x(ic);
    const double dm = (field.at(k, ic, j) - field.at(k, ic - 1, j)) / hm;
    const double dp = (field.at(k, ic + 1, j) - field.at(k, ic, j)) / hp;
    if (i == 0)
        d.v_x = (field.at(k, 1, j) - d.v) / (g.x(1) - g.x(0));
    else if (i == nx - 1)
        d.v_x = (d.v - field.at(k, nx - 2, j)) / (g.x(nx - 1) - g.x(nx - 2));
    else
        d.v_x = (hm * dp + hp * dm) / (hm + hp);
    d.v_xx = std::max(2.0 * (dp - dm) / (hm + hp), -1e8);

    if (nw < 3) {
        d.v_w = (field.at(k, i, 1) - field.at(k, i, 0)) / g.dw();
        d.v_ww = 0.0;
    } else {
        int jc = std::clamp(j, 1, nw - 2);
        if (j == 0)
            d.v_w = (field.at(k, i, 1) - d.v) / g.dw();
        else if (j == nw - 1)
            d.v_w = (d.v - field.at(k, i, nw - 2)) / g.dw();
        else
            d.v_w = (field.at(k, i, j + 1) - field.at(k, i, j - 1)) / (2.0 * g.dw());
        d.v_ww = (field.at(k, i, jc + 1) - 2.0 * field.at(k, i, jc) + field.at(k, i, jc - 1)) /
                 (g.dw() * g.dw());
    }

    const auto& row = quad.row(i);
    double acc = 0.0;
    for (int m = 0; m < nx; ++m) acc += row[static_cast<std::size_t>(m)] * field.at(k, m, 0);
    d.i_delta = acc - d.v;
    return d;
}

// ---------------------------------------------------------------------------

PsiReport validate_psi(const Psi& psi, const ModelParams& params, const WaitingLaw& waiting,
                       const ClaimLaw& claims, const Grid& grid, double k2) {
    if (!(k2 > 0.0 && k2 < params.M)) throw ConfigError("validate_psi: k2 must lie in (0, M)");
    const double delta = grid.delta();
    const double eps = grid.eps_n();
    const double ht = 1e-5;
    const double hx = 1e-4;
    PsiReport rep;
    rep.min_margin = std::numeric_limits<double>::infinity();

    for (int i = 0; i < grid.n_x(); ++i) {
        const double x = grid.x(i);
        // Fine surplus lattice for the claim integral of the w = -delta slice.
        const int n_fine = std::clamp(static_cast<int>(std::ceil((x + delta) / 1e-3)) + 1, 2, 20001);
        std::vector<double> ys(static_cast<std::size_t>(n_fine));
        for (int m = 0; m < n_fine; ++m) ys[static_cast<std::size_t>(m)] = -delta + (x + delta) * m / (n_fine - 1);
        std::vector<double> wts;
        if (x + delta > 0.0) wts = claim_weights(ys, x, claims);
        for (int k = 1; k < grid.n_s(); ++k) {
            const double s = grid.s(k);
            double post = 0.0;
            for (std::size_t m = 0; m < wts.size(); ++m) post += wts[m] * psi(s, ys[m], -delta);
            for (int j = 0; j < grid.n_w(); ++j) {
                if (!grid.in_domain(k, j)) continue;
                const double w = grid.w(j);
                DerivBundle d;
                d.v = psi(s, x, w);
                d.v_x = (psi(s, x + hx, w) - psi(s, x - hx, w)) / (2.0 * hx);
                d.v_xx = (psi(s, x + hx, w) - 2.0 * d.v + psi(s, x - hx, w)) / (hx * hx);
                d.v_w = (psi(s, x, w + hx) - psi(s, x, w - hx)) / (2.0 * hx);
                d.v_ww = (psi(s, x, w + hx) - 2.0 * d.v + psi(s, x, w - hx)) / (hx * hx);
                d.i_delta = post - d.v;
                const double psi_t = (psi(s + ht, x, w) - psi(s - ht, x, w)) / (2.0 * ht);
                const State theta{s, x, w};
                const double lam = waiting.intensity_extended(w);
                const double res =
                    psi_t + hamiltonian_n(theta, d, ControlPair{0.0, params.M}, params, lam, eps);
                const double margin = res - (params.M - k2);
                ++rep.nodes_checked;
                if (margin < rep.min_margin) {
                    rep.min_margin = margin;
                    rep.worst = theta;
                }
            }
        }
    }
    rep.pass = rep.nodes_checked > 0 && rep.min_margin >= 0.0;

    const double b = psi.spec().slope_b;
    const double strip = psi.spec().strip;
    const double hs = 1e-6;
    rep.min_strip_slope = std::numeric_limits<double>::infinity();
    for (int k = 1; k < grid.n_s(); ++k) {
        const double s = grid.s(k);
        if (s > params.T + 1e-12) continue;
        for (int q = 0; q <= 20; ++q) {
            const double x = -strip + strip * q / 20.0;
            for (double w : {0.0, 0.5 * s, s}) {
                const double slope = (psi(s, x + hs, w) - psi(s, x - hs, w)) / (2.0 * hs);
                rep.min_strip_slope = std::min(rep.min_strip_slope, slope);
            }
        }
    }
    rep.slope_pass = rep.min_strip_slope >= b;
    return rep;
}

}  // namespace sadiv

// ---------------------------------------------------------------------------

namespace sadiv {

double cfl_step(const Grid& grid, const ModelParams& params, const WaitingLaw& waiting,
                const std::optional<ControlPair>& forced) {
    const double eps = grid.eps_n();
    const double lam = waiting.sup_intensity(-grid.delta(), params.T + 2.0 * grid.delta());
    const double dw2 = grid.dw() * grid.dw();
    const double s2 = params.sigma * params.sigma;
    double worst = 0.0;
    for (int i = 0; i < grid.n_x(); ++i) {
        const double x = grid.x(i);
        double gmax = 1.0;
        double bmax = 0.0;
        if (forced) {
            gmax = forced->gamma;
            bmax = std::abs(params.p + (params.r + (params.mu - params.r) * forced->gamma) * x - forced->a);
        } else {
            for (double g : {0.0, 1.0})
                for (double a : {0.0, params.M})
                    bmax = std::max(bmax, std::abs(params.p + (params.r + (params.mu - params.r) * g) * x - a));
        }
        // Diagonal weight of the three-point stencil on the local spacings.
        const double hm = i > 0 ? x - grid.x(i - 1) : grid.x(1) - x;
        const double hp = i < grid.n_x() - 1 ? grid.x(i + 1) - x : hm;
        const double rate = (s2 * gmax * gmax * x * x + eps) / (hm * hp) + eps / dw2 +
                            bmax / std::min(hm, hp) + 1.0 / grid.dw() + lam + params.c;
        worst = std::max(worst, rate);
    }
    return 1.0 / worst;
}

ValueField solve_backward(const Grid& g, const Psi& psi, const ModelParams& params,
                          const WaitingLaw& waiting, const ClaimLaw& claims,
                          const SchemeOptions& options) {
    params.validate();
    const int ns = g.n_s();
    const int nx = g.n_x();
    const int nw = g.n_w();
    const double dt_max = cfl_step(g, params, waiting, options.forced_control);

    int n_sub;
    if (options.substeps > 0) {
        n_sub = options.substeps;
        if (g.ds() / n_sub > dt_max * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "solve_backward: step " << g.ds() / n_sub << " violates the CFL bound " << dt_max;
            throw CflError(os.str(), dt_max);
        }
    } else {
        if (!(options.cfl_safety > 0.0 && options.cfl_safety <= 1.0))
            throw ConfigError("solve_backward: cfl_safety must lie in (0, 1]");
        n_sub = std::max(1, static_cast<int>(std::ceil(g.ds() / (options.cfl_safety * dt_max))));
    }
    const double h = g.ds() / n_sub;

    const ClaimQuadrature quad(g, claims);
    std::vector<double> lam(static_cast<std::size_t>(nw));
    for (int j = 0; j < nw; ++j) lam[static_cast<std::size_t>(j)] = waiting.intensity_extended(g.w(j));

    const double dw = g.dw();
    const double eps = g.eps_n();
    const double s2 = params.sigma * params.sigma;
    const double excess = params.mu - params.r;

    std::vector<double> out(g.size());
    std::vector<double> cur(static_cast<std::size_t>(nx) * nw);
    std::vector<double> next(cur.size());
    auto at = [nw](std::vector<double>& v, int i, int j) -> double& {
        return v[static_cast<std::size_t>(i) * nw + j];
    };

    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < nw; ++j) at(cur, i, j) = psi(g.s(ns - 1), g.x(i), g.w(j));
    std::copy(cur.begin(), cur.end(), out.begin() + static_cast<std::ptrdiff_t>(g.index(ns - 1, 0, 0)));

    const double a_cand[3] = {0.0, params.p, params.M};

    for (int k = ns - 2; k >= 0; --k) {
        for (int sub = 0; sub < n_sub; ++sub) {
            const double t_new = sub == n_sub - 1 ? g.s(k) : g.s(k + 1) - (sub + 1) * h;
            parallel_for(nx, options.threads, [&](int i) {
                const double x = g.x(i);
                if (i == 0) {
                    for (int j = 0; j < nw; ++j) at(next, 0, j) = psi(t_new, x, g.w(j));
                    return;
                }
                const auto& row = quad.row(i);
                double post = 0.0;
                for (int m = 0; m <= i; ++m) post += row[static_cast<std::size_t>(m)] * at(cur, m, 0);
                for (int j = 0; j < nw; ++j) {
                    const double v = at(cur, i, j);
                    const double hm = x - g.x(i - 1);
                    const double dm = (v - at(cur, i - 1, j)) / hm;
                    double dp = dm;
                    double d2 = 0.0;
                    if (i < nx - 1) {
                        const double hp = g.x(i + 1) - x;
                        dp = (at(cur, i + 1, j) - v) / hp;
                        d2 = 2.0 * (dp - dm) / (hm + hp);
                    }
                    const double dwp = j < nw - 1 ? (at(cur, i, j + 1) - v) / dw
                                                  : (v - at(cur, i, j - 1)) / dw;
                    const double d2w = (j > 0 && j < nw - 1)
                                           ? (at(cur, i, j + 1) - 2.0 * v + at(cur, i, j - 1)) / (dw * dw)
                                           : 0.0;
                    const double base = 0.5 * eps * (d2 + d2w) + dwp +
                                        lam[static_cast<std::size_t>(j)] * (post - v) - params.c * v;

                    auto control_part = [&](double gam, double a) {
                        const double b = params.p + (params.r + excess * gam) * x - a;
                        return 0.5 * s2 * gam * gam * x * x * d2 + b * (b > 0.0 ? dp : dm) + a;
                    };
                    double best;
                    if (options.forced_control) {
                        best = control_part(options.forced_control->gamma, options.forced_control->a);
                    } else {
                        const double g_cand[4] = {0.0, 1.0, optimal_gamma(x, dp, d2, params, options.tol),
                                                  optimal_gamma(x, dm, d2, params, options.tol)};
                        best = -std::numeric_limits<double>::infinity();
                        for (double gam : g_cand)
                            for (double a : a_cand) best = std::max(best, control_part(gam, a));
                    }
                    const double nv = v + h * (base + best);
                    if (!std::isfinite(nv)) {
                        std::ostringstream os;
                        os << "solve_backward: non-finite value at s=" << t_new << " x=" << x
                           << " w=" << g.w(j);
                        throw NumericError(os.str());
                    }
                    at(next, i, j) = nv;
                }
            });
            cur.swap(next);
        }
        std::copy(cur.begin(), cur.end(), out.begin() + static_cast<std::ptrdiff_t>(g.index(k, 0, 0)));
    }
    return ValueField(g, std::move(out));
}

ConvergenceTable refine_study(const GridSpec& base, const std::vector<std::pair<double, double>>& schedule,
                              const PsiSpec& psi_spec, const ModelParams& params,
                              const WaitingLaw& waiting, const ClaimLaw& claims,
                              const SchemeOptions& scheme, const RefineOptions& options) {
    if (schedule.size() < 2) throw ConfigError("refine_study: need at least two levels");
    ConvergenceTable table;
    std::vector<ValueField> fields;
    for (std::size_t l = 0; l < schedule.size(); ++l) {
        GridSpec spec = base;
        if (options.halve_grid) {
            const int f = 1 << l;
            spec.n_s = (base.n_s - 1) * f + 1;
            spec.n_x = (base.n_x - 1) * f + 1;
            spec.n_w = (base.n_w - 1) * f + 1;
        }
        const auto [eps, delta] = schedule[l];
        Grid grid = Grid::make(params, spec, delta, eps, options.x_query_max, claims.mean());
        Psi psi(psi_spec, params.T, delta);
        fields.push_back(solve_backward(grid, psi, params, waiting, claims, scheme));
        table.levels.push_back(
            {eps, delta, fields.back().value_at(options.query.s, options.query.x, options.query.w)});
    }

    double x_cmp = options.compare_x_max;
    if (x_cmp <= 0.0) {
        x_cmp = std::numeric_limits<double>::infinity();
        for (const auto& f : fields) x_cmp = std::min(x_cmp, f.grid().x_max());
    }
    // Common lattice of D: s in [0,T], x in [0,x_cmp], w in [0,s].
    auto sample = [&](const ValueField& f) {
        std::vector<double> vals;
        for (int k = 0; k < base.n_s; ++k) {
            const double s = params.T * k / (base.n_s - 1);
            for (int i = 0; i < base.n_x; ++i) {
                const double x = x_cmp * i / (base.n_x - 1);
                for (int j = 0; j < base.n_w; ++j) vals.push_back(f.value_at(s, x, s * j / (base.n_w - 1)));
            }
        }
        return vals;
    };
    std::vector<double> prev = sample(fields.front());
    for (std::size_t l = 1; l < fields.size(); ++l) {
        std::vector<double> now = sample(fields[l]);
        double diff = 0.0;
        for (std::size_t q = 0; q < now.size(); ++q) diff = std::max(diff, std::abs(now[q] - prev[q]));
        table.sup_differences.push_back(diff);
        prev = std::move(now);
    }
    table.strictly_decreasing = true;
    for (std::size_t l = 1; l < table.sup_differences.size(); ++l)
        if (!(table.sup_differences[l] < table.sup_differences[l - 1])) table.strictly_decreasing = false;
    return table;
}

}  // namespace sadiv
