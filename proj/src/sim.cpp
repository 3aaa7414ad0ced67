#include "sadiv/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sadiv/errors.hpp"
#include "sadiv/parallel.hpp"

namespace sadiv {

namespace {

struct Kahan {
    double sum = 0.0;
    double comp = 0.0;
    void add(double v) {
        const double y = v - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

}  // namespace

void SimConfig::validate(double T) const {
    if (!(dt > 0.0)) throw ConfigError("sim: dt must be positive");
    if (n_paths < 1) throw ConfigError("sim: n_paths must be at least 1");
    if (threads < 1) throw ConfigError("sim: threads must be at least 1");
    if (!(start.s >= 0.0 && start.s <= T && start.w >= 0.0 && start.w <= start.s))
        throw ConfigError("sim: start must satisfy 0 <= w <= s <= T");
}

std::uint64_t SimConfig::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mixin = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    const double d[4] = {dt, start.s, start.x, start.w};
    mixin(d, sizeof d);
    mixin(&n_paths, sizeof n_paths);
    mixin(&seed, sizeof seed);
    return h;
}

PathRecord simulate_path(const ControlLaw& policy, const ModelParams& params,
                         const WaitingLaw& waiting, const ClaimLaw& claims, const SimConfig& cfg,
                         const RngStream& rng) {
    RngStream waits = rng.split(0);
    RngStream sizes = rng.split(1);
    RngStream noise = rng.split(2);

    PathRecord rec;
    const double s0 = cfg.start.s;
    const double T = params.T;
    double t = s0;
    double x = cfg.start.x;
    double w = cfg.start.w;
    Kahan div;

    auto record = [&](double a, double gam) {
        if (cfg.record_paths) rec.trajectory.push_back({t, x, w, gam, a, div.sum});
    };

    if (x < 0.0) {
        rec.ruin_time = t;
        record(0.0, 0.0);
        return rec;
    }
    record(0.0, 0.0);

    while (t < T) {
        const double next_claim = t + waiting.sample_first_waiting(w, waits);
        const double stop = std::min(next_claim, T);
        while (t < stop) {
            const double h = std::min(cfg.dt, stop - t);
            const State theta{t, x, w};
            const ControlPair u = policy(theta);
            const double drift = params.p + (params.r + (params.mu - params.r) * u.gamma) * x - u.a;
            const double vol = params.sigma * u.gamma * x;
            const double t_next = (stop - t <= cfg.dt) ? stop : t + h;
            div.add(0.5 * u.a * (std::exp(-params.c * (t - s0)) + std::exp(-params.c * (t_next - s0))) * h);
            x += drift * h + vol * std::sqrt(h) * noise.normal();
            w += h;
            t = t_next;
            if (!std::isfinite(x)) {
                rec.aborted = true;
                rec.discounted_dividends = div.sum;
                return rec;
            }
            record(u.a, u.gamma);
            if (x < 0.0) {
                rec.ruin_time = t;
                rec.discounted_dividends = div.sum;
                return rec;
            }
        }
        if (next_claim <= T && t >= next_claim) {
            x -= claims.sample(sizes);
            w = 0.0;
            ++rec.n_claims;
            record(0.0, 0.0);
            if (x < 0.0) {
                rec.ruin_time = t;
                break;
            }
        }
    }
    rec.discounted_dividends = div.sum;
    return rec;
}

MCEstimate estimate_J(const ControlLaw& policy, const ModelParams& params,
                      const WaitingLaw& waiting, const ClaimLaw& claims, const SimConfig& cfg,
                      std::vector<PathRecord>* records) {
    params.validate();
    cfg.validate(params.T);
    const RngStream root(cfg.seed);
    std::vector<PathRecord> recs(static_cast<std::size_t>(cfg.n_paths));
    parallel_for(cfg.n_paths, cfg.threads, [&](int k) {
        recs[static_cast<std::size_t>(k)] =
            simulate_path(policy, params, waiting, claims, cfg, root.split(static_cast<std::uint64_t>(k)));
    });

    MCEstimate est;
    est.config_hash = cfg.hash();
    Kahan sum;
    for (const auto& r : recs) {
        if (r.aborted) {
            ++est.n_aborted;
            continue;
        }
        sum.add(r.discounted_dividends);
        ++est.n_paths;
    }
    est.valid = est.n_aborted <= 0.01 * cfg.n_paths && est.n_paths > 0;
    if (est.n_paths > 0) {
        est.mean = sum.sum / est.n_paths;
        Kahan sq;
        for (const auto& r : recs)
            if (!r.aborted) sq.add((r.discounted_dividends - est.mean) * (r.discounted_dividends - est.mean));
        est.std_error = est.n_paths > 1 ? std::sqrt(sq.sum / (est.n_paths - 1) / est.n_paths) : 0.0;
    }
    if (records) *records = std::move(recs);
    return est;
}

}  // namespace sadiv
