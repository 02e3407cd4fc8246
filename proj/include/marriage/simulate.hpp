#ifndef MARRIAGE_SIMULATE_HPP
#define MARRIAGE_SIMULATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "policy.hpp"

namespace marriage {

// ---------------------------------------------------------------------------
// Steady states of the uncontrolled drift
// ---------------------------------------------------------------------------

enum class Stability { stable, unstable };

inline const char* to_string(Stability s) { return s == Stability::stable ? "stable" : "unstable"; }

struct SteadyState {
    double x = 0.0;
    Stability stability = Stability::stable;
    /// d/dx of the drift -h at the root; positive means repelling.
    double slope = 0.0;
};

struct SteadyStateReport {
    std::vector<SteadyState> roots;
};

/// Zeros of -h on [x_lo, x_hi] by a uniform sign scan followed by bisection down to root_tol.
inline SteadyStateReport find_steady_states(const ModelParams& p, double x_lo = -10.0, double x_hi = 10.0,
                                            double root_tol = 1e-10, std::size_t scan_points = 4001) {
    if (!(x_lo < x_hi) || !(x_lo <= 0.0 && x_hi >= 0.0)) {
        throw ConfigError("steady-state range must be nonempty and contain 0");
    }
    if (!(root_tol > 0.0)) {
        throw ConfigError("root_tol must be positive");
    }
    if (scan_points < 3) {
        throw ConfigError("scan_points must be at least 3");
    }
    auto f = [&](double x) { return -h_eval(p, x); };
    auto node = [&](std::size_t k) {
        return x_lo + (x_hi - x_lo) * static_cast<double>(k) / static_cast<double>(scan_points - 1);
    };

    SteadyStateReport report;
    auto push = [&](double x) {
        const double slope = -h_prime(p, x);
        report.roots.push_back({x, slope > 0.0 ? Stability::unstable : Stability::stable, slope});
    };

    double x_prev = node(0);
    double f_prev = f(x_prev);
    if (f_prev == 0.0) {
        push(x_prev);
    }
    for (std::size_t k = 1; k < scan_points; ++k) {
        const double x_cur = node(k);
        const double f_cur = f(x_cur);
        if (f_cur == 0.0) {
            push(x_cur);
        } else if (f_prev != 0.0 && (f_prev < 0.0) != (f_cur < 0.0)) {
            double lo = x_prev;
            double hi = x_cur;
            double f_lo = f_prev;
            for (int it = 0; it < 200 && hi - lo > root_tol; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double f_mid = f(mid);
                if (f_mid == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if ((f_mid < 0.0) == (f_lo < 0.0)) {
                    lo = mid;
                    f_lo = f_mid;
                } else {
                    hi = mid;
                }
            }
            push(0.5 * (lo + hi));
        }
        x_prev = x_cur;
        f_prev = f_cur;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Ensembles of feeling-state paths
// ---------------------------------------------------------------------------

struct ZeroEffort {};
struct ConstantEffort {
    double e = 0.0;
};
/// Open-loop effort given per time step (index k of the march).
struct EffortSchedule {
    std::vector<double> e;
};
/// Feedback effort read from a policy by bilinear interpolation at (t_k, x_k).
struct PolicyEffort {
    const Policy* policy = nullptr;
};

using EffortSource = std::variant<ZeroEffort, ConstantEffort, EffortSchedule, PolicyEffort>;

struct SimulationOptions {
    double dt = 0.01;
    std::size_t n_steps = 1000;
    std::uint64_t seed = 0;
    /// Freeze a path at the first step with x <= x_low - eps.
    bool stopping = false;
    /// Keep every record_stride-th step (the last step is always kept).
    std::size_t record_stride = 1;
    /// Frozen mean-field shift h2 per step (size n_steps + 1), empty for none.
    std::vector<double> mf_shift_path;
};

struct TrajectoryEnsemble {
    std::vector<double> times;
    /// states[path][record]
    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> efforts;
    std::vector<std::uint64_t> seeds;
    std::vector<std::optional<double>> stop_times;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}

/// Seed of the independent stream for path `index` of an ensemble driven by `master`.
inline std::uint64_t path_seed(std::uint64_t master, std::size_t index) {
    return detail::splitmix64(detail::splitmix64(master) ^ (0xd1b54a32d192ed03ULL * (index + 1)));
}

/// Euler (sigma = 0) or Euler-Maruyama integration of each initial state; deterministic given the seed.
inline TrajectoryEnsemble simulate_ensemble(const ModelParams& p, std::span<const double> x0s,
                                            const EffortSource& source, const SimulationOptions& opt) {
    if (!(opt.dt > 0.0)) {
        throw ConfigError("dt must be positive");
    }
    if (opt.record_stride == 0) {
        throw ConfigError("record_stride must be positive");
    }
    if (!opt.mf_shift_path.empty() && opt.mf_shift_path.size() < opt.n_steps + 1) {
        throw ConfigError("mean-field shift path shorter than the simulation");
    }
    if (const auto* c = std::get_if<ConstantEffort>(&source); c && !(c->e >= 0.0)) {
        throw ConfigError("constant effort must be nonnegative");
    }
    if (const auto* s = std::get_if<EffortSchedule>(&source)) {
        if (s->e.size() < opt.n_steps + 1) {
            throw ConfigError("effort schedule shorter than the simulation");
        }
        for (double e : s->e) {
            if (!(e >= 0.0)) {
                throw ConfigError("effort schedule entries must be nonnegative");
            }
        }
    }
    if (const auto* pe = std::get_if<PolicyEffort>(&source); pe && pe->policy == nullptr) {
        throw ConfigError("policy effort source without a policy");
    }
    for (double x0 : x0s) {
        if (!std::isfinite(x0)) {
            throw ConfigError("initial states must be finite");
        }
    }

    auto effort_at = [&](std::size_t k, double t, double x) -> double {
        return std::visit(
            [&](const auto& s) -> double {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, ZeroEffort>) {
                    return 0.0;
                } else if constexpr (std::is_same_v<S, ConstantEffort>) {
                    return s.e;
                } else if constexpr (std::is_same_v<S, EffortSchedule>) {
                    return s.e[k];
                } else {
                    return std::max(0.0, (*s.policy)(t, x));
                }
            },
            source);
    };
    auto keep = [&](std::size_t k) { return k % opt.record_stride == 0 || k == opt.n_steps; };

    TrajectoryEnsemble out;
    for (std::size_t k = 0; k <= opt.n_steps; ++k) {
        if (keep(k)) {
            out.times.push_back(static_cast<double>(k) * opt.dt);
        }
    }
    const std::size_t n_paths = x0s.size();
    out.states.resize(n_paths);
    out.efforts.resize(n_paths);
    out.seeds.resize(n_paths);
    out.stop_times.resize(n_paths);

    const double sqrt_dt = std::sqrt(opt.dt);
    const double stop_level = p.divorce_level();
    for (std::size_t path = 0; path < n_paths; ++path) {
        const std::uint64_t seed = path_seed(opt.seed, path);
        out.seeds[path] = seed;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        auto& xs = out.states[path];
        auto& es = out.efforts[path];
        xs.reserve(out.times.size());
        es.reserve(out.times.size());

        double x = x0s[path];
        bool stopped = false;
        for (std::size_t k = 0;; ++k) {
            const double t = static_cast<double>(k) * opt.dt;
            if (opt.stopping && !stopped && x <= stop_level) {
                stopped = true;
                out.stop_times[path] = t;
            }
            const double e = stopped ? 0.0 : effort_at(k, t, x);
            if (keep(k)) {
                xs.push_back(x);
                es.push_back(e);
            }
            if (k == opt.n_steps) {
                break;
            }
            // The generator advances on every step so paths stay aligned with the seed regardless of stopping.
            const double xi = p.sigma > 0.0 ? normal(rng) : 0.0;
            if (stopped) {
                continue;
            }
            const double shift = opt.mf_shift_path.empty() ? 0.0 : opt.mf_shift_path[k];
            x += drift(p, x, e, shift) * opt.dt + p.sigma * sqrt_dt * xi;
            if (!std::isfinite(x) || std::abs(x) > 1e12) {
                throw NumericalError("blow-up on path " + std::to_string(path) + " at step " + std::to_string(k + 1));
            }
        }
    }
    return out;
}

/// g(x_N) + trapezoid sum of [s(x) - c(e)] dt along one path.
inline double payoff_along(const ModelParams& p, double dt, std::span<const double> xs, std::span<const double> es) {
    if (xs.size() != es.size()) {
        throw ConfigError("trajectory and effort lengths differ (" + std::to_string(xs.size()) + " vs " +
                          std::to_string(es.size()) + ")");
    }
    if (xs.empty()) {
        throw ConfigError("empty trajectory");
    }
    double running = 0.0;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        const double lhs = well_being(p, xs[k]) - cost(es[k]);
        const double rhs = well_being(p, xs[k + 1]) - cost(es[k + 1]);
        running += 0.5 * (lhs + rhs) * dt;
    }
    return terminal_reward(p, xs.back()) + running;
}

}

#endif
