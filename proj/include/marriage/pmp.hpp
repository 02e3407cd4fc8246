#ifndef MARRIAGE_PMP_HPP
#define MARRIAGE_PMP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "hjb.hpp"
#include "model.hpp"
#include "simulate.hpp"

namespace marriage {

/// Open-loop optimal path (x, p, e) on a uniform time grid. For the stochastic solver `q` holds the
/// diffusion adjoint sigma v_xx along the path; it is empty for the deterministic solver.
struct OpenLoopSolution {
    std::vector<double> times;
    std::vector<double> x;
    std::vector<double> p;
    std::vector<double> e;
    std::vector<double> q;
    bool converged = false;
    /// Largest change of the co-state over the final sweep (deterministic) or |p_N - g'(x_N)| (stochastic).
    double residual = 0.0;
    std::size_t iterations = 0;

    double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
};

struct PmpOptions {
    double dt = 0.001;
    std::size_t max_iters = 2000;
    double tol = 1e-9;
    /// Relaxation weight of the co-state update; halved whenever the sweep stops contracting.
    double relaxation = 0.5;
    double min_relaxation = 1.0 / 1024.0;
};

namespace detail {

inline void forward_state(const ModelParams& p, double x0, double dt, const std::vector<double>& costate,
                          std::vector<double>& x, std::vector<double>& e) {
    const std::size_t n = costate.size();
    for (std::size_t k = 0; k < n; ++k) {
        e[k] = legendre_prime(p.a * costate[k]);
    }
    // Heun step with the effort taken at both ends of the interval.
    x[0] = x0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double f0 = drift(p, x[k], e[k]);
        const double f1 = drift(p, x[k] + dt * f0, e[k + 1]);
        x[k + 1] = x[k] + 0.5 * dt * (f0 + f1);
        if (!std::isfinite(x[k + 1])) {
            throw NumericalError("PMP forward sweep blew up at step " + std::to_string(k + 1));
        }
    }
}

// p' = p h'(x) - s'(x) integrated backward from p(T) = g'(x_T) by the trapezoid rule (linear in p, so exact solve).
inline void backward_costate(const ModelParams& p, double dt, const std::vector<double>& x,
                             std::vector<double>& costate) {
    const std::size_t n = x.size();
    costate[n - 1] = terminal_reward_prime(p, x[n - 1]);
    for (std::size_t k = n - 1; k-- > 0;) {
        const double hk = h_prime(p, x[k]);
        const double hk1 = h_prime(p, x[k + 1]);
        const double rhs = costate[k + 1] * (1.0 - 0.5 * dt * hk1) +
                           0.5 * dt * (well_being_prime(p, x[k + 1]) + well_being_prime(p, x[k]));
        costate[k] = rhs / (1.0 + 0.5 * dt * hk);
    }
}

}

/// Deterministic open-loop optimum by a relaxed forward-backward sweep:
/// x' = -h(x) + a max(0, a p) forward from x0, p' = p h'(x) - s'(x) backward from g'(x_T),
/// p <- (1 - w) p_old + w p_new until the co-state stops moving.
inline OpenLoopSolution solve_pmp_deterministic(const ModelParams& p, double x0, const PmpOptions& opt = {}) {
    p.validate();
    if (!(x0 > p.x_low + p.eps)) {
        throw ConfigError("initial state must exceed x_low + eps (x0 = " + std::to_string(x0) + ")");
    }
    if (!(opt.dt > 0.0)) {
        throw ConfigError("dt must be positive");
    }
    const auto steps = static_cast<std::size_t>(std::llround(p.T / opt.dt));
    if (steps == 0 || std::abs(static_cast<double>(steps) * opt.dt - p.T) > 1e-9 * p.T) {
        throw ConfigError("dt must divide the horizon T");
    }
    const std::size_t n = steps + 1;

    OpenLoopSolution sol;
    sol.times.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        sol.times[k] = p.T * static_cast<double>(k) / static_cast<double>(steps);
    }
    sol.x.assign(n, x0);
    sol.e.assign(n, 0.0);
    sol.p.assign(n, 0.0);
    std::vector<double> fresh(n);

    double w = opt.relaxation;
    double last_change = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < opt.max_iters; ++it) {
        sol.iterations = it + 1;
        detail::forward_state(p, x0, opt.dt, sol.p, sol.x, sol.e);
        detail::backward_costate(p, opt.dt, sol.x, fresh);
        double change = 0.0;
        double scale = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            change = std::max(change, std::abs(fresh[k] - sol.p[k]));
            scale = std::max(scale, std::abs(fresh[k]));
        }
        sol.residual = change;
        if (change <= opt.tol * scale) {
            sol.converged = true;
            sol.p.swap(fresh);
            break;
        }
        if (change > last_change && w > opt.min_relaxation) {
            w *= 0.5;
        }
        last_change = change;
        for (std::size_t k = 0; k < n; ++k) {
            sol.p[k] = (1.0 - w) * sol.p[k] + w * fresh[k];
        }
    }
    // Leave the returned path consistent with the returned co-state.
    detail::forward_state(p, x0, opt.dt, sol.p, sol.x, sol.e);
    return sol;
}

/// Stochastic open-loop path from the value-function representation p = v_x(t, x), q = sigma v_xx(t, x):
/// the state follows Euler-Maruyama with e = max(0, a p) read off the HJB solution `v`.
inline OpenLoopSolution solve_pmp_stochastic(const ModelParams& p, double x0, const ValueField& v, double dt,
                                             std::uint64_t seed) {
    p.validate();
    const Grid& grid = v.grid();
    if (!(dt > 0.0)) {
        throw ConfigError("dt must be positive");
    }
    const auto steps = static_cast<std::size_t>(std::llround(grid.horizon() / dt));
    if (steps == 0 || std::abs(static_cast<double>(steps) * dt - grid.horizon()) > 1e-9 * grid.horizon()) {
        throw ConfigError("dt must divide the value-field horizon");
    }

    Field grad(grid);
    Field curv(grid);
    for (std::size_t k = 0; k < grid.nt(); ++k) {
        const auto row = v.v.row(k);
        const auto g = value_gradient(row, grid.dx());
        std::copy(g.begin(), g.end(), grad.row(k).begin());
        auto c = curv.row(k);
        for (std::size_t i = 0; i < grid.nx(); ++i) {
            c[i] = detail::second_difference(row, i, grid.dx());
        }
    }

    OpenLoopSolution sol;
    const std::size_t n = steps + 1;
    sol.times.resize(n);
    sol.x.resize(n);
    sol.p.resize(n);
    sol.e.resize(n);
    sol.q.resize(n);
    std::mt19937_64 rng(path_seed(seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);

    double x = x0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = grid.horizon() * static_cast<double>(k) / static_cast<double>(steps);
        if (!grid.contains(x)) {
            throw NumericalError("grid escape at t = " + std::to_string(t) + ", x = " + std::to_string(x));
        }
        const double costate = k + 1 == n ? terminal_reward_prime(p, x) : grad.interpolate(t, x);
        sol.times[k] = t;
        sol.x[k] = x;
        sol.p[k] = costate;
        sol.e[k] = legendre_prime(p.a * costate);
        sol.q[k] = p.sigma * curv.interpolate(t, x);
        if (k + 1 < n) {
            const double xi = p.sigma > 0.0 ? normal(rng) : 0.0;
            x += drift(p, x, sol.e[k]) * dt + p.sigma * std::sqrt(dt) * xi;
        }
    }
    sol.converged = true;
    sol.residual = std::abs(sol.p.back() - terminal_reward_prime(p, sol.x.back()));
    sol.iterations = 1;
    return sol;
}

/// max over interior nodes with e > 0 of |(e_{k+1} - e_{k-1}) / 2dt - (c'(e) h'(x) - a s'(x)) / c''(e)|.
inline double effort_ode_residual(const OpenLoopSolution& sol, const ModelParams& p) {
    const std::size_t n = sol.e.size();
    if (n < 3) {
        return 0.0;
    }
    const double dt = sol.dt();
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (!(sol.e[k - 1] > 0.0 && sol.e[k] > 0.0 && sol.e[k + 1] > 0.0)) {
            continue;
        }
        const double rate = (sol.e[k + 1] - sol.e[k - 1]) / (2.0 * dt);
        const double rhs =
            (cost_prime(sol.e[k]) * h_prime(p, sol.x[k]) - p.a * well_being_prime(p, sol.x[k])) / cost_second(sol.e[k]);
        worst = std::max(worst, std::abs(rate - rhs));
    }
    return worst;
}

}

#endif
