#ifndef MARRIAGE_HJB_HPP
#define MARRIAGE_HJB_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "policy.hpp"

namespace marriage {

struct HjbOptions {
    /// Relative margin added on top of the local bound |dH/dv_x| when sizing the numerical viscosity.
    double viscosity_margin = 0.1;
    std::size_t max_newton_iterations = 60;
    double newton_tolerance = 1e-11;
    /// Re-solves of one step allowed when the slice outgrows its viscosity or Newton stalls.
    std::size_t max_viscosity_updates = 8;
    /// Divorce ends the game: v = g(x) at nodes with x <= x_low - eps and no running payoff there.
    bool absorbing = false;
};

namespace detail {

inline MeanFieldShift shift_at(std::span<const MeanFieldShift> shifts, std::size_t k) {
    return shifts.empty() ? MeanFieldShift{} : shifts[k];
}

// Hamiltonian H(x, p) = (-h(x) + h2) p + s(x) + s2 + c~(a p) and its p-derivative.
struct Hamiltonian {
    const ModelParams& p;
    double x;
    double h_hat;
    double s_hat;

    double value(double grad) const { return -h_hat * grad + s_hat + legendre(p.a * grad); }
    double slope(double grad) const { return -h_hat + p.a * legendre_prime(p.a * grad); }
};

inline Hamiltonian hamiltonian_at(const ModelParams& p, double x, MeanFieldShift mf) {
    return Hamiltonian{p, x, h_eval(p, x) - mf.h2, well_being(p, x, mf.s2)};
}

// How a boundary node is closed. `upwind` drops the ghost node (linear extrapolation, one-sided gradient)
// and is used while the optimal drift points into the domain there; `reflect` is homogeneous Neumann.
enum class Closure { upwind, reflect };

struct Boundaries {
    Closure left = Closure::reflect;
    Closure right = Closure::reflect;
};

inline double gradient_at(std::span<const double> u, std::size_t i, double dx, Boundaries b) {
    const std::size_t n = u.size();
    if (i == 0) {
        return b.left == Closure::upwind ? (u[1] - u[0]) / dx : 0.0;
    }
    if (i + 1 == n) {
        return b.right == Closure::upwind ? (u[n - 1] - u[n - 2]) / dx : 0.0;
    }
    return (u[i + 1] - u[i - 1]) / (2.0 * dx);
}

inline double second_difference_at(std::span<const double> u, std::size_t i, double dx, Boundaries b) {
    const std::size_t n = u.size();
    if (i == 0) {
        return b.left == Closure::upwind ? 0.0 : 2.0 * (u[1] - u[0]) / (dx * dx);
    }
    if (i + 1 == n) {
        return b.right == Closure::upwind ? 0.0 : 2.0 * (u[n - 2] - u[n - 1]) / (dx * dx);
    }
    return (u[i - 1] - 2.0 * u[i] + u[i + 1]) / (dx * dx);
}

// Reflected second difference, used for v_xx read-outs.
inline double second_difference(std::span<const double> u, std::size_t i, double dx) {
    return second_difference_at(u, i, dx, Boundaries{});
}

}

/// Backward march of
///
///     v_t + H(x, v_x) + sigma^2/2 v_xx = 0,   v(T, .) = g,
///
/// fully implicit in time. The Hamiltonian uses a Lax-Friedrichs flux with a node-local viscosity
/// alpha_i >= |dH/dp| so every step is a monotone scheme; each step is a Newton solve on a tridiagonal
/// Jacobian. A boundary node where the optimal drift points into the domain needs no boundary data and
/// is updated with the one-sided (upwind) gradient; otherwise it is closed by homogeneous Neumann.
/// `shifts`, when nonempty, holds the mean-field terms (h2, s2) for every time index. With
/// `opt.absorbing` the nodes below the divorce level keep their terminal value g(x).
inline ValueField solve_hjb(const ModelParams& p, const Grid& grid, std::span<const MeanFieldShift> shifts = {},
                            const HjbOptions& opt = {}) {
    p.validate();
    if (!shifts.empty() && shifts.size() != grid.nt()) {
        throw ConfigError("mean-field path does not share the HJB time grid");
    }
    const std::size_t nx = grid.nx();
    const std::size_t nt = grid.nt();
    const double dx = grid.dx();
    const double dt = grid.dt();
    const double diffusion = 0.5 * p.sigma * p.sigma;

    ValueField out{Field(grid), 0.0, 0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < nx; ++i) {
        out.v(nt - 1, i) = terminal_reward(p, grid.x(i));
    }

    std::vector<double> u(nx), residual(nx), lower(nx), diag(nx), upper(nx), alpha(nx), slope(nx), delta(nx), trial(nx);
    std::vector<char> absorbed(nx, 0);
    if (opt.absorbing) {
        for (std::size_t i = 0; i < nx; ++i) {
            absorbed[i] = grid.x(i) <= p.divorce_level();
        }
    }
    std::vector<detail::Hamiltonian> ham;
    ham.reserve(nx);

    auto inflow = [&](std::span<const double> w, detail::Boundaries& b) {
        const detail::Boundaries upwind{detail::Closure::upwind, detail::Closure::upwind};
        b.left = ham.front().slope(detail::gradient_at(w, 0, dx, upwind)) > 0.0 ? detail::Closure::upwind
                                                                                : detail::Closure::reflect;
        b.right = ham.back().slope(detail::gradient_at(w, nx - 1, dx, upwind)) < 0.0 ? detail::Closure::upwind
                                                                                   : detail::Closure::reflect;
    };
    auto size_viscosity = [&](std::span<const double> w, detail::Boundaries b) {
        for (std::size_t i = 0; i < nx; ++i) {
            slope[i] = std::abs(ham[i].slope(detail::gradient_at(w, i, dx, b)));
        }
        for (std::size_t i = 0; i < nx; ++i) {
            double s = slope[i];
            if (i > 0) {
                s = std::max(s, slope[i - 1]);
            }
            if (i + 1 < nx) {
                s = std::max(s, slope[i + 1]);
            }
            alpha[i] = std::max(alpha[i], (1.0 + opt.viscosity_margin) * s);
        }
    };

    for (std::size_t k = nt - 1; k-- > 0;) {
        const MeanFieldShift mf = detail::shift_at(shifts, k);
        ham.clear();
        for (std::size_t i = 0; i < nx; ++i) {
            ham.push_back(detail::hamiltonian_at(p, grid.x(i), mf));
        }
        const auto next = out.v.row(k + 1);
        std::copy(next.begin(), next.end(), u.begin());
        detail::Boundaries bc;
        inflow(next, bc);
        std::fill(alpha.begin(), alpha.end(), 0.0);
        size_viscosity(next, bc);

        bool monotone = false;
        for (std::size_t update = 0; update <= opt.max_viscosity_updates && !monotone; ++update) {
            auto evaluate = [&](std::span<const double> w, double& scale) {
                scale = 1.0;
                double worst = 0.0;
                for (std::size_t i = 0; i < nx; ++i) {
                    if (absorbed[i]) {
                        residual[i] = w[i] - next[i];
                        diag[i] = 1.0;
                        lower[i] = 0.0;
                        upper[i] = 0.0;
                        continue;
                    }
                    const double grad = detail::gradient_at(w, i, dx, bc);
                    const double hp = ham[i].slope(grad);
                    const bool left_edge = i == 0;
                    const bool right_edge = i + 1 == nx;
                    const bool one_sided = (left_edge && bc.left == detail::Closure::upwind) ||
                                           (right_edge && bc.right == detail::Closure::upwind);
                    const double d = one_sided ? 0.0 : alpha[i] * dx / 2.0 + diffusion;
                    residual[i] =
                        w[i] - next[i] - dt * (ham[i].value(grad) + d * detail::second_difference_at(w, i, dx, bc));
                    const double c = dt * d / (dx * dx);
                    if (left_edge) {
                        diag[i] = one_sided ? 1.0 + dt * hp / dx : 1.0 + 2.0 * c;
                        upper[i] = one_sided ? -dt * hp / dx : -2.0 * c;
                    } else if (right_edge) {
                        diag[i] = one_sided ? 1.0 - dt * hp / dx : 1.0 + 2.0 * c;
                        lower[i] = one_sided ? dt * hp / dx : -2.0 * c;
                    } else {
                        const double a = dt * hp / (2.0 * dx);
                        diag[i] = 1.0 + 2.0 * c;
                        lower[i] = -(c - a);
                        upper[i] = -(c + a);
                    }
                    scale = std::max(scale, std::abs(w[i]));
                    worst = std::max(worst, std::abs(residual[i]));
                }
                return worst;
            };

            bool converged = false;
            double scale = 1.0;
            double worst = evaluate(u, scale);
            for (std::size_t it = 0; it < opt.max_newton_iterations; ++it) {
                ++out.newton_iterations;
                if (worst <= opt.newton_tolerance * scale) {
                    converged = true;
                    break;
                }
                solve_tridiagonal(lower, diag, upper, residual);
                std::copy(residual.begin(), residual.end(), delta.begin());
                std::copy(u.begin(), u.end(), trial.begin());
                // Backtrack on the max-norm residual; the Hamiltonian kink can make full steps cycle.
                double lambda = 1.0;
                double step = 0.0;
                double trial_worst = worst;
                for (int halving = 0; halving < 40; ++halving, lambda *= 0.5) {
                    step = 0.0;
                    for (std::size_t i = 0; i < nx; ++i) {
                        u[i] = trial[i] - lambda * delta[i];
                        step = std::max(step, std::abs(lambda * delta[i]));
                    }
                    trial_worst = evaluate(u, scale);
                    if (trial_worst < worst || step <= 1e-14 * scale) {
                        break;
                    }
                }
                worst = trial_worst;
                // Stagnation at round-off level counts as converged.
                if (step <= 1e-14 * scale) {
                    converged = true;
                    break;
                }
            }
            if (!converged) {
                // Usually the iterate steepened past what the viscosity was sized for; widen it and retry.
                if (update == opt.max_viscosity_updates) {
                    throw NumericalError("HJB Newton iteration did not converge at time index " + std::to_string(k));
                }
                size_viscosity(u, bc);
                std::copy(next.begin(), next.end(), u.begin());
                continue;
            }
            double margin = std::numeric_limits<double>::infinity();
            for (std::size_t i = 1; i + 1 < nx; ++i) {
                if (absorbed[i]) {
                    continue;
                }
                margin = std::min(margin, alpha[i] - std::abs(ham[i].slope(detail::gradient_at(u, i, dx, bc))));
            }
            detail::Boundaries fixed = bc;
            if (bc.left == detail::Closure::upwind && !(ham.front().slope(detail::gradient_at(u, 0, dx, bc)) >= 0.0)) {
                fixed.left = detail::Closure::reflect;
            }
            if (bc.right == detail::Closure::upwind &&
                !(ham.back().slope(detail::gradient_at(u, nx - 1, dx, bc)) <= 0.0)) {
                fixed.right = detail::Closure::reflect;
            }
            const bool closure_ok = fixed.left == bc.left && fixed.right == bc.right;
            monotone = margin >= 0.0 && closure_ok;
            if (monotone) {
                out.min_monotonicity_margin = std::min(out.min_monotonicity_margin, margin);
            } else {
                bc = fixed;
                size_viscosity(u, bc);
                std::copy(next.begin(), next.end(), u.begin());
            }
        }
        if (!monotone) {
            throw NumericalError("HJB scheme lost monotonicity at time index " + std::to_string(k) +
                                 "; refine the grid (smaller dx)");
        }
        for (std::size_t i = 0; i < nx; ++i) {
            if (!std::isfinite(u[i])) {
                throw NumericalError("HJB blow-up: non-finite value at time index " + std::to_string(k));
            }
            out.max_viscosity = std::max(out.max_viscosity, alpha[i]);
        }
        auto row = out.v.row(k);
        std::copy(u.begin(), u.end(), row.begin());
    }
    return out;
}

/// Spatial derivative of one slice: central differences inside, one-sided at the two boundary columns.
inline std::vector<double> value_gradient(std::span<const double> v, double dx) {
    const std::size_t n = v.size();
    std::vector<double> g(n);
    g[0] = (v[1] - v[0]) / dx;
    g[n - 1] = (v[n - 1] - v[n - 2]) / dx;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        g[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
    }
    return g;
}

/// Feedback effort e*(t, x) = max(0, c~'(a v_x)).
inline Policy extract_policy(const ValueField& v, const ModelParams& p) {
    const Grid& grid = v.grid();
    Policy out{Field(grid)};
    for (std::size_t k = 0; k < grid.nt(); ++k) {
        const auto grad = value_gradient(v.v.row(k), grid.dx());
        auto row = out.effort.row(k);
        for (std::size_t i = 0; i < grid.nx(); ++i) {
            row[i] = legendre_prime(p.a * grad[i]);
        }
    }
    return out;
}

struct HjbResidualReport {
    double max_residual = 0.0;
    double l2_residual = 0.0;
    std::size_t argmax_t = 0;
    std::size_t argmax_x = 0;
    /// max |central v_x - fourth-order v_x| over the nodes where the wide stencil fits.
    double max_gradient_gap = 0.0;
};

/// PDE residual (v^{k+1} - v^k)/dt + H(x, D0 v^k) + sigma^2/2 D2 v^k at interior nodes, with max and L2 norms.
inline HjbResidualReport value_gradient_check(const ValueField& v, const ModelParams& p,
                                              std::span<const MeanFieldShift> shifts = {}) {
    const Grid& grid = v.grid();
    const double dx = grid.dx();
    const double dt = grid.dt();
    const double diffusion = 0.5 * p.sigma * p.sigma;
    HjbResidualReport rep;
    double sum_sq = 0.0;
    for (std::size_t k = 0; k + 1 < grid.nt(); ++k) {
        const auto now = v.v.row(k);
        const auto next = v.v.row(k + 1);
        const MeanFieldShift mf = detail::shift_at(shifts, k);
        for (std::size_t i = 1; i + 1 < grid.nx(); ++i) {
            const auto ham = detail::hamiltonian_at(p, grid.x(i), mf);
            const double grad = (now[i + 1] - now[i - 1]) / (2.0 * dx);
            const double lap = (now[i + 1] - 2.0 * now[i] + now[i - 1]) / (dx * dx);
            const double res = std::abs((next[i] - now[i]) / dt + ham.value(grad) + diffusion * lap);
            sum_sq += res * res * dx * dt;
            if (res > rep.max_residual) {
                rep.max_residual = res;
                rep.argmax_t = k;
                rep.argmax_x = i;
            }
            if (i >= 2 && i + 2 < grid.nx()) {
                const double wide = (-now[i + 2] + 8.0 * now[i + 1] - 8.0 * now[i - 1] + now[i - 2]) / (12.0 * dx);
                rep.max_gradient_gap = std::max(rep.max_gradient_gap, std::abs(grad - wide));
            }
        }
    }
    rep.l2_residual = std::sqrt(sum_sq);
    return rep;
}

}

#endif
