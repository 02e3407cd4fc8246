#ifndef MARRIAGE_MODEL_HPP
#define MARRIAGE_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "errors.hpp"

namespace marriage {

/// Shape of the terminal reward g. Only g' >= 0 is required of it.
enum class TerminalMode { linear, constant };

/// Shape of the well-being s. `flat` removes the incentive gradient (s' = 0) and is used as a check mode.
enum class WellBeingMode { saturating, flat };

/// Coefficients of the feeling-state model
///
///     dx = [-h(x) + h2 + a e] dt + sigma dB,   h(x) = r x - b tanh(c x),
///
/// with running payoff s(x) + s2 - e^2/2, s(x) = s_bar - 10 exp(-x), and terminal reward g.
struct ModelParams {
    double r = 0.5;
    double a = 10.0;
    double b = 1.0;
    double c_slope = 1.0;
    double sigma = 0.0;
    double s_bar = 10.0;
    double gamma = 0.0;
    TerminalMode g_mode = TerminalMode::constant;
    double g_const = 0.0;
    WellBeingMode well_being_mode = WellBeingMode::saturating;
    double T = 10.0;
    double kappa_h = 0.0;
    double kappa_s = 0.0;
    double x_low = 0.0;
    double eps = 0.1;

    /// Throws ConfigError naming the violated constraint.
    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw ConfigError(std::string(name) + " must be positive (got " + std::to_string(v) + ")");
            }
        };
        positive(r, "r");
        positive(a, "a");
        positive(b, "b");
        positive(c_slope, "c_slope");
        positive(T, "T");
        positive(eps, "eps");
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
            throw ConfigError("sigma must be >= 0 (got " + std::to_string(sigma) + ")");
        }
        if (!(s_bar >= 10.0) || !std::isfinite(s_bar)) {
            throw ConfigError("s_bar violates s̄ ≥ 10 (got " + std::to_string(s_bar) + ")");
        }
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
            throw ConfigError("gamma must be >= 0 so that g' >= 0 (got " + std::to_string(gamma) + ")");
        }
        if (!std::isfinite(kappa_h) || !std::isfinite(kappa_s) || !std::isfinite(x_low) || !std::isfinite(g_const)) {
            throw ConfigError("coupling gains, x_low and g_const must be finite");
        }
    }

    /// Divorce level x_low - eps used by the stopping rule.
    double divorce_level() const { return x_low - eps; }
};

inline double h_eval(const ModelParams& p, double x) {
    return p.r * x - p.b * std::tanh(p.c_slope * x);
}

inline double h_prime(const ModelParams& p, double x) {
    const double th = std::tanh(p.c_slope * x);
    return p.r - p.b * p.c_slope * (1.0 - th * th);
}

/// Drift -h(x) + mf_shift + a e. mf_shift is the mean-field term h2(m); zero gives the isolated couple.
inline double drift(const ModelParams& p, double x, double e, double mf_shift = 0.0) {
    if (e < 0.0) {
        throw ConfigError("effort must be nonnegative (got " + std::to_string(e) + ")");
    }
    return -h_eval(p, x) + mf_shift + p.a * e;
}

inline double well_being(const ModelParams& p, double x, double mf_bonus = 0.0) {
    if (p.well_being_mode == WellBeingMode::flat) {
        return p.s_bar - 10.0 + mf_bonus;
    }
    return p.s_bar - 10.0 * std::exp(-x) + mf_bonus;
}

inline double well_being_prime(const ModelParams& p, double x) {
    if (p.well_being_mode == WellBeingMode::flat) {
        return 0.0;
    }
    return 10.0 * std::exp(-x);
}

inline double cost(double e) {
    if (e < 0.0) {
        throw ConfigError("effort must be nonnegative (got " + std::to_string(e) + ")");
    }
    return 0.5 * e * e;
}

inline double cost_prime(double e) {
    if (e < 0.0) {
        throw ConfigError("effort must be nonnegative (got " + std::to_string(e) + ")");
    }
    return e;
}

inline double cost_second(double e) {
    if (e < 0.0) {
        throw ConfigError("effort must be nonnegative (got " + std::to_string(e) + ")");
    }
    return 1.0;
}

/// Convex conjugate of the quadratic cost over admissible efforts, sup_{e >= 0} { z e - e^2/2 }.
inline double legendre(double z) {
    const double zp = std::max(0.0, z);
    return 0.5 * zp * zp;
}

/// Maximizer of the transform above; the feedback effort is legendre_prime(a v_x).
inline double legendre_prime(double z) {
    return std::max(0.0, z);
}

/// Effort that solves c'(e) = 0, the one-shot optimum.
struct EffortFloor {
    double e_floor = 0.0;
};

inline EffortFloor one_shot_effort() {
    return EffortFloor{0.0};
}

inline double terminal_reward(const ModelParams& p, double x) {
    return p.g_mode == TerminalMode::linear ? p.gamma * x : p.g_const;
}

inline double terminal_reward_prime(const ModelParams& p, double /*x*/) {
    return p.g_mode == TerminalMode::linear ? p.gamma : 0.0;
}

/// e(T) = max(0, (c')^{-1}[a g'(x_T)]).
inline double terminal_effort(const ModelParams& p, double x_T) {
    return legendre_prime(p.a * terminal_reward_prime(p, x_T));
}

struct MeanFieldShift {
    double h2 = 0.0;
    double s2 = 0.0;
};

/// Trapezoid-rule mean of a nonnegative density sampled at the uniform nodes xs.
inline double density_mean(std::span<const double> xs, std::span<const double> m) {
    const std::size_t n = xs.size();
    if (n < 2 || m.size() != n) {
        throw ConfigError("density and node arrays must match and hold at least two points");
    }
    double mass = 0.0;
    double first = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
        mass += w * m[i];
        first += w * m[i] * xs[i];
    }
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        throw NumericalError("degenerate mean field: density has no positive mass");
    }
    return first / mass;
}

/// h2(m) = kappa_h mean(m), s2(m) = kappa_s mean(m).
inline MeanFieldShift mean_field_shift(std::span<const double> xs, std::span<const double> m, const ModelParams& p) {
    const double mean = density_mean(xs, m);
    return MeanFieldShift{p.kappa_h * mean, p.kappa_s * mean};
}

}

#endif
