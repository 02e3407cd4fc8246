#ifndef MARRIAGE_FPK_HPP
#define MARRIAGE_FPK_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "policy.hpp"

namespace marriage {

/// Population density m(t, x) >= 0 on a grid. Never renormalized during a march; `normalized` records
/// whether the initial slice was scaled to unit mass.
struct Density {
    Field m;
    bool normalized = true;

    const Grid& grid() const { return m.grid(); }
};

struct GaussianBump {
    double center = 0.0;
    double std = 1.0;
};

struct WeightedBump {
    double weight = 1.0;
    double center = 0.0;
    double std = 1.0;
};

using InitialDensitySpec = std::variant<GaussianBump, std::vector<WeightedBump>>;

/// Mass of one slice by the trapezoid rule (the finite-volume mass of the FPK scheme).
inline double slice_mass(const Grid& grid, std::span<const double> m) {
    double mass = 0.0;
    for (std::size_t i = 0; i < grid.nx(); ++i) {
        mass += grid.weight(i) * m[i];
    }
    return mass;
}

/// Samples the initial density on the grid (row 0); all later rows are zero. Unit mass unless `normalize`
/// is false, in which case the bumps are sampled with their nominal weights.
inline Density make_initial_density(const InitialDensitySpec& spec, const Grid& grid, bool normalize = true) {
    std::vector<WeightedBump> bumps;
    if (const auto* g = std::get_if<GaussianBump>(&spec)) {
        bumps.push_back({1.0, g->center, g->std});
    } else {
        bumps = std::get<std::vector<WeightedBump>>(spec);
    }
    if (bumps.empty()) {
        throw ConfigError("initial density needs at least one component");
    }
    for (const auto& b : bumps) {
        if (!(b.std > 0.0)) {
            throw ConfigError("initial density standard deviation must be positive");
        }
        if (!(b.weight > 0.0)) {
            throw ConfigError("mixture weights must be positive");
        }
    }
    Density out{Field(grid), normalize};
    auto row = out.m.row(0);
    for (std::size_t i = 0; i < grid.nx(); ++i) {
        double value = 0.0;
        for (const auto& b : bumps) {
            const double z = (grid.x(i) - b.center) / b.std;
            value += b.weight * std::exp(-0.5 * z * z) / (b.std * std::sqrt(2.0 * std::numbers::pi));
        }
        row[i] = value;
    }
    const double mass = slice_mass(grid, row);
    if (!(mass >= 1e-6)) {
        throw ConfigError("initial density has negligible mass on the grid (" + std::to_string(mass) + ")");
    }
    if (normalize) {
        for (auto& v : row) {
            v /= mass;
        }
    }
    return out;
}

struct FpkOptions {
    /// Tolerated relative drift of the total mass over the march.
    double mass_tolerance = 1e-6;
    /// Most negative value accepted before the march is declared broken.
    double negativity_floor = -1e-12;
};

/// Conservative march of m_t + (u m)_x - D m_xx = 0 from row 0 of `m`, with D = diffusion and the
/// velocity u(k, i) given at nodes. Edge velocities average the two nodes; the advective flux is upwinded
/// and both fluxes are taken at the new time level, so every step is one tridiagonal solve with an
/// M-matrix (positivity) whose columns sum to the cell widths over dt (exact mass balance). Zero flux
/// leaves through either end of the domain.
template <class Velocity>
void march_density(Density& density, Velocity&& velocity, double diffusion, const FpkOptions& opt = {}) {
    const Grid& grid = density.grid();
    const std::size_t nx = grid.nx();
    const double dx = grid.dx();
    const double dt = grid.dt();
    const double d = diffusion / dx;

    std::vector<double> lower(nx), diag(nx), upper(nx), rhs(nx), u(nx);
    const double mass0 = slice_mass(grid, density.m.row(0));
    for (std::size_t k = 0; k + 1 < grid.nt(); ++k) {
        for (std::size_t i = 0; i < nx; ++i) {
            u[i] = velocity(k + 1, i);
            diag[i] = grid.weight(i) / dt;
            lower[i] = 0.0;
            upper[i] = 0.0;
        }
        // Flux through the edge between nodes i and i+1: F = u+ m_i + u- m_{i+1} - d (m_{i+1} - m_i).
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            const double edge = 0.5 * (u[i] + u[i + 1]);
            const double out_right = std::max(edge, 0.0) + d;
            const double in_left = std::min(edge, 0.0) - d;
            diag[i] += out_right;
            upper[i] += in_left;
            diag[i + 1] -= in_left;
            lower[i + 1] -= out_right;
        }
        const auto now = density.m.row(k);
        for (std::size_t i = 0; i < nx; ++i) {
            rhs[i] = grid.weight(i) / dt * now[i];
        }
        solve_tridiagonal(lower, diag, upper, rhs);
        auto next = density.m.row(k + 1);
        for (std::size_t i = 0; i < nx; ++i) {
            if (!(rhs[i] >= opt.negativity_floor)) {
                throw NumericalError("FPK produced a negative density " + std::to_string(rhs[i]) + " at time index " +
                                     std::to_string(k + 1));
            }
            next[i] = rhs[i];
        }
        const double mass = slice_mass(grid, next);
        if (std::abs(mass - mass0) > opt.mass_tolerance * std::abs(mass0)) {
            throw NumericalError("FPK mass drifted from " + std::to_string(mass0) + " to " + std::to_string(mass) +
                                 " at time index " + std::to_string(k + 1));
        }
    }
}

/// Forward FPK under a feedback policy: velocity -h(x) + h2(t) + a e(t, x).
/// `h2_path`, when nonempty, holds the mean-field drift shift for every time index.
inline Density solve_fpk(const ModelParams& p, const Policy& policy, const Density& m0,
                         std::span<const double> h2_path = {}, const FpkOptions& opt = {}) {
    p.validate();
    const Grid& grid = m0.grid();
    if (!(policy.grid() == grid)) {
        throw ConfigError("policy and initial density must share one grid");
    }
    if (!h2_path.empty() && h2_path.size() != grid.nt()) {
        throw ConfigError("mean-field shift path does not match the time grid");
    }
    for (double e : policy.effort.values()) {
        if (!(e >= 0.0)) {
            throw ConfigError("policy efforts must be nonnegative");
        }
    }
    std::vector<double> h(grid.nx());
    for (std::size_t i = 0; i < grid.nx(); ++i) {
        h[i] = h_eval(p, grid.x(i));
    }
    Density out{Field(grid), m0.normalized};
    std::copy(m0.m.row(0).begin(), m0.m.row(0).end(), out.m.row(0).begin());
    march_density(
        out,
        [&](std::size_t k, std::size_t i) {
            const double shift = h2_path.empty() ? 0.0 : h2_path[k];
            return -h[i] + shift + p.a * policy.effort(k, i);
        },
        0.5 * p.sigma * p.sigma, opt);
    return out;
}

/// Forward FPK under one constant effort level everywhere (the frozen-effort mode).
inline Density solve_fpk_constant_effort(const ModelParams& p, double effort, const Density& m0,
                                         std::span<const double> h2_path = {}, const FpkOptions& opt = {}) {
    if (!(effort >= 0.0)) {
        throw ConfigError("constant effort must be nonnegative");
    }
    Policy flat{Field(m0.grid(), effort)};
    return solve_fpk(p, flat, m0, h2_path, opt);
}

struct DensityStats {
    double mean = 0.0;
    double variance = 0.0;
    double mass = 0.0;
    double mass_below = 0.0;
};

/// Trapezoid moments of slice `t_index`; `mass_below` integrates over x <= x_low.
inline DensityStats density_stats(const Density& density, std::size_t t_index, double x_low = 0.0) {
    const Grid& grid = density.grid();
    if (t_index >= grid.nt()) {
        throw ConfigError("time index out of range");
    }
    const auto row = density.m.row(t_index);
    DensityStats s;
    double first = 0.0;
    for (std::size_t i = 0; i < grid.nx(); ++i) {
        const double w = grid.weight(i) * row[i];
        s.mass += w;
        first += w * grid.x(i);
        if (grid.x(i) <= x_low) {
            s.mass_below += w;
        }
    }
    if (s.mass > 0.0) {
        s.mean = first / s.mass;
        double second = 0.0;
        for (std::size_t i = 0; i < grid.nx(); ++i) {
            const double dev = grid.x(i) - s.mean;
            second += grid.weight(i) * row[i] * dev * dev;
        }
        s.variance = second / s.mass;
    }
    return s;
}

/// Trapezoid mass of slice `t_index` restricted to lo < x < hi.
inline double mass_between(const Density& density, std::size_t t_index, double lo, double hi) {
    const Grid& grid = density.grid();
    const auto row = density.m.row(t_index);
    double mass = 0.0;
    for (std::size_t i = 0; i < grid.nx(); ++i) {
        if (grid.x(i) > lo && grid.x(i) < hi) {
            mass += grid.weight(i) * row[i];
        }
    }
    return mass;
}

}

#endif
