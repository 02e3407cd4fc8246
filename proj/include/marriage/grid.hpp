#ifndef MARRIAGE_GRID_HPP
#define MARRIAGE_GRID_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace marriage {

/// Uniform space-time lattice on [x_min, x_max] x [0, horizon], shared by the HJB and FPK solvers.
class Grid {
public:
    Grid() = default;

    Grid(double x_min, double x_max, std::size_t nx, std::size_t nt, double horizon)
        : x_min_(x_min), x_max_(x_max), nx_(nx), nt_(nt), horizon_(horizon) {
        if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
            throw ConfigError("grid requires x_min < x_max");
        }
        if (nx < 3) {
            throw ConfigError("grid requires nx >= 3");
        }
        if (nt < 2) {
            throw ConfigError("grid requires nt >= 2");
        }
        if (!(horizon > 0.0) || !std::isfinite(horizon)) {
            throw ConfigError("grid requires a positive horizon");
        }
        xs_.resize(nx);
        for (std::size_t i = 0; i < nx; ++i) {
            xs_[i] = x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(nx - 1);
        }
    }

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    std::size_t nx() const { return nx_; }
    std::size_t nt() const { return nt_; }
    double horizon() const { return horizon_; }
    double dx() const { return (x_max_ - x_min_) / static_cast<double>(nx_ - 1); }
    double dt() const { return horizon_ / static_cast<double>(nt_ - 1); }

    double x(std::size_t i) const { return xs_[i]; }
    double t(std::size_t k) const { return horizon_ * static_cast<double>(k) / static_cast<double>(nt_ - 1); }
    std::span<const double> xs() const { return xs_; }

    bool contains(double x) const { return x >= x_min_ && x <= x_max_; }

    /// Trapezoid weight of node i (dx at interior nodes, dx/2 at the ends).
    double weight(std::size_t i) const { return (i == 0 || i + 1 == nx_) ? 0.5 * dx() : dx(); }

    friend bool operator==(const Grid& l, const Grid& r) {
        return l.x_min_ == r.x_min_ && l.x_max_ == r.x_max_ && l.nx_ == r.nx_ && l.nt_ == r.nt_ &&
               l.horizon_ == r.horizon_;
    }

private:
    double x_min_ = 0.0;
    double x_max_ = 1.0;
    std::size_t nx_ = 0;
    std::size_t nt_ = 0;
    double horizon_ = 1.0;
    std::vector<double> xs_;
};

/// Row-major [time x space] array of samples on a Grid.
class Field {
public:
    Field() = default;
    explicit Field(const Grid& grid, double fill = 0.0)
        : grid_(grid), data_(grid.nt() * grid.nx(), fill) {}

    const Grid& grid() const { return grid_; }

    double& operator()(std::size_t k, std::size_t i) { return data_[k * grid_.nx() + i]; }
    double operator()(std::size_t k, std::size_t i) const { return data_[k * grid_.nx() + i]; }

    std::span<double> row(std::size_t k) { return {data_.data() + k * grid_.nx(), grid_.nx()}; }
    std::span<const double> row(std::size_t k) const { return {data_.data() + k * grid_.nx(), grid_.nx()}; }

    std::span<const double> values() const { return data_; }

    /// Bilinear interpolation; (t, x) is clamped into the grid.
    double interpolate(double t, double x) const {
        const auto [k0, wt] = locate(t, grid_.horizon(), grid_.nt());
        const auto [i0, wx] = locate(x - grid_.x_min(), grid_.x_max() - grid_.x_min(), grid_.nx());
        const std::size_t k1 = std::min(k0 + 1, grid_.nt() - 1);
        const std::size_t i1 = std::min(i0 + 1, grid_.nx() - 1);
        const double lo = (1.0 - wx) * (*this)(k0, i0) + wx * (*this)(k0, i1);
        const double hi = (1.0 - wx) * (*this)(k1, i0) + wx * (*this)(k1, i1);
        return (1.0 - wt) * lo + wt * hi;
    }

private:
    // Cell index and fractional offset of s in [0, length] sampled at n nodes.
    static std::pair<std::size_t, double> locate(double s, double length, std::size_t n) {
        const double u = std::clamp(s / length, 0.0, 1.0) * static_cast<double>(n - 1);
        const std::size_t idx = std::min(static_cast<std::size_t>(u), n - 2);
        return {idx, u - static_cast<double>(idx)};
    }

    Grid grid_;
    std::vector<double> data_;
};

/// Solves a tridiagonal system in place (Thomas algorithm). `lower[0]` and `upper[n-1]` are ignored.
/// Intended for the diagonally dominant M-matrices produced by the schemes here; no pivoting.
inline void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag, std::span<const double> upper,
                              std::span<double> rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n);
    double denom = diag[0];
    c[0] = upper[0] / denom;
    rhs[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - lower[i] * c[i - 1];
        c[i] = (i + 1 < n) ? upper[i] / denom : 0.0;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

}

#endif
