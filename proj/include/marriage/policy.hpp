#ifndef MARRIAGE_POLICY_HPP
#define MARRIAGE_POLICY_HPP

#include "grid.hpp"

namespace marriage {

/// Value function v(t, x) sampled on a grid, with scheme diagnostics from the backward march.
struct ValueField {
    Field v;
    /// Largest local viscosity used by the Hamiltonian discretization.
    double max_viscosity = 0.0;
    /// Newton iterations summed over all time steps.
    std::size_t newton_iterations = 0;
    /// Smallest off-diagonal monotonicity margin min_i (alpha_i - |H_p|_i) seen over the march; >= 0 means monotone.
    double min_monotonicity_margin = 0.0;

    const Grid& grid() const { return v.grid(); }
};

/// Feedback effort e*(t, x) >= 0 sampled on a grid.
struct Policy {
    Field effort;

    const Grid& grid() const { return effort.grid(); }
    double operator()(double t, double x) const { return effort.interpolate(t, x); }
};

}

#endif
