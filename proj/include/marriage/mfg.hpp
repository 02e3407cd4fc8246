#ifndef MARRIAGE_MFG_HPP
#define MARRIAGE_MFG_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fpk.hpp"
#include "hjb.hpp"
#include "model.hpp"
#include "simulate.hpp"

namespace marriage {

struct MfgOptions {
    double fp_tol = 1e-4;
    std::size_t max_iters = 50;
    /// Weight of the fresh density in m <- (1 - damping) m + damping m_new.
    double damping = 0.5;
    /// Consecutive non-decreasing gaps after which the loop gives up.
    std::size_t stall_window = 10;
    HjbOptions hjb;
    FpkOptions fpk;
};

struct MfgSolution {
    ValueField v;
    Policy policy;
    Density m;
    std::size_t iterations = 0;
    /// sup_t L1 distance between successive damped density paths, one entry per iteration.
    std::vector<double> history;
    bool converged = false;
};

/// sup over time of the trapezoid L1 distance between two density paths on one grid.
inline double sup_l1_gap(const Density& a, const Density& b) {
    const Grid& grid = a.grid();
    if (!(b.grid() == grid)) {
        throw ConfigError("density paths live on different grids");
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.nt(); ++k) {
        const auto ra = a.m.row(k);
        const auto rb = b.m.row(k);
        double l1 = 0.0;
        for (std::size_t i = 0; i < grid.nx(); ++i) {
            l1 += grid.weight(i) * std::abs(ra[i] - rb[i]);
        }
        worst = std::max(worst, l1);
    }
    return worst;
}

/// Mean-field terms (h2, s2) of every slice of a density path.
inline std::vector<MeanFieldShift> mean_field_path(const Density& m, const ModelParams& p) {
    std::vector<MeanFieldShift> out(m.grid().nt());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = mean_field_shift(m.grid().xs(), m.m.row(k), p);
    }
    return out;
}

/// One best response: value and policy against the frozen path `m`, then the density they transport from m0.
struct BestResponse {
    ValueField v;
    Policy policy;
    Density m;
};

inline BestResponse best_response(const ModelParams& p, const Density& m, const Density& m0,
                                  const MfgOptions& opt = {}) {
    const auto shifts = mean_field_path(m, p);
    std::vector<double> h2(shifts.size());
    std::transform(shifts.begin(), shifts.end(), h2.begin(), [](const MeanFieldShift& s) { return s.h2; });
    BestResponse out{solve_hjb(p, m.grid(), shifts, opt.hjb), {}, {}};
    out.policy = extract_policy(out.v, p);
    out.m = solve_fpk(p, out.policy, m0, h2, opt.fpk);
    return out;
}

/// Damped Picard iteration on the backward HJB / forward FPK pair. The loop starts from the best response
/// to the initial density held frozen in time; each iteration computes the best response to the current
/// path m, damps m <- (1 - damping) m + damping m_new and stops once the damped step is below fp_tol in
/// sup-time L1. The returned triple is the best response with the smallest gap seen.
inline MfgSolution solve_mfg(const ModelParams& p, const Grid& grid, const Density& m0, const MfgOptions& opt = {}) {
    p.validate();
    if (!(m0.grid() == grid)) {
        throw ConfigError("initial density does not live on the MFG grid");
    }
    if (!(opt.damping > 0.0 && opt.damping <= 1.0)) {
        throw ConfigError("damping must lie in (0, 1]");
    }
    if (!(opt.fp_tol > 0.0)) {
        throw ConfigError("fp_tol must be positive");
    }

    Density frozen{Field(grid), m0.normalized};
    for (std::size_t k = 0; k < grid.nt(); ++k) {
        std::copy(m0.m.row(0).begin(), m0.m.row(0).end(), frozen.m.row(k).begin());
    }
    Density current = best_response(p, frozen, m0, opt).m;

    MfgSolution sol;
    double best_gap = std::numeric_limits<double>::infinity();
    std::size_t stalled = 0;
    for (std::size_t it = 1; it <= opt.max_iters; ++it) {
        BestResponse br = best_response(p, current, m0, opt);
        Density damped{Field(grid), m0.normalized};
        for (std::size_t k = 0; k < grid.nt(); ++k) {
            const auto old_row = current.m.row(k);
            const auto new_row = br.m.m.row(k);
            auto out_row = damped.m.row(k);
            for (std::size_t i = 0; i < grid.nx(); ++i) {
                out_row[i] = (1.0 - opt.damping) * old_row[i] + opt.damping * new_row[i];
            }
        }
        const double gap = sup_l1_gap(damped, current);
        sol.iterations = it;
        if (!sol.history.empty() && gap >= sol.history.back()) {
            ++stalled;
        } else {
            stalled = 0;
        }
        sol.history.push_back(gap);
        if (gap < best_gap) {
            best_gap = gap;
            sol.v = std::move(br.v);
            sol.policy = std::move(br.policy);
            sol.m = std::move(br.m);
        }
        if (gap <= opt.fp_tol) {
            sol.converged = true;
            break;
        }
        if (stalled >= opt.stall_window) {
            break;
        }
        current = std::move(damped);
    }
    return sol;
}

/// Density-only equilibrium with every couple holding one constant effort: the v of the HJB is linear in x
/// and frozen in time, so only the drift coupling h2 = kappa_h mean(m) is iterated.
struct FrozenEffortSolution {
    Density m;
    std::size_t iterations = 0;
    std::vector<double> history;
    bool converged = false;
};

inline FrozenEffortSolution solve_mfg_constant_effort(const ModelParams& p, double effort, const Density& m0,
                                                      const MfgOptions& opt = {}) {
    p.validate();
    if (!(opt.damping > 0.0 && opt.damping <= 1.0)) {
        throw ConfigError("damping must lie in (0, 1]");
    }
    const Grid& grid = m0.grid();
    auto h2_of = [&](const Density& m) {
        std::vector<double> h2(grid.nt());
        for (std::size_t k = 0; k < grid.nt(); ++k) {
            h2[k] = mean_field_shift(grid.xs(), m.m.row(k), p).h2;
        }
        return h2;
    };
    Density frozen{Field(grid), m0.normalized};
    for (std::size_t k = 0; k < grid.nt(); ++k) {
        std::copy(m0.m.row(0).begin(), m0.m.row(0).end(), frozen.m.row(k).begin());
    }
    Density current = solve_fpk_constant_effort(p, effort, m0, h2_of(frozen), opt.fpk);

    FrozenEffortSolution sol;
    double best_gap = std::numeric_limits<double>::infinity();
    std::size_t stalled = 0;
    for (std::size_t it = 1; it <= opt.max_iters; ++it) {
        Density fresh = solve_fpk_constant_effort(p, effort, m0, h2_of(current), opt.fpk);
        Density damped{Field(grid), m0.normalized};
        for (std::size_t k = 0; k < grid.nt(); ++k) {
            for (std::size_t i = 0; i < grid.nx(); ++i) {
                damped.m.row(k)[i] = (1.0 - opt.damping) * current.m(k, i) + opt.damping * fresh.m(k, i);
            }
        }
        const double gap = sup_l1_gap(damped, current);
        sol.iterations = it;
        stalled = (!sol.history.empty() && gap >= sol.history.back()) ? stalled + 1 : 0;
        sol.history.push_back(gap);
        if (gap < best_gap) {
            best_gap = gap;
            sol.m = std::move(fresh);
        }
        if (gap <= opt.fp_tol) {
            sol.converged = true;
            break;
        }
        if (stalled >= opt.stall_window) {
            break;
        }
        current = std::move(damped);
    }
    return sol;
}

/// sup_t L1 change of the density after one more best-response pass from a solution.
inline double fixed_point_residual(const ModelParams& p, const MfgSolution& sol, const Density& m0,
                                   const MfgOptions& opt = {}) {
    return sup_l1_gap(best_response(p, sol.m, m0, opt).m, sol.m);
}

// ---------------------------------------------------------------------------
// Effort floor and contagion diagnostics
// ---------------------------------------------------------------------------

struct EffortFloorReport {
    double min_gap = 0.0;
    /// Fraction of grid nodes with e* > e_floor strictly.
    double strict_fraction = 0.0;
    bool pass = false;
};

/// min over the grid of e*(t, x) - e_floor for a feedback policy.
inline EffortFloorReport theorem1_check(const Policy& policy) {
    const double floor = one_shot_effort().e_floor;
    EffortFloorReport rep;
    rep.min_gap = std::numeric_limits<double>::infinity();
    std::size_t strict = 0;
    const auto values = policy.effort.values();
    for (double e : values) {
        rep.min_gap = std::min(rep.min_gap, e - floor);
        if (e > floor) {
            ++strict;
        }
    }
    rep.strict_fraction = values.empty() ? 0.0 : static_cast<double>(strict) / static_cast<double>(values.size());
    rep.pass = rep.min_gap >= 0.0;
    return rep;
}

/// Same check on an equilibrium; the mean-field drift gain must respect `smallness_bound`.
inline EffortFloorReport theorem1_check(const MfgSolution& sol, const ModelParams& p, double smallness_bound = 1.0) {
    if (std::abs(p.kappa_h) > smallness_bound) {
        throw ConfigError("mean-field drift gain |kappa_h| exceeds the smallness bound " +
                          std::to_string(smallness_bound));
    }
    return theorem1_check(sol.policy);
}

struct ContagionReport {
    double h2 = 0.0;
    std::vector<double> times;
    std::vector<double> states;
    /// Balancing effort (h(x(t)) - h2) / a along the path.
    std::vector<double> threshold_effort;
    double terminal_state = 0.0;
    /// Terminal state of the same run without the societal shift.
    double baseline_terminal_state = 0.0;
    /// h2 > 0 and the terminal state ends above the baseline.
    bool theorem2_pass = false;
    /// h2 < 0, x0 in (0, 2) and the terminal state ends below zero.
    bool theorem3_pass = false;
};

/// Uncontrolled deterministic dynamics under a constant societal shift h2 (drift -h(x) + h2).
inline ContagionReport contagion_experiment(const ModelParams& p, double h2_override, double x0, double horizon,
                                            double dt = 0.01) {
    if (!(horizon > 0.0) || !(dt > 0.0)) {
        throw ConfigError("horizon and dt must be positive");
    }
    ModelParams det = p;
    det.sigma = 0.0;
    SimulationOptions opt;
    opt.dt = dt;
    opt.n_steps = static_cast<std::size_t>(std::llround(horizon / dt));
    const double start[1] = {x0};

    ContagionReport rep;
    rep.h2 = h2_override;
    if (h2_override != 0.0) {
        opt.mf_shift_path.assign(opt.n_steps + 1, h2_override);
    }
    const auto run = simulate_ensemble(det, start, ZeroEffort{}, opt);
    rep.times = run.times;
    rep.states = run.states[0];
    rep.terminal_state = rep.states.back();
    for (double x : rep.states) {
        rep.threshold_effort.push_back((h_eval(det, x) - h2_override) / det.a);
    }
    opt.mf_shift_path.clear();
    rep.baseline_terminal_state = simulate_ensemble(det, start, ZeroEffort{}, opt).states[0].back();
    rep.theorem2_pass = h2_override > 0.0 && rep.terminal_state > rep.baseline_terminal_state;
    rep.theorem3_pass = h2_override < 0.0 && x0 > 0.0 && x0 < 2.0 && rep.terminal_state < 0.0;
    return rep;
}

}

#endif
