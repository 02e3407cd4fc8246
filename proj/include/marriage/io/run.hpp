#ifndef MARRIAGE_IO_RUN_HPP
#define MARRIAGE_IO_RUN_HPP

#include <chrono>
#include <deque>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "../fpk.hpp"
#include "../hjb.hpp"
#include "../mfg.hpp"
#include "../pmp.hpp"
#include "../simulate.hpp"
#include "config.hpp"
#include "csv.hpp"

namespace marriage::io {

inline constexpr const char* version = "1.0.0";

struct RunResult {
    /// (file stem, table) in write order; references returned by add() stay valid.
    std::deque<std::pair<std::string, Table>> tables;
    std::vector<std::string> warnings;
    /// False when an iterative solver stopped without meeting its tolerance.
    bool converged = true;

    Table& add(std::string stem, std::vector<std::string> header) {
        tables.push_back({std::move(stem), Table{std::move(header), {}}});
        return tables.back().second;
    }
    const Table* find(const std::string& stem) const {
        for (const auto& [s, t] : tables) {
            if (s == stem) {
                return &t;
            }
        }
        return nullptr;
    }
};

struct RunManifest {
    std::string name;
    std::string config;
    std::string version;
    std::uint64_t seed = 0;
    double wall_clock_seconds = 0.0;
    std::map<std::string, std::uint64_t> checksums;
};

namespace detail {

inline std::vector<std::size_t> snapshot_indices(std::size_t nt, std::size_t count) {
    std::vector<std::size_t> out;
    if (count <= 1) {
        out.push_back(nt - 1);
        return out;
    }
    for (std::size_t j = 0; j < count; ++j) {
        const auto k = static_cast<std::size_t>(
            std::llround(static_cast<double>(j) * static_cast<double>(nt - 1) / static_cast<double>(count - 1)));
        if (out.empty() || out.back() != k) {
            out.push_back(k);
        }
    }
    return out;
}

inline std::size_t steps_for(double horizon, double dt, const char* what) {
    const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
    if (n == 0 || std::abs(static_cast<double>(n) * dt - horizon) > 1e-9 * horizon) {
        throw ConfigError(std::string(what) + " must divide the horizon T");
    }
    return n;
}

inline InitialDensitySpec initial_of(const ExperimentSpec& s) {
    std::vector<WeightedBump> bumps;
    for (std::size_t j = 0; j < s.initial.centers.size(); ++j) {
        bumps.push_back({s.initial.weights[j], s.initial.centers[j], s.initial.stds[j]});
    }
    return bumps;
}

inline HjbOptions hjb_options(const ExperimentSpec& s) {
    HjbOptions o;
    o.viscosity_margin = s.hjb.viscosity_margin;
    o.newton_tolerance = s.hjb.newton_tolerance;
    o.max_newton_iterations = s.hjb.max_newton_iterations;
    o.absorbing = s.hjb.absorbing;
    return o;
}

inline void add_field(Table& t, const Field& f, std::span<const std::size_t> rows) {
    const Grid& g = f.grid();
    for (std::size_t k : rows) {
        for (std::size_t i = 0; i < g.nx(); ++i) {
            t.add({g.t(k), g.x(i), f(k, i)});
        }
    }
}

inline std::vector<std::size_t> strided(std::size_t nt, std::size_t stride) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < nt; k += stride) {
        out.push_back(k);
    }
    if (out.back() != nt - 1) {
        out.push_back(nt - 1);
    }
    return out;
}

inline void add_density(RunResult& res, const Density& m, std::size_t snapshots, double x_low) {
    const auto rows = snapshot_indices(m.grid().nt(), snapshots);
    add_field(res.add("density", {"t", "x", "density"}), m.m, rows);
    auto& stats = res.add("stats", {"t", "mean", "variance", "mass", "mass_below"});
    for (std::size_t k = 0; k < m.grid().nt(); ++k) {
        const auto st = density_stats(m, k, x_low);
        stats.add({m.grid().t(k), st.mean, st.variance, st.mass, st.mass_below});
    }
}

inline void run_steady_states(const ExperimentSpec& s, RunResult& res) {
    const auto rep = find_steady_states(s.params, s.steady.x_lo, s.steady.x_hi, s.steady.root_tol, s.steady.scan_points);
    auto& roots = res.add("roots", {"x", "slope", "unstable"});
    for (const auto& r : rep.roots) {
        roots.add({r.x, r.slope, r.stability == Stability::unstable ? 1.0 : 0.0});
    }
    auto& curve = res.add("drift", {"x", "drift"});
    const std::size_t n = s.steady.curve_points;
    for (std::size_t j = 0; j < n; ++j) {
        const double x = s.steady.x_lo + (s.steady.x_hi - s.steady.x_lo) * static_cast<double>(j) / static_cast<double>(n - 1);
        curve.add({x, drift(s.params, x, 0.0)});
    }
}

inline void run_simulate(const ExperimentSpec& s, RunResult& res) {
    SimulationOptions opt;
    opt.dt = s.simulate.dt;
    opt.n_steps = steps_for(s.params.T, s.simulate.dt, "simulate.dt");
    opt.seed = s.seed;
    opt.stopping = s.simulate.stopping;
    opt.record_stride = s.simulate.record_stride;

    EffortSource source = ZeroEffort{};
    Policy policy;
    if (s.simulate.effort == EffortKind::constant) {
        source = ConstantEffort{s.simulate.effort_value};
    } else if (s.simulate.effort == EffortKind::policy) {
        policy = extract_policy(solve_hjb(s.params, s.make_grid(), {}, hjb_options(s)), s.params);
        source = PolicyEffort{&policy};
    }
    const auto ens = simulate_ensemble(s.params, s.simulate.x0, source, opt);
    auto& traj = res.add("trajectories", {"path", "t", "x", "effort"});
    auto& term = res.add("terminal", {"path", "x0", "x_final", "stop_time", "payoff"});
    for (std::size_t j = 0; j < ens.states.size(); ++j) {
        for (std::size_t k = 0; k < ens.times.size(); ++k) {
            traj.add({static_cast<double>(j), ens.times[k], ens.states[j][k], ens.efforts[j][k]});
        }
        const double payoff = s.simulate.record_stride == 1 ? payoff_along(s.params, opt.dt, ens.states[j], ens.efforts[j])
                                                            : std::nan("");
        term.add({static_cast<double>(j), s.simulate.x0[j], ens.states[j].back(),
                  ens.stop_times[j].value_or(std::nan("")), payoff});
    }
}

inline void run_pmp(const ExperimentSpec& s, RunResult& res) {
    auto& paths = res.add("paths", {"x0", "t", "x", "p", "e", "q"});
    auto& summary = res.add("summary", {"x0", "payoff", "converged", "residual", "iterations", "ode_residual"});
    std::optional<ValueField> v;
    if (s.pmp.stochastic) {
        v = solve_hjb(s.params, s.make_grid(), {}, hjb_options(s));
    }
    PmpOptions opt;
    opt.dt = s.pmp.dt;
    opt.max_iters = s.pmp.max_iters;
    opt.tol = s.pmp.tol;
    opt.relaxation = s.pmp.relaxation;
    for (std::size_t j = 0; j < s.pmp.x0.size(); ++j) {
        const double x0 = s.pmp.x0[j];
        const OpenLoopSolution sol = s.pmp.stochastic
                                         ? solve_pmp_stochastic(s.params, x0, *v, s.pmp.dt, path_seed(s.seed, j))
                                         : solve_pmp_deterministic(s.params, x0, opt);
        if (!sol.converged) {
            res.converged = false;
            res.warnings.push_back("PMP sweep from x0 = " + format_number(x0) + " stopped at residual " +
                                   format_number(sol.residual));
        }
        for (std::size_t k = 0; k < sol.x.size(); k += s.pmp.record_stride) {
            paths.add({x0, sol.times[k], sol.x[k], sol.p[k], sol.e[k], sol.q.empty() ? std::nan("") : sol.q[k]});
        }
        if ((sol.x.size() - 1) % s.pmp.record_stride != 0) {
            const std::size_t k = sol.x.size() - 1;
            paths.add({x0, sol.times[k], sol.x[k], sol.p[k], sol.e[k], sol.q.empty() ? std::nan("") : sol.q[k]});
        }
        summary.add({x0, payoff_along(s.params, sol.dt(), sol.x, sol.e), sol.converged ? 1.0 : 0.0, sol.residual,
                     static_cast<double>(sol.iterations), effort_ode_residual(sol, s.params)});
    }
    if (s.pmp.vector_field) {
        auto& vf = res.add("vector_field", {"x", "e", "dx", "de"});
        const std::size_t n = s.pmp.vf_n;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = s.pmp.vf_x_min + (s.pmp.vf_x_max - s.pmp.vf_x_min) * static_cast<double>(i) / static_cast<double>(n - 1);
            for (std::size_t j = 0; j < n; ++j) {
                const double e = s.pmp.vf_e_max * static_cast<double>(j) / static_cast<double>(n - 1);
                const double de = (cost_prime(e) * h_prime(s.params, x) - s.params.a * well_being_prime(s.params, x)) /
                                  cost_second(e);
                vf.add({x, e, drift(s.params, x, e), de});
            }
        }
    }
}

inline void run_hjb(const ExperimentSpec& s, RunResult& res) {
    const ValueField v = solve_hjb(s.params, s.make_grid(), {}, hjb_options(s));
    const Policy pol = extract_policy(v, s.params);
    const auto rows = strided(v.grid().nt(), s.hjb.time_stride);
    add_field(res.add("value", {"t", "x", "value"}), v.v, rows);
    add_field(res.add("policy", {"t", "x", "effort"}), pol.effort, rows);
    const auto check = value_gradient_check(v, s.params);
    const auto floor = theorem1_check(pol);
    res.add("diagnostics", {"max_viscosity", "newton_iterations", "min_monotonicity_margin", "max_residual",
                            "l2_residual", "min_effort_gap", "strict_fraction"})
        .add({v.max_viscosity, static_cast<double>(v.newton_iterations), v.min_monotonicity_margin, check.max_residual,
              check.l2_residual, floor.min_gap, floor.strict_fraction});
}

inline void run_fpk(const ExperimentSpec& s, RunResult& res) {
    const Grid grid = s.make_grid();
    const Density m0 = make_initial_density(initial_of(s), grid, s.initial.normalize);
    FpkOptions opt;
    opt.mass_tolerance = s.fpk.mass_tolerance;
    Density m;
    if (s.fpk.effort == EffortKind::policy) {
        const Policy pol = extract_policy(solve_hjb(s.params, grid, {}, hjb_options(s)), s.params);
        m = solve_fpk(s.params, pol, m0, {}, opt);
    } else {
        m = solve_fpk_constant_effort(s.params, s.fpk.effort == EffortKind::zero ? 0.0 : s.fpk.effort_value, m0, {}, opt);
    }
    add_density(res, m, s.fpk.snapshots, s.params.x_low);
}

inline void run_mfg(const ExperimentSpec& s, RunResult& res) {
    const Grid grid = s.make_grid();
    const Density m0 = make_initial_density(initial_of(s), grid, s.initial.normalize);
    MfgOptions opt;
    opt.fp_tol = s.mfg.fp_tol;
    opt.max_iters = s.mfg.max_iters;
    opt.damping = s.mfg.damping;
    opt.hjb = hjb_options(s);
    std::vector<double> history;
    bool converged = false;
    if (s.mfg.mode == MfgMode::fixed_point) {
        const MfgSolution sol = solve_mfg(s.params, grid, m0, opt);
        add_density(res, sol.m, s.mfg.snapshots, s.params.x_low);
        add_field(res.add("policy", {"t", "x", "effort"}), sol.policy.effort,
                  snapshot_indices(grid.nt(), s.mfg.snapshots));
        history = sol.history;
        converged = sol.converged;
    } else {
        const FrozenEffortSolution sol = solve_mfg_constant_effort(s.params, s.mfg.effort_value, m0, opt);
        add_density(res, sol.m, s.mfg.snapshots, s.params.x_low);
        history = sol.history;
        converged = sol.converged;
    }
    auto& hist = res.add("history", {"iter", "gap"});
    for (std::size_t j = 0; j < history.size(); ++j) {
        hist.add({static_cast<double>(j + 1), history[j]});
    }
    if (!converged) {
        res.converged = false;
        res.warnings.push_back("fixed point not reached after " + std::to_string(history.size()) + " iterations");
    }
}

inline void run_contagion(const ExperimentSpec& s, RunResult& res) {
    auto& paths = res.add("paths", {"h2", "t", "x", "threshold_effort"});
    auto& summary = res.add("summary", {"h2", "terminal_state", "baseline_terminal_state", "breakup_hard", "contagion"});
    for (double h2 : s.contagion.h2) {
        const auto rep = contagion_experiment(s.params, h2, s.contagion.x0, s.contagion.horizon, s.contagion.dt);
        for (std::size_t k = 0; k < rep.times.size(); ++k) {
            paths.add({h2, rep.times[k], rep.states[k], rep.threshold_effort[k]});
        }
        summary.add({h2, rep.terminal_state, rep.baseline_terminal_state, rep.theorem2_pass ? 1.0 : 0.0,
                     rep.theorem3_pass ? 1.0 : 0.0});
    }
}

}

/// Runs a validated spec and returns its tables; nothing is written.
inline RunResult run_experiment(const ExperimentSpec& spec) {
    validate(spec);
    RunResult res;
    switch (spec.kind) {
    case Kind::steady_states: detail::run_steady_states(spec, res); break;
    case Kind::simulate: detail::run_simulate(spec, res); break;
    case Kind::pmp: detail::run_pmp(spec, res); break;
    case Kind::hjb: detail::run_hjb(spec, res); break;
    case Kind::fpk: detail::run_fpk(spec, res); break;
    case Kind::mfg: detail::run_mfg(spec, res); break;
    case Kind::contagion: detail::run_contagion(spec, res); break;
    }
    return res;
}

/// Writes `<stem>.csv` for every table and `manifest.cfg` (the resolved config preceded by comment lines
/// with version, wall-clock and checksums) into `out_dir`.
inline RunManifest write_run(const ExperimentSpec& spec, const RunResult& res, const std::filesystem::path& out_dir,
                             double wall_clock_seconds) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    }
    RunManifest man;
    man.name = spec.name;
    man.config = to_config_text(spec);
    man.version = version;
    man.seed = spec.seed;
    man.wall_clock_seconds = wall_clock_seconds;
    for (const auto& [stem, table] : res.tables) {
        man.checksums[stem + ".csv"] = export_csv(table, out_dir / (stem + ".csv"));
    }
    std::string text = "# manifest of " + man.name + "\n# version = " + man.version +
                       "\n# wall_clock_seconds = " + format_number(wall_clock_seconds) + "\n";
    for (const auto& [file, sum] : man.checksums) {
        text += "# checksum " + file + " = fnv1a64:" + hex(sum) + "\n";
    }
    for (const auto& w : res.warnings) {
        text += "# warning: " + w + "\n";
    }
    text += man.config;
    write_file(out_dir / "manifest.cfg", text);
    return man;
}

inline RunManifest run_and_write(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                                 RunResult* result = nullptr) {
    const auto start = std::chrono::steady_clock::now();
    RunResult res = run_experiment(spec);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    RunManifest man = write_run(spec, res, out_dir, secs);
    if (result != nullptr) {
        *result = std::move(res);
    }
    return man;
}

/// Copy of a spec with grids, steps and iteration caps shrunk for smoke runs.
inline ExperimentSpec reduced(ExperimentSpec s) {
    s.grid.nx = std::min<std::size_t>(s.grid.nx, 81);
    s.grid.nt = std::min<std::size_t>(s.grid.nt, 81);
    s.steady.scan_points = std::min<std::size_t>(s.steady.scan_points, 801);
    s.steady.curve_points = std::min<std::size_t>(s.steady.curve_points, 51);
    const double coarse = s.params.T / 200.0;
    if (s.simulate.dt < coarse) {
        s.simulate.dt = coarse;
    }
    if (s.pmp.dt < coarse) {
        s.pmp.dt = coarse;
    }
    s.pmp.max_iters = std::min<std::size_t>(s.pmp.max_iters, 500);
    s.pmp.vf_n = std::min<std::size_t>(s.pmp.vf_n, 5);
    s.mfg.max_iters = std::min<std::size_t>(s.mfg.max_iters, 4);
    if (s.contagion.dt < s.contagion.horizon / 200.0) {
        s.contagion.dt = s.contagion.horizon / 200.0;
    }
    return s;
}

}

#endif
