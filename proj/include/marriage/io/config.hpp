#ifndef MARRIAGE_IO_CONFIG_HPP
#define MARRIAGE_IO_CONFIG_HPP

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "../errors.hpp"
#include "../grid.hpp"
#include "../model.hpp"
#include "csv.hpp"

namespace marriage::io {

enum class Kind { steady_states, simulate, pmp, hjb, fpk, mfg, contagion };
enum class EffortKind { zero, constant, policy };
enum class MfgMode { fixed_point, constant_effort };

struct GridSpec {
    double x_min = -10.0;
    double x_max = 10.0;
    std::size_t nx = 201;
    std::size_t nt = 401;
};

struct SteadySpec {
    double x_lo = -10.0;
    double x_hi = 10.0;
    double root_tol = 1e-10;
    std::size_t scan_points = 4001;
    std::size_t curve_points = 401;
};

struct SimulateSpec {
    double dt = 0.01;
    std::vector<double> x0 = {-2.0, -1.0, 1.0, 2.0};
    EffortKind effort = EffortKind::zero;
    double effort_value = 0.0;
    bool stopping = false;
    std::size_t record_stride = 1;
};

struct PmpSpec {
    double dt = 0.001;
    std::size_t max_iters = 2000;
    double tol = 1e-9;
    double relaxation = 0.5;
    std::vector<double> x0 = {0.5, 1.0, 2.0};
    bool stochastic = false;
    std::size_t record_stride = 10;
    bool vector_field = false;
    double vf_x_min = -4.0;
    double vf_x_max = 4.0;
    double vf_e_max = 4.0;
    std::size_t vf_n = 21;
};

struct HjbSpec {
    double viscosity_margin = 0.1;
    double newton_tolerance = 1e-11;
    std::size_t max_newton_iterations = 60;
    std::size_t time_stride = 1;
    bool absorbing = false;
};

struct InitialSpec {
    std::vector<double> weights = {1.0};
    std::vector<double> centers = {6.0};
    std::vector<double> stds = {1.5};
    bool normalize = true;
};

struct FpkSpec {
    EffortKind effort = EffortKind::zero;
    double effort_value = 0.0;
    std::size_t snapshots = 5;
    double mass_tolerance = 1e-6;
};

struct MfgSpec {
    MfgMode mode = MfgMode::fixed_point;
    double fp_tol = 1e-4;
    std::size_t max_iters = 50;
    double damping = 0.5;
    double effort_value = 0.0;
    std::size_t snapshots = 5;
};

struct ContagionSpec {
    double x0 = 1.0;
    double horizon = 10.0;
    double dt = 0.01;
    std::vector<double> h2 = {-2.0, -1.0, 0.0, 1.0, 2.0};
};

/// One runnable experiment: model, discretization, initial data and seed.
struct ExperimentSpec {
    std::string name = "run";
    std::string description;
    Kind kind = Kind::steady_states;
    std::uint64_t seed = 0;
    ModelParams params;
    GridSpec grid;
    SteadySpec steady;
    SimulateSpec simulate;
    PmpSpec pmp;
    HjbSpec hjb;
    InitialSpec initial;
    FpkSpec fpk;
    MfgSpec mfg;
    ContagionSpec contagion;

    Grid make_grid() const { return Grid(grid.x_min, grid.x_max, grid.nx, grid.nt, params.T); }
};

// ---------------------------------------------------------------------------
// Enum names
// ---------------------------------------------------------------------------

namespace detail {

template <class E, std::size_t N>
using Names = std::array<std::pair<E, std::string_view>, N>;

inline constexpr Names<Kind, 7> kind_names{{{Kind::steady_states, "steady_states"},
                                            {Kind::simulate, "simulate"},
                                            {Kind::pmp, "pmp"},
                                            {Kind::hjb, "hjb"},
                                            {Kind::fpk, "fpk"},
                                            {Kind::mfg, "mfg"},
                                            {Kind::contagion, "contagion"}}};
inline constexpr Names<TerminalMode, 2> g_names{{{TerminalMode::linear, "linear"}, {TerminalMode::constant, "constant"}}};
inline constexpr Names<WellBeingMode, 2> wb_names{
    {{WellBeingMode::saturating, "saturating"}, {WellBeingMode::flat, "flat"}}};
inline constexpr Names<EffortKind, 3> effort_names{
    {{EffortKind::zero, "zero"}, {EffortKind::constant, "constant"}, {EffortKind::policy, "policy"}}};
inline constexpr Names<MfgMode, 2> mfg_names{
    {{MfgMode::fixed_point, "fixed_point"}, {MfgMode::constant_effort, "constant_effort"}}};

template <class E, std::size_t N>
std::string_view name_of(const Names<E, N>& names, E v) {
    for (const auto& [e, n] : names) {
        if (e == v) {
            return n;
        }
    }
    return "?";
}

template <class E, std::size_t N>
E parse_name(const Names<E, N>& names, std::string_view text) {
    std::string options;
    for (const auto& [e, n] : names) {
        if (n == text) {
            return e;
        }
        options += (options.empty() ? "" : "|") + std::string(n);
    }
    throw ConfigError("expected one of " + options + ", got '" + std::string(text) + "'");
}

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError("expected a number, got '" + std::string(s) + "'");
    }
    return v;
}

template <class U>
U parse_unsigned(std::string_view s) {
    s = trim(s);
    U v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError("expected a nonnegative integer, got '" + std::string(s) + "'");
    }
    return v;
}

inline bool parse_bool(std::string_view s) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no") {
        return false;
    }
    throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

inline std::vector<double> parse_list(std::string_view s) {
    std::vector<double> out;
    s = trim(s);
    if (s.empty()) {
        return out;
    }
    std::size_t start = 0;
    for (;;) {
        const auto comma = s.find(',', start);
        out.push_back(parse_double(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

inline std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? ", " : "") + format_number(v[i]);
    }
    return out;
}

// Typed accessor -> text codec. Seeds share the size_t codec.
static_assert(std::is_same_v<std::uint64_t, std::size_t>);
inline void decode(std::string_view s, double& out) { out = parse_double(s); }
inline void decode(std::string_view s, std::size_t& out) { out = parse_unsigned<std::size_t>(s); }
inline void decode(std::string_view s, bool& out) { out = parse_bool(s); }
inline void decode(std::string_view s, std::string& out) { out = std::string(trim(s)); }
inline void decode(std::string_view s, std::vector<double>& out) { out = parse_list(s); }
inline void decode(std::string_view s, Kind& out) { out = parse_name(kind_names, trim(s)); }
inline void decode(std::string_view s, TerminalMode& out) { out = parse_name(g_names, trim(s)); }
inline void decode(std::string_view s, WellBeingMode& out) { out = parse_name(wb_names, trim(s)); }
inline void decode(std::string_view s, EffortKind& out) { out = parse_name(effort_names, trim(s)); }
inline void decode(std::string_view s, MfgMode& out) { out = parse_name(mfg_names, trim(s)); }

inline std::string encode(double v) { return format_number(v); }
inline std::string encode(std::size_t v) { return std::to_string(v); }
inline std::string encode(bool v) { return v ? "true" : "false"; }
inline std::string encode(const std::string& v) { return v; }
inline std::string encode(const std::vector<double>& v) { return format_list(v); }
inline std::string encode(Kind v) { return std::string(name_of(kind_names, v)); }
inline std::string encode(TerminalMode v) { return std::string(name_of(g_names, v)); }
inline std::string encode(WellBeingMode v) { return std::string(name_of(wb_names, v)); }
inline std::string encode(EffortKind v) { return std::string(name_of(effort_names, v)); }
inline std::string encode(MfgMode v) { return std::string(name_of(mfg_names, v)); }

struct Key {
    std::string section;
    std::string name;
    std::function<void(ExperimentSpec&, std::string_view)> set;
    std::function<std::string(const ExperimentSpec&)> get;
};

template <class Access>
Key key(std::string section, std::string name, Access access) {
    return Key{std::move(section), std::move(name),
               [access](ExperimentSpec& s, std::string_view text) { decode(text, access(s)); },
               [access](const ExperimentSpec& s) { return encode(access(const_cast<ExperimentSpec&>(s))); }};
}

#define MARRIAGE_KEY(section, name, expr) key(section, #name, [](ExperimentSpec& s) -> auto& { return s.expr; })

inline const std::vector<Key>& key_table() {
    static const std::vector<Key> table = {
        MARRIAGE_KEY("", name, name),
        MARRIAGE_KEY("", description, description),
        MARRIAGE_KEY("", kind, kind),
        MARRIAGE_KEY("", seed, seed),

        MARRIAGE_KEY("model", r, params.r),
        MARRIAGE_KEY("model", a, params.a),
        MARRIAGE_KEY("model", b, params.b),
        MARRIAGE_KEY("model", c_slope, params.c_slope),
        MARRIAGE_KEY("model", sigma, params.sigma),
        MARRIAGE_KEY("model", s_bar, params.s_bar),
        MARRIAGE_KEY("model", gamma, params.gamma),
        MARRIAGE_KEY("model", g_mode, params.g_mode),
        MARRIAGE_KEY("model", g_const, params.g_const),
        MARRIAGE_KEY("model", well_being, params.well_being_mode),
        MARRIAGE_KEY("model", T, params.T),
        MARRIAGE_KEY("model", kappa_h, params.kappa_h),
        MARRIAGE_KEY("model", kappa_s, params.kappa_s),
        MARRIAGE_KEY("model", x_low, params.x_low),
        MARRIAGE_KEY("model", eps, params.eps),

        MARRIAGE_KEY("grid", x_min, grid.x_min),
        MARRIAGE_KEY("grid", x_max, grid.x_max),
        MARRIAGE_KEY("grid", nx, grid.nx),
        MARRIAGE_KEY("grid", nt, grid.nt),

        MARRIAGE_KEY("steady_states", x_lo, steady.x_lo),
        MARRIAGE_KEY("steady_states", x_hi, steady.x_hi),
        MARRIAGE_KEY("steady_states", root_tol, steady.root_tol),
        MARRIAGE_KEY("steady_states", scan_points, steady.scan_points),
        MARRIAGE_KEY("steady_states", curve_points, steady.curve_points),

        MARRIAGE_KEY("simulate", dt, simulate.dt),
        MARRIAGE_KEY("simulate", x0, simulate.x0),
        MARRIAGE_KEY("simulate", effort, simulate.effort),
        MARRIAGE_KEY("simulate", effort_value, simulate.effort_value),
        MARRIAGE_KEY("simulate", stopping, simulate.stopping),
        MARRIAGE_KEY("simulate", record_stride, simulate.record_stride),

        MARRIAGE_KEY("pmp", dt, pmp.dt),
        MARRIAGE_KEY("pmp", max_iters, pmp.max_iters),
        MARRIAGE_KEY("pmp", tol, pmp.tol),
        MARRIAGE_KEY("pmp", relaxation, pmp.relaxation),
        MARRIAGE_KEY("pmp", x0, pmp.x0),
        MARRIAGE_KEY("pmp", stochastic, pmp.stochastic),
        MARRIAGE_KEY("pmp", record_stride, pmp.record_stride),
        MARRIAGE_KEY("pmp", vector_field, pmp.vector_field),
        MARRIAGE_KEY("pmp", vf_x_min, pmp.vf_x_min),
        MARRIAGE_KEY("pmp", vf_x_max, pmp.vf_x_max),
        MARRIAGE_KEY("pmp", vf_e_max, pmp.vf_e_max),
        MARRIAGE_KEY("pmp", vf_n, pmp.vf_n),

        MARRIAGE_KEY("hjb", viscosity_margin, hjb.viscosity_margin),
        MARRIAGE_KEY("hjb", newton_tolerance, hjb.newton_tolerance),
        MARRIAGE_KEY("hjb", max_newton_iterations, hjb.max_newton_iterations),
        MARRIAGE_KEY("hjb", time_stride, hjb.time_stride),
        MARRIAGE_KEY("hjb", absorbing, hjb.absorbing),

        MARRIAGE_KEY("initial", weights, initial.weights),
        MARRIAGE_KEY("initial", centers, initial.centers),
        MARRIAGE_KEY("initial", stds, initial.stds),
        MARRIAGE_KEY("initial", normalize, initial.normalize),

        MARRIAGE_KEY("fpk", effort, fpk.effort),
        MARRIAGE_KEY("fpk", effort_value, fpk.effort_value),
        MARRIAGE_KEY("fpk", snapshots, fpk.snapshots),
        MARRIAGE_KEY("fpk", mass_tolerance, fpk.mass_tolerance),

        MARRIAGE_KEY("mfg", mode, mfg.mode),
        MARRIAGE_KEY("mfg", fp_tol, mfg.fp_tol),
        MARRIAGE_KEY("mfg", max_iters, mfg.max_iters),
        MARRIAGE_KEY("mfg", damping, mfg.damping),
        MARRIAGE_KEY("mfg", effort_value, mfg.effort_value),
        MARRIAGE_KEY("mfg", snapshots, mfg.snapshots),

        MARRIAGE_KEY("contagion", x0, contagion.x0),
        MARRIAGE_KEY("contagion", horizon, contagion.horizon),
        MARRIAGE_KEY("contagion", dt, contagion.dt),
        MARRIAGE_KEY("contagion", h2, contagion.h2),
    };
    return table;
}

#undef MARRIAGE_KEY

inline const Key* find_key(std::string_view section, std::string_view name) {
    for (const auto& k : key_table()) {
        if (k.section == section && k.name == name) {
            return &k;
        }
    }
    return nullptr;
}

}

inline std::string_view to_string(Kind k) { return detail::name_of(detail::kind_names, k); }

inline Kind parse_kind(std::string_view text) { return detail::parse_name(detail::kind_names, text); }

/// Checks everything a run needs before any solver starts; messages name the violated constraint.
inline void validate(const ExperimentSpec& s) {
    s.params.validate();
    (void)s.make_grid();
    auto positive = [](double v, const std::string& what) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(what + " must be positive");
        }
    };
    auto nonempty = [](const std::vector<double>& v, const std::string& what) {
        if (v.empty()) {
            throw ConfigError(what + " must list at least one value");
        }
    };
    switch (s.kind) {
    case Kind::steady_states:
        if (!(s.steady.x_lo <= 0.0 && s.steady.x_hi >= 0.0 && s.steady.x_lo < s.steady.x_hi)) {
            throw ConfigError("steady_states range must satisfy x_lo <= 0 <= x_hi and x_lo < x_hi");
        }
        positive(s.steady.root_tol, "steady_states.root_tol");
        if (s.steady.scan_points < 3 || s.steady.curve_points < 2) {
            throw ConfigError("steady_states needs scan_points >= 3 and curve_points >= 2");
        }
        break;
    case Kind::simulate:
        positive(s.simulate.dt, "simulate.dt");
        nonempty(s.simulate.x0, "simulate.x0");
        if (s.simulate.effort == EffortKind::constant && !(s.simulate.effort_value >= 0.0)) {
            throw ConfigError("simulate.effort_value must be >= 0");
        }
        if (s.simulate.record_stride == 0) {
            throw ConfigError("simulate.record_stride must be positive");
        }
        break;
    case Kind::pmp:
        positive(s.pmp.dt, "pmp.dt");
        positive(s.pmp.tol, "pmp.tol");
        nonempty(s.pmp.x0, "pmp.x0");
        if (!(s.pmp.relaxation > 0.0 && s.pmp.relaxation <= 1.0)) {
            throw ConfigError("pmp.relaxation must lie in (0, 1]");
        }
        if (s.pmp.record_stride == 0) {
            throw ConfigError("pmp.record_stride must be positive");
        }
        if (s.pmp.vector_field && (s.pmp.vf_n < 2 || !(s.pmp.vf_x_min < s.pmp.vf_x_max) || !(s.pmp.vf_e_max > 0.0))) {
            throw ConfigError("vector field needs vf_n >= 2, vf_x_min < vf_x_max and vf_e_max > 0");
        }
        if (!s.pmp.stochastic) {
            for (double x0 : s.pmp.x0) {
                if (!(x0 > s.params.x_low + s.params.eps)) {
                    throw ConfigError("pmp.x0 violates x0 > x_low + eps (x0 = " + format_number(x0) + ")");
                }
            }
        }
        break;
    case Kind::hjb:
        if (s.hjb.time_stride == 0) {
            throw ConfigError("hjb.time_stride must be positive");
        }
        break;
    case Kind::fpk:
    case Kind::mfg: {
        const auto& in = s.initial;
        if (in.centers.empty() || in.centers.size() != in.stds.size() || in.centers.size() != in.weights.size()) {
            throw ConfigError("initial.weights, centers and stds must be nonempty lists of one length");
        }
        if (s.kind == Kind::fpk && s.fpk.effort == EffortKind::constant && !(s.fpk.effort_value >= 0.0)) {
            throw ConfigError("fpk.effort_value must be >= 0");
        }
        if (s.kind == Kind::mfg) {
            if (!(s.mfg.damping > 0.0 && s.mfg.damping <= 1.0)) {
                throw ConfigError("mfg.damping must lie in (0, 1]");
            }
            positive(s.mfg.fp_tol, "mfg.fp_tol");
            if (!(s.mfg.effort_value >= 0.0)) {
                throw ConfigError("mfg.effort_value must be >= 0");
            }
        }
        break;
    }
    case Kind::contagion:
        positive(s.contagion.horizon, "contagion.horizon");
        positive(s.contagion.dt, "contagion.dt");
        nonempty(s.contagion.h2, "contagion.h2");
        break;
    }
}

/// Parses key = value lines grouped under [section] headers; '#' starts a comment. Keys before the first
/// header are top-level (name, description, kind, seed) or model coefficients.
inline ExperimentSpec parse_config(std::string_view text, const std::string& origin = "<config>",
                                   ExperimentSpec base = {}) {
    std::set<std::pair<std::string, std::string>> seen;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";

        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(where + "unterminated section header");
            }
            section = std::string(detail::trim(line.substr(1, line.size() - 2)));
            const bool known = std::any_of(detail::key_table().begin(), detail::key_table().end(),
                                           [&](const detail::Key& k) { return k.section == section; });
            if (section.empty() || !known) {
                throw ConfigError(where + "unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(where + "expected key = value");
        }
        const std::string name(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        const detail::Key* k = detail::find_key(section, name);
        if (k == nullptr && section.empty()) {
            k = detail::find_key("model", name);
        }
        if (k == nullptr) {
            throw ConfigError(where + "unknown key '" + name + "'" + (section.empty() ? "" : " in [" + section + "]"));
        }
        if (!seen.insert({k->section, k->name}).second) {
            throw ConfigError(where + "duplicate key '" + name + "'");
        }
        try {
            k->set(base, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + name + ": " + e.what());
        }
    }
    validate(base);
    return base;
}

/// `base` supplies values for keys the file leaves out.
inline ExperimentSpec load_config(const std::filesystem::path& path, ExperimentSpec base = {}) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError("cannot read config " + path.string());
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str(), path.string(), std::move(base));
}

/// Every key with its resolved value, in table order; parse_config of the result gives back the same spec.
inline std::string to_config_text(const ExperimentSpec& s) {
    std::string out;
    std::string section;
    for (const auto& k : detail::key_table()) {
        if (k.section != section) {
            section = k.section;
            out += "\n[" + section + "]\n";
        }
        out += k.name + " = " + k.get(s) + "\n";
    }
    return out;
}

}

#endif
