// Command-line front end: one subcommand per experiment kind plus the figure registry.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <marriage/io/registry.hpp>

#ifndef MARRIAGE_REGISTRY_DIR
#define MARRIAGE_REGISTRY_DIR "registry"
#endif

namespace {

using namespace marriage;

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

struct Globals {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string registry = MARRIAGE_REGISTRY_DIR;
};

io::ExperimentSpec spec_for(io::Kind kind, const Globals& g) {
    io::ExperimentSpec spec;
    spec.name = std::string(io::to_string(kind));
    spec.kind = kind;
    if (!g.config.empty()) {
        spec = io::load_config(g.config, spec);
        if (spec.kind != kind) {
            throw ConfigError("config kind '" + std::string(io::to_string(spec.kind)) + "' does not match subcommand '" +
                              std::string(io::to_string(kind)) + "'");
        }
    }
    if (g.seed) {
        spec.seed = *g.seed;
    }
    io::validate(spec);
    return spec;
}

int report(const io::ExperimentSpec& spec, const io::RunManifest& man, const io::RunResult& res, const std::string& dir) {
    std::cout << spec.name << " -> " << dir << " (" << man.wall_clock_seconds << " s)\n";
    for (const auto& [file, sum] : man.checksums) {
        std::cout << "  " << file << "  fnv1a64:" << io::hex(sum) << "\n";
    }
    for (const auto& w : res.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    return res.converged ? 0 : exit_numerical;
}

int run_spec(const io::ExperimentSpec& spec, const Globals& g) {
    const std::string dir = g.out.empty() ? "out/" + spec.name : g.out;
    io::RunResult res;
    const auto man = io::run_and_write(spec, dir, &res);
    return report(spec, man, res, dir);
}

}

int main(int argc, char** argv) {
    CLI::App app{"Mean-field marriage dynamics: simulation, optimal control and equilibrium solvers"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "experiment config (key = value lines with [section] headers)");
    app.add_option("--out", g.out, "output directory (default out/<name>)");
    app.add_option("--seed", g.seed, "master seed, overrides the config");
    app.add_option("--registry", g.registry, "directory holding figNN.cfg entries");

    struct Sub {
        const char* name;
        io::Kind kind;
        const char* help;
    };
    const Sub subs[] = {
        {"steady-states", io::Kind::steady_states, "roots and stability of the uncontrolled drift"},
        {"simulate", io::Kind::simulate, "ensemble of feeling-state paths"},
        {"pmp", io::Kind::pmp, "open-loop optimal paths from the maximum principle"},
        {"hjb", io::Kind::hjb, "value function and feedback effort"},
        {"fpk", io::Kind::fpk, "population density under a fixed effort rule"},
        {"mfg", io::Kind::mfg, "mean-field equilibrium by damped fixed point"},
        {"contagion", io::Kind::contagion, "uncontrolled paths under a constant societal shift"},
    };
    io::Kind chosen = io::Kind::steady_states;
    for (const auto& s : subs) {
        auto* cmd = app.add_subcommand(s.name, s.help);
        cmd->callback([&chosen, k = s.kind] { chosen = k; });
    }
    std::string figure_id;
    auto* figure = app.add_subcommand("figure", "run one registry entry");
    figure->add_option("id", figure_id, "figure id, fig3 to fig22")->required();
    auto* list = app.add_subcommand("list-figures", "list registry entries");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (list->parsed()) {
            for (const auto& f : io::list_figures(g.registry)) {
                std::cout << f.id << "  " << io::to_string(f.spec.kind) << "  " << f.spec.description << "\n";
            }
            return 0;
        }
        if (figure->parsed()) {
            auto spec = io::load_figure(g.registry, figure_id);
            if (g.seed) {
                spec.seed = *g.seed;
            }
            return run_spec(spec, g);
        }
        return run_spec(spec_for(chosen, g), g);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const io::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return exit_config;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    }
}
