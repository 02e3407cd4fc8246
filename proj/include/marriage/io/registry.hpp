#ifndef MARRIAGE_IO_REGISTRY_HPP
#define MARRIAGE_IO_REGISTRY_HPP

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "run.hpp"

namespace marriage::io {

struct FigureEntry {
    std::string id;
    std::filesystem::path path;
    ExperimentSpec spec;
};

/// "fig7", "7" and "fig07" all name fig07.
inline std::string canonical_figure_id(std::string id) {
    std::transform(id.begin(), id.end(), id.begin(), [](unsigned char c) { return std::tolower(c); });
    if (id.rfind("fig", 0) == 0) {
        id = id.substr(3);
    }
    if (id.empty() || id.size() > 2 || !std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw ConfigError("unknown figure id '" + id + "'");
    }
    const int n = std::stoi(id);
    if (n < 3 || n > 22) {
        throw ConfigError("unknown figure id 'fig" + id + "' (registry covers fig03 to fig22)");
    }
    return (n < 10 ? "fig0" : "fig") + std::to_string(n);
}

inline std::vector<FigureEntry> list_figures(const std::filesystem::path& registry_dir) {
    std::vector<FigureEntry> out;
    if (!std::filesystem::is_directory(registry_dir)) {
        throw ConfigError("registry directory " + registry_dir.string() + " not found");
    }
    for (const auto& entry : std::filesystem::directory_iterator(registry_dir)) {
        if (entry.path().extension() != ".cfg") {
            continue;
        }
        out.push_back({entry.path().stem().string(), entry.path(), load_config(entry.path())});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

inline ExperimentSpec load_figure(const std::filesystem::path& registry_dir, const std::string& figure_id) {
    const auto path = registry_dir / (canonical_figure_id(figure_id) + ".cfg");
    if (!std::filesystem::exists(path)) {
        throw ConfigError("no registry entry " + path.string());
    }
    return load_config(path);
}

inline RunManifest run_registry_entry(const std::filesystem::path& registry_dir, const std::string& figure_id,
                                      const std::filesystem::path& out_dir, RunResult* result = nullptr) {
    return run_and_write(load_figure(registry_dir, figure_id), out_dir, result);
}

}

#endif
