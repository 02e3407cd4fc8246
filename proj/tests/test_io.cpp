#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <cctype>
#include <cstring>
#include <limits>
#include <set>
#include <sstream>

#include <marriage/io/registry.hpp>

using namespace marriage;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("marriage_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::string error_of(const std::string& text) {
    try {
        io::parse_config(text, "t.cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

const fs::path registry = MARRIAGE_REGISTRY_DIR;

}

TEST(Config, MinimalSpecFillsDefaults) {
    const auto spec = io::parse_config("kind = steady_states\nr = 2.5\n");
    EXPECT_EQ(spec.kind, io::Kind::steady_states);
    EXPECT_EQ(spec.params.r, 2.5);
    EXPECT_EQ(spec.params.a, ModelParams{}.a);
    EXPECT_EQ(spec.params.s_bar, 10.0);
    EXPECT_EQ(spec.params.x_low, 0.0);
    EXPECT_EQ(spec.params.eps, 0.1);
    EXPECT_FALSE(spec.simulate.stopping);
    EXPECT_EQ(spec.grid.nx, 201u);
    EXPECT_EQ(spec.grid.nt, 401u);
}

TEST(Config, SectionsAndComments) {
    const auto spec = io::parse_config(
        "# leading comment\nname = demo\nkind = hjb\n\n[model]\nr = 0.5   # trailing\nsigma = 0.3\n[hjb]\nabsorbing = true\n");
    EXPECT_EQ(spec.name, "demo");
    EXPECT_EQ(spec.params.sigma, 0.3);
    EXPECT_TRUE(spec.hjb.absorbing);
}

TEST(Config, ConstraintViolationsAreNamed) {
    EXPECT_NE(error_of("kind = steady_states\ns_bar = 9\n").find("s̄ ≥ 10"), std::string::npos);
    EXPECT_NE(error_of("kind = steady_states\nr = -1\n").find("r must be positive"), std::string::npos);
}

TEST(Config, ParseErrorsCarryLineNumbers) {
    EXPECT_NE(error_of("kind = hjb\n\nbogus = 1\n").find("t.cfg:3:"), std::string::npos);
    EXPECT_NE(error_of("kind = hjb\nbogus = 1\n").find("unknown key 'bogus'"), std::string::npos);
    EXPECT_NE(error_of("[nowhere]\n").find("unknown section"), std::string::npos);
    EXPECT_NE(error_of("kind = hjb\nr = 1\nr = 2\n").find("duplicate key"), std::string::npos);
    EXPECT_NE(error_of("kind = hjb\njust words\n").find("t.cfg:2:"), std::string::npos);
    EXPECT_NE(error_of("kind = hjb\nr = abc\n").find("t.cfg:2:"), std::string::npos);
    EXPECT_NE(error_of("kind = hjb\n[grid]\nsigma = 0.1\n").find("in [grid]"), std::string::npos);
    EXPECT_FALSE(error_of("kind = nonsense\n").empty());
}

TEST(Config, ResolvedTextRoundTrips) {
    for (const auto& entry : io::list_figures(registry)) {
        const std::string text = io::to_config_text(entry.spec);
        const auto back = io::parse_config(text);
        EXPECT_EQ(io::to_config_text(back), text) << entry.id;
    }
}

TEST(Config, MissingFileIsConfigError) {
    EXPECT_THROW(io::load_config("/nonexistent/path.cfg"), ConfigError);
}

TEST(Csv, EmptyTableIsHeaderOnly) {
    const auto dir = scratch("empty");
    io::Table t{{"a", "b"}, {}};
    io::export_csv(t, dir / "t.csv");
    EXPECT_EQ(slurp(dir / "t.csv"), "a,b\n");
}

TEST(Csv, SameTableSameChecksum) {
    const auto dir = scratch("same");
    io::Table t{{"x", "y"}, {{1.0, 2.5}, {-3.0, 1e-300}}};
    EXPECT_EQ(io::export_csv(t, dir / "a.csv"), io::export_csv(t, dir / "b.csv"));
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    EXPECT_EQ(io::checksum(slurp(dir / "a.csv")), io::export_csv(t, dir / "a.csv"));
}

TEST(Csv, RoundTripExact) {
    const auto dir = scratch("exact");
    io::Table one{{"v"}, {{0.1}}};
    io::export_csv(one, dir / "one.csv");
    const auto back = io::read_csv(dir / "one.csv");
    ASSERT_EQ(back.rows.size(), 1u);
    EXPECT_EQ(back.rows[0][0], 0.1);
    EXPECT_EQ(back.header, one.header);

    io::Table many{{"v"}, {}};
    std::uint64_t s = 1;
    for (int i = 0; i < 500; ++i) {
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        double v;
        const std::uint64_t bits = s >> 2;
        std::memcpy(&v, &bits, sizeof v);
        if (std::isfinite(v)) {
            many.add({v});
        }
    }
    many.add({std::numeric_limits<double>::denorm_min()});
    many.add({-0.0});
    io::export_csv(many, dir / "many.csv");
    const auto again = io::read_csv(dir / "many.csv");
    ASSERT_EQ(again.rows.size(), many.rows.size());
    for (std::size_t i = 0; i < many.rows.size(); ++i) {
        EXPECT_EQ(std::memcmp(&again.rows[i][0], &many.rows[i][0], sizeof(double)), 0) << i;
    }
}

TEST(Csv, RejectsRaggedTablesAndBadPaths) {
    io::Table ragged{{"a", "b"}, {{1.0}}};
    EXPECT_THROW(io::to_csv(ragged), ConfigError);
    io::Table ok{{"a"}, {{1.0}}};
    EXPECT_THROW(io::export_csv(ok, "/nonexistent/dir/x.csv"), io::IoError);
}

TEST(Csv, KnownChecksum) {
    EXPECT_EQ(io::checksum(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(io::hex(io::checksum("a")), "af63dc4c8601ec8c");
}

TEST(Registry, CoversFiguresThreeToTwentyTwo) {
    const auto figs = io::list_figures(registry);
    ASSERT_EQ(figs.size(), 20u);
    for (int n = 3; n <= 22; ++n) {
        const auto id = io::canonical_figure_id(std::to_string(n));
        EXPECT_EQ(figs[static_cast<std::size_t>(n - 3)].id, id);
        EXPECT_EQ(figs[static_cast<std::size_t>(n - 3)].spec.name, id);
    }
    EXPECT_EQ(io::canonical_figure_id("fig7"), "fig07");
    EXPECT_EQ(io::canonical_figure_id("FIG07"), "fig07");
    EXPECT_THROW(io::canonical_figure_id("fig2"), ConfigError);
    EXPECT_THROW(io::canonical_figure_id("fig23"), ConfigError);
    EXPECT_THROW(io::canonical_figure_id("figx"), ConfigError);
}

TEST(Registry, UnstatedValuesAreAnnotated) {
    for (const auto& entry : io::list_figures(registry)) {
        EXPECT_NE(slurp(entry.path).find("# choice:"), std::string::npos) << entry.id;
    }
}

TEST(Registry, SmokeRunsAreReproducible) {
    for (const auto& entry : io::list_figures(registry)) {
        const auto spec = io::reduced(entry.spec);
        const auto a_dir = scratch(entry.id + "_a");
        const auto b_dir = scratch(entry.id + "_b");
        io::RunResult res;
        const auto a = io::run_and_write(spec, a_dir, &res);
        const auto b = io::run_and_write(spec, b_dir);
        EXPECT_FALSE(a.checksums.empty()) << entry.id;
        EXPECT_EQ(a.checksums, b.checksums) << entry.id;
        for (const auto& [file, sum] : a.checksums) {
            EXPECT_EQ(io::checksum(slurp(a_dir / file)), sum) << entry.id << " " << file;
            const auto text = slurp(a_dir / file);
            ASSERT_FALSE(text.empty());
            EXPECT_EQ(text.back(), '\n');
            EXPECT_TRUE(std::isalpha(static_cast<unsigned char>(text.front()))) << entry.id << " " << file;
        }
        const auto manifest = slurp(a_dir / "manifest.cfg");
        EXPECT_NE(manifest.find("# version = " + std::string(io::version)), std::string::npos);
        EXPECT_NE(manifest.find("fnv1a64:"), std::string::npos);

        // The manifest is itself a config; running it reproduces every byte.
        const auto rerun_dir = scratch(entry.id + "_rerun");
        const auto rerun = io::run_and_write(io::load_config(a_dir / "manifest.cfg"), rerun_dir);
        EXPECT_EQ(rerun.checksums, a.checksums) << entry.id;
    }
}

TEST(Registry, FullResolutionExamples) {
    const auto dir = scratch("full");
    io::RunResult res;
    io::run_registry_entry(registry, "fig3", dir / "fig03", &res);
    const auto* roots = res.find("roots");
    ASSERT_NE(roots, nullptr);
    ASSERT_EQ(roots->rows.size(), 1u);
    EXPECT_NEAR(roots->rows[0][0], 0.0, 1e-10);

    io::run_registry_entry(registry, "fig5", dir / "fig05", &res);
    const auto* terminal = res.find("terminal");
    ASSERT_NE(terminal, nullptr);
    EXPECT_EQ(terminal->rows.size(), 10u);
    for (const auto& row : terminal->rows) {
        EXPECT_LT(std::abs(row[2]), 0.01);
    }

    io::run_registry_entry(registry, "fig20", dir / "fig20", &res);
    EXPECT_TRUE(res.converged);
    const auto* density = res.find("density");
    ASSERT_NE(density, nullptr);
    std::set<double> times;
    for (const auto& row : density->rows) {
        times.insert(row[0]);
    }
    ASSERT_EQ(times.size(), 5u);
    std::vector<double> t(times.begin(), times.end());
    for (std::size_t i = 1; i < t.size(); ++i) {
        EXPECT_NEAR(t[i] - t[i - 1], t[1] - t[0], 1e-9);
    }
}

TEST(Registry, SeedChangesStochasticOutput) {
    auto spec = io::reduced(io::load_figure(registry, "fig8"));
    const auto a = io::run_and_write(spec, scratch("seed_a"));
    spec.seed += 1;
    const auto b = io::run_and_write(spec, scratch("seed_b"));
    EXPECT_NE(a.checksums.at("trajectories.csv"), b.checksums.at("trajectories.csv"));
}
