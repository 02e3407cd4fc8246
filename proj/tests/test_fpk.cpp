#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <marriage/fpk.hpp>
#include <marriage/hjb.hpp>
#include <marriage/simulate.hpp>

#include "oracles.hpp"

using namespace marriage;

namespace {

ModelParams baseline(double sigma = 0.3) {
    ModelParams p;
    p.r = 0.5;
    p.sigma = sigma;
    return p;
}

std::vector<WeightedBump> pair_at(double left, double right, double sd) {
    return {{0.5, left, sd}, {0.5, right, sd}};
}

std::size_t local_maxima(std::span<const double> row, double floor) {
    std::size_t count = 0;
    for (std::size_t i = 1; i + 1 < row.size(); ++i) {
        if (row[i] > floor && row[i] > row[i - 1] && row[i] >= row[i + 1]) {
            ++count;
        }
    }
    return count;
}

void expect_positive_and_conserved(const Density& m) {
    const auto& g = m.grid();
    const double mass0 = slice_mass(g, m.m.row(0));
    for (std::size_t k = 0; k < g.nt(); ++k) {
        EXPECT_NEAR(slice_mass(g, m.m.row(k)), mass0, 1e-6 * mass0);
    }
    EXPECT_GE(*std::min_element(m.m.values().begin(), m.m.values().end()), -1e-12);
}

}

TEST(InitialDensity, GaussianMoments) {
    const Grid g(-10, 10, 201, 401, 10.0);
    const auto m = make_initial_density(GaussianBump{6.0, 1.5}, g);
    const auto s = density_stats(m, 0);
    // The right tail is cut at x_max, so compare with the truncated normal.
    const auto ref = oracle::truncated_normal_moments(6.0, 1.5, g.x_min(), g.x_max());
    EXPECT_NEAR(s.mean, ref.mean, 1e-3);
    EXPECT_NEAR(s.variance, ref.variance, 1e-3);
    EXPECT_NEAR(s.mean, 6.0, 0.05);
    EXPECT_NEAR(s.mass, 1.0, 1e-9);
}

TEST(InitialDensity, GaussianMomentsAwayFromBoundary) {
    const Grid g(-10, 10, 201, 401, 10.0);
    const auto m = make_initial_density(GaussianBump{1.0, 1.5}, g);
    const auto s = density_stats(m, 0);
    EXPECT_NEAR(s.mean, 1.0, 1e-3);
    EXPECT_NEAR(s.variance, 2.25, 1e-3);
}

TEST(InitialDensity, Mixtures) {
    const Grid g(-10, 10, 401, 401, 10.0);
    const auto m = make_initial_density(pair_at(3.0, 6.0, 1.5), g);
    const auto ref = oracle::mixture_moments({0.5, 0.5}, {3.0, 6.0}, {1.5, 1.5});
    EXPECT_NEAR(density_stats(m, 0).mean, ref.mean, 0.02);
    const auto sharp = make_initial_density(pair_at(-5.0, 5.0, 0.05), Grid(-10, 10, 2001, 11, 20.0));
    EXPECT_NEAR(density_stats(sharp, 0).mean, 0.0, 1e-10);
    EXPECT_NEAR(density_stats(sharp, 0).mass, 1.0, 1e-9);
    EXPECT_EQ(local_maxima(sharp.m.row(0), 1e-3), 2u);
}

TEST(InitialDensity, Unnormalized) {
    const Grid g(-10, 10, 2001, 11, 20.0);
    const auto m = make_initial_density(pair_at(-5.0, 5.0, 0.05), g, false);
    EXPECT_FALSE(m.normalized);
    EXPECT_NEAR(density_stats(m, 0).mass, 1.0, 1e-6);
    const auto heavy = make_initial_density(std::vector<WeightedBump>{{2.0, 0.0, 1.0}}, g, false);
    EXPECT_NEAR(density_stats(heavy, 0).mass, 2.0, 1e-9);
}

TEST(InitialDensity, Rejections) {
    const Grid g(-10, 10, 201, 401, 10.0);
    EXPECT_THROW(make_initial_density(GaussianBump{0.0, 0.0}, g), ConfigError);
    EXPECT_THROW(make_initial_density(std::vector<WeightedBump>{{-1.0, 0.0, 1.0}}, g), ConfigError);
    EXPECT_THROW(make_initial_density(GaussianBump{100.0, 0.1}, g), ConfigError);
}

TEST(DensityStats, SymmetricMeanIsZero) {
    const Grid g(-10, 10, 201, 401, 10.0);
    const auto m = make_initial_density(pair_at(-2.0, 2.0, 0.7), g);
    EXPECT_NEAR(density_stats(m, 0).mean, 0.0, 1e-10);
    EXPECT_NEAR(density_stats(m, 0, 0.0).mass_below, 0.5 + 0.5 * m.m(0, 100) * g.dx(), 1e-9);
    EXPECT_THROW(density_stats(m, g.nt()), ConfigError);
}

TEST(Fpk, SpikeAtStableStateStays) {
    const ModelParams p = baseline(0.0);
    const Grid g(-10, 10, 401, 1001, 10.0);
    const double xs = oracle::positive_root(0.5);
    const auto node = static_cast<std::size_t>(std::lround((xs - g.x_min()) / g.dx()));
    Density m0{Field(g), true};
    m0.m(0, node) = 1.0 / g.dx();
    const auto m = solve_fpk_constant_effort(p, 0.0, m0);
    expect_positive_and_conserved(m);
    EXPECT_LT(std::abs(density_stats(m, g.nt() - 1).mean - density_stats(m, 0).mean), g.dx());
}

TEST(Fpk, RegistryMixtureStaysBimodal) {
    const ModelParams p = baseline();
    const Grid g(-10, 10, 2001, 401, 10.0);
    const auto m0 = make_initial_density(pair_at(-5.0, 5.0, 0.05), g);
    const auto m = solve_fpk_constant_effort(p, 0.0, m0);
    expect_positive_and_conserved(m);
    const auto last = m.m.row(g.nt() - 1);
    EXPECT_GE(local_maxima(last, 1e-3), 2u);
    // Nothing starts in the middle, so central mass can only grow from zero; it stays a small tail.
    EXPECT_EQ(mass_between(m, 0, -1.0, 1.0), 0.0);
    EXPECT_LT(mass_between(m, g.nt() - 1, -1.0, 1.0), 0.01);
    EXPECT_NEAR(density_stats(m, g.nt() - 1).mean, 0.0, 1e-9);
}

TEST(Fpk, ConservesUnderPolicy) {
    ModelParams p = baseline();
    p.g_mode = TerminalMode::linear;
    p.gamma = 0.1;
    const Grid g(-10, 10, 201, 401, 10.0);
    const auto pol = extract_policy(solve_hjb(p, g), p);
    const auto m0 = make_initial_density(GaussianBump{6.0, 1.5}, g);
    expect_positive_and_conserved(solve_fpk(p, pol, m0));
    std::vector<double> h2(g.nt(), -1.5);
    expect_positive_and_conserved(solve_fpk(p, pol, m0, h2));
}

TEST(Fpk, PureDiffusionVarianceGrowsLinearly) {
    const double sigma = 0.4;
    const Grid g(-10, 10, 801, 1001, 5.0);
    auto m = make_initial_density(GaussianBump{0.0, 0.5}, g);
    march_density(m, [](std::size_t, std::size_t) { return 0.0; }, 0.5 * sigma * sigma);
    const double v0 = density_stats(m, 0).variance;
    for (std::size_t k = 100; k < g.nt(); k += 100) {
        const double growth = density_stats(m, k).variance - v0;
        EXPECT_NEAR(growth, sigma * sigma * g.t(k), 0.02 * sigma * sigma * g.t(k)) << "t = " << g.t(k);
    }
}

TEST(Fpk, AgreesWithParticles) {
    const ModelParams p = baseline();
    const Grid g(-4, 6, 1001, 1001, 5.0);
    const auto m = solve_fpk_constant_effort(p, 0.0, make_initial_density(GaussianBump{1.0, 0.5}, g));
    const std::size_t n = 20000;
    std::vector<double> x0(n);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(1.0, 0.5);
    for (auto& x : x0) {
        x = normal(rng);
    }
    SimulationOptions so;
    so.dt = 0.005;
    so.n_steps = 1000;
    so.seed = 5;
    so.record_stride = 200;
    const auto ens = simulate_ensemble(p, x0, ZeroEffort{}, so);
    for (std::size_t r : {1u, 3u, 5u}) {
        double mean = 0.0, sq = 0.0;
        for (const auto& path : ens.states) {
            mean += path[r];
        }
        mean /= static_cast<double>(n);
        for (const auto& path : ens.states) {
            sq += (path[r] - mean) * (path[r] - mean);
        }
        const double var = sq / static_cast<double>(n - 1);
        const auto k = static_cast<std::size_t>(std::llround(ens.times[r] / g.dt()));
        const auto s = density_stats(m, k);
        EXPECT_LT(std::abs(s.mean - mean), 3.0 * std::sqrt(var / n)) << "t = " << ens.times[r];
        EXPECT_LT(std::abs(s.variance - var), 3.0 * var * std::sqrt(2.0 / (n - 1))) << "t = " << ens.times[r];
    }
}

TEST(Fpk, RejectsMismatchedInputs) {
    const ModelParams p = baseline();
    const Grid g(-10, 10, 201, 401, 10.0);
    const Grid other(-10, 10, 101, 401, 10.0);
    const auto m0 = make_initial_density(GaussianBump{0.0, 1.0}, g);
    EXPECT_THROW(solve_fpk(p, Policy{Field(other)}, m0), ConfigError);
    EXPECT_THROW(solve_fpk(p, Policy{Field(g, -1.0)}, m0), ConfigError);
    EXPECT_THROW(solve_fpk_constant_effort(p, 0.0, m0, std::vector<double>(3, 0.0)), ConfigError);
}
