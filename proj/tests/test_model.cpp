#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <marriage/model.hpp>

#include "oracles.hpp"

using namespace marriage;

namespace {

ModelParams with_r(double r) {
    ModelParams p;
    p.r = r;
    return p;
}

}

TEST(Model, HAtOriginVanishes) { EXPECT_EQ(h_eval(with_r(2.5), 0.0), 0.0); }

TEST(Model, HReferenceValues) {
    // 1 - tanh(1) and -1 + tanh(2) to 16 digits.
    EXPECT_NEAR(h_eval(with_r(1.0), 1.0), 0.23840584404423515, 1e-15);
    EXPECT_NEAR(h_eval(with_r(0.5), -2.0), -0.0359724199241831, 1e-15);
    EXPECT_DOUBLE_EQ(h_eval(with_r(0.5), -2.0), -h_eval(with_r(0.5), 2.0));
}

TEST(Model, HIsOdd) {
    for (double r : {0.1, 0.5, 1.0, 2.5}) {
        for (double x : oracle::uniform_draws(50, -8, 8)) {
            EXPECT_EQ(h_eval(with_r(r), -x), -h_eval(with_r(r), x));
        }
    }
}

TEST(Model, HPrimeMatchesCentralDifference) {
    const auto p = with_r(0.7);
    for (double x : {-3.0, -0.4, 0.0, 1.1, 2.9}) {
        const double fd = (h_eval(p, x + 1e-6) - h_eval(p, x - 1e-6)) / 2e-6;
        EXPECT_NEAR(h_prime(p, x), fd, 1e-8);
    }
}

TEST(Model, DriftExamples) {
    ModelParams p = with_r(0.5);
    EXPECT_EQ(drift(p, 0.0, 0.0), 0.0);
    EXPECT_EQ(drift(p, 0.0, 1.0), 10.0);
    EXPECT_NEAR(drift(p, oracle::positive_root(0.5), 0.0), 0.0, 1e-12);
    EXPECT_NEAR(drift(p, 1.915, 0.0), 0.0, 1e-4);
    EXPECT_THROW(drift(p, 0.0, -0.1), ConfigError);
}

TEST(Model, DriftEffortIsExactlyAdditive) {
    const auto p = with_r(0.5);
    for (double x : oracle::uniform_draws(40, -5, 5)) {
        for (double e : {0.0, 0.25, 3.0}) {
            EXPECT_EQ(drift(p, x, e) - drift(p, x, 0.0), p.a * e);
        }
    }
}

TEST(Model, WellBeingExamples) {
    ModelParams p;
    EXPECT_EQ(well_being(p, 0.0), 0.0);
    EXPECT_NEAR(well_being(p, 60.0), 10.0, 1e-12);
    p.s_bar = 12.0;
    EXPECT_NEAR(well_being(p, 1.0), 8.321205588285577, 1e-12);
}

TEST(Model, WellBeingMonotoneAndConcave) {
    ModelParams p;
    const auto xs = oracle::uniform_draws(200, -6, 6, 7);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double lo = std::min(xs[i], xs[i + 1]);
        const double hi = std::max(xs[i], xs[i + 1]);
        EXPECT_LE(well_being(p, lo, 0.3), well_being(p, hi, 0.3));
        const double mid = 0.5 * (lo + hi);
        EXPECT_GE(well_being(p, mid), 0.5 * (well_being(p, lo) + well_being(p, hi)) - 1e-9);
    }
}

TEST(Model, CostAndDerivatives) {
    EXPECT_EQ(cost(0.0), 0.0);
    EXPECT_EQ(cost(2.0), 2.0);
    EXPECT_EQ(cost_prime(2.0), 2.0);
    EXPECT_EQ(cost_second(5.0), 1.0);
    EXPECT_EQ(cost_prime(one_shot_effort().e_floor), 0.0);
    EXPECT_EQ(one_shot_effort().e_floor, 0.0);
    EXPECT_THROW(cost(-1.0), ConfigError);
    EXPECT_THROW(cost_prime(-1.0), ConfigError);
}

TEST(Model, LegendreExamples) {
    EXPECT_EQ(legendre(-1.0), 0.0);
    EXPECT_EQ(legendre_prime(-1.0), 0.0);
    EXPECT_EQ(legendre(0.0), 0.0);
    EXPECT_EQ(legendre(2.0), 2.0);
    EXPECT_EQ(legendre_prime(2.0), 2.0);
    EXPECT_NEAR(legendre(2.0), oracle::brute_legendre(2.0), 1e-6);
}

TEST(Model, LegendreFenchelEqualityAndFloor) {
    for (double z : oracle::uniform_draws(300, -20, 20, 99)) {
        const double e = legendre_prime(z);
        EXPECT_NEAR(legendre(z), z * e - cost(e), 1e-12 * std::max(1.0, z * z));
        EXPECT_GE(e, one_shot_effort().e_floor);
    }
}

TEST(Model, LegendreConvexNondecreasing) {
    double prev = legendre(0.0);
    for (int k = 1; k <= 100; ++k) {
        const double z = 0.05 * k;
        EXPECT_GE(legendre(z), prev);
        prev = legendre(z);
        EXPECT_LE(legendre(z), 0.5 * (legendre(z - 0.05) + legendre(z + 0.05)) + 1e-15);
    }
}

TEST(Model, MeanFieldShift) {
    std::vector<double> xs(201), sym(201), gauss(201);
    for (int i = 0; i < 201; ++i) {
        xs[i] = -10.0 + 0.1 * i;
        sym[i] = std::exp(-0.5 * xs[i] * xs[i]);
        gauss[i] = std::exp(-0.5 * std::pow((xs[i] - 6.0) / 1.5, 2));
    }
    ModelParams p;
    EXPECT_EQ(mean_field_shift(xs, gauss, p).h2, 0.0);
    EXPECT_EQ(mean_field_shift(xs, gauss, p).s2, 0.0);
    p.kappa_h = 1.0;
    EXPECT_NEAR(mean_field_shift(xs, sym, p).h2, 0.0, 1e-14);
    p.kappa_h = 0.3;
    EXPECT_NEAR(mean_field_shift(xs, gauss, p).h2, 1.8, 0.02);
    std::vector<double> zero(201, 0.0);
    EXPECT_THROW(mean_field_shift(xs, zero, p), NumericalError);
}

TEST(Model, TerminalEffort) {
    ModelParams p;
    for (double x : {-3.0, 0.0, 4.0}) {
        EXPECT_EQ(terminal_effort(p, x), 0.0);
    }
    p.g_mode = TerminalMode::linear;
    p.gamma = 0.1;
    EXPECT_NEAR(terminal_effort(p, 1.0), 1.0, 1e-15);
    p.gamma = 0.0;
    EXPECT_EQ(terminal_effort(p, 1.0), 0.0);
}

TEST(Model, ValidateNamesConstraint) {
    ModelParams p;
    p.s_bar = 9.0;
    try {
        p.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("s̄ ≥ 10"), std::string::npos);
    }
    p = ModelParams{};
    p.r = -1.0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = ModelParams{};
    p.sigma = -0.1;
    EXPECT_THROW(p.validate(), ConfigError);
    EXPECT_NO_THROW(ModelParams{}.validate());
}
