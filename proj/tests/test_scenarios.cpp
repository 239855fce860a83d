#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "nhns/scenarios.hpp"

using namespace nhns;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST(VacuumBubble, ProfileBranchValues) {
    for (double c0 : {0.45, 0.5, 0.7}) {
        for (double k : {0.5, 1.0, 1.7}) {
            const double eps = vacuum_radius(c0);
            EXPECT_EQ(remark3_profile(0.25 * eps, c0, k, k), 0.0);
            EXPECT_NEAR(remark3_profile(eps, c0, k, k), c0, 1e-14);
            EXPECT_NEAR(remark3_profile(1.5 * eps, c0, k, k), 1.0, 1e-14);
            EXPECT_EQ(remark3_profile(2.0 * eps, c0, k, k), 1.0);
        }
    }
}

TEST(VacuumBubble, ProfileIsContinuousAtBranchPoints) {
    const double c0 = 0.5, eps = vacuum_radius(c0);
    for (double rb : {0.5 * eps, eps, 1.5 * eps}) {
        const double d = 1e-9 * eps;
        EXPECT_NEAR(remark3_profile(rb - d, c0, 1.3, 0.8), remark3_profile(rb + d, c0, 1.3, 0.8), 1e-6);
    }
}

TEST(VacuumBubble, DensityRejectsUnderResolvedRadius) {
    ScenarioSpec s;
    s.nx = s.ny = 32;
    EXPECT_THROW(remark3_density(s, s.grid()), PreconditionError);
    s.c0 = 0.45;
    s.nx = s.ny = 256;
    EXPECT_NO_THROW(remark3_density(s, s.grid()));
}

TEST(VacuumBubble, ParameterValidation) {
    ScenarioSpec s;
    s.k1 = 3.0;
    try {
        s.validate();
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("k1 not in (0,2)"), std::string::npos);
    }
    s.k1 = 1.0;
    s.c0 = 1.2;
    EXPECT_THROW(s.validate(), PreconditionError);
}

TEST(VacuumMeasure, Examples) {
    const Grid g = Grid::unit_square(10);
    EXPECT_EQ(vacuum_measure(ScalarField(g, 1.0), 0.5), 0.0);
    EXPECT_NEAR(vacuum_measure(ScalarField(g, 0.0), 0.3), 1.0, 1e-14);

    ScenarioSpec s;
    s.nx = s.ny = 256;
    const Grid h = s.grid();
    const double eps = vacuum_radius(s.c0);
    const double v = vacuum_measure(remark3_density(s, h), s.c0);
    // Cells cut by the circle |x| = eps: about two cell areas per unit perimeter length.
    EXPECT_NEAR(v, std::exp(-4.0), 2.0 * h.cell_area() * 2.0 * pi * eps / h.h());
}

TEST(VacuumMeasure, MonotoneInThreshold) {
    ScenarioSpec s;
    s.nx = s.ny = 128;
    const ScalarField rho = remark3_density(s, s.grid());
    double prev = 0.0;
    for (double c = 0.05; c < 1.0; c += 0.05) {
        const double v = vacuum_measure(rho, c);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(VacuumCondition, Examples) {
    const ConditionVerdict b = check_condition_79(std::exp(-4.0), 0.5);
    EXPECT_TRUE(b.holds);
    EXPECT_EQ(b.margin, 0.0);
    EXPECT_TRUE(check_condition_79(0.3, 1.0).holds);
    EXPECT_NEAR(check_condition_79(0.3, 1.0).threshold, std::exp(-1.0), 1e-15);
    const double thr = std::exp(-1.0 / 0.49);
    EXPECT_FALSE(check_condition_79(thr + 1e-6, 0.7).holds);
}

TEST(VacuumCondition, ThresholdMonotoneInC0) {
    double prev = 0.0;
    for (double c = 0.05; c < 1.0; c += 0.01) {
        const double t = check_condition_79(0.0, c).threshold;
        EXPECT_GT(t, prev);
        prev = t;
    }
}

TEST(VacuumConditionWithConstant, FormulaAndDomain) {
    const ConditionVerdict v = check_condition_83(0.0, 0.5, 0.5, 1.0);
    EXPECT_NEAR(v.threshold, std::exp(-6.0) / 64.0, 1e-18);
    EXPECT_THROW(check_condition_83(0.0, 0.5, 0.5, 0.0), DomainError);
}

TEST(StreamFunction, ZeroGivesZeroAndBoundaryIsChecked) {
    const Grid g = Grid::unit_square(8);
    EXPECT_EQ(stream_function_velocity(NodeField(g)).max_abs(), 0.0);
    NodeField bad(g);
    bad(0, 3) = 1.0;
    EXPECT_THROW(stream_function_velocity(bad), PreconditionError);
}

TEST(StreamFunction, RandomInteriorIsDivergenceFree) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-1, 1);
    const Grid g = Grid::unit_square(32);
    for (int trial = 0; trial < 20; ++trial) {
        const MacVelocity w = stream_function_velocity(interior_stream_function(g, [&](double, double) { return d(rng); }));
        EXPECT_LE(norm(divergence(w), NormKind::linf), 1e-14 * w.max_abs() / g.h());
    }
    const auto smooth = stream_function_velocity(
        interior_stream_function(g, [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); }));
    EXPECT_LE(norm(divergence(smooth), NormKind::linf), 1e-13);
}

TEST(StreamFunction, SecondOrderAgainstAnalyticVelocity) {
    auto err = [](int n) {
        const Grid g = Grid::unit_square(n);
        const MacVelocity w = stream_function_velocity(
            interior_stream_function(g, [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); }));
        double e = 0.0;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i)
                e = std::max(e, std::abs(w.u(i, j) - pi * std::sin(pi * g.xn(i)) * std::cos(pi * g.yc(j))));
        for (int j = 0; j <= g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                e = std::max(e, std::abs(w.v(i, j) + pi * std::cos(pi * g.xc(i)) * std::sin(pi * g.yn(j))));
        return e;
    };
    const double e32 = err(32), e64 = err(64);
    EXPECT_NEAR(e32 / e64, 4.0, 0.2);
}

TEST(Build, RestScenarioIsRest) {
    const State s = build_scenario(find_scenario("rest"));
    EXPECT_EQ(s.u.max_abs(), 0.0);
    EXPECT_EQ(s.theta.min(), s.theta.max());
    EXPECT_EQ(s.rho.min(), 1.0);
    EXPECT_EQ(s.rho.max(), 1.0);
}

TEST(Build, CatalogStatesSatisfyInvariants) {
    for (const auto& e : scenario_catalog()) {
        ScenarioSpec spec = e.spec;
        const State s = build_scenario(spec);
        EXPECT_EQ(s.t, 0.0);
        EXPECT_GE(s.rho.min(), 0.0);
        EXPECT_LE(s.rho.max(), 1.0);
        EXPECT_GE(s.theta.min(), spec.theta_min - 1e-14);
        EXPECT_TRUE(s.u.satisfies_no_slip());
        EXPECT_LE(norm(divergence(s.u), NormKind::linf), 1e-12);
        EXPECT_EQ(s.bounds.rho_tilde, s.rho.max());
        EXPECT_EQ(s.bounds.theta_lower, s.theta.min());
    }
    EXPECT_THROW(find_scenario("nope"), PreconditionError);
}

TEST(Build, TemperatureHasZeroNormalDerivative) {
    ScenarioSpec s = find_scenario("uniform");
    s.nx = s.ny = 32;
    const ScalarField th = scenario_temperature(s, s.grid());
    // Cosine bumps: mirror-symmetric about each wall up to O(h^2).
    const Grid g = th.grid();
    for (int j = 0; j < g.ny; ++j) EXPECT_NEAR(th(0, j), th(1, j), 2 * pi * pi * g.hx * g.hx * s.theta_bump);
}
