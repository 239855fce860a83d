#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "nhns/dynamics.hpp"
#include "nhns/scenarios.hpp"

using namespace nhns;

namespace {

constexpr double pi = std::numbers::pi;

ScalarField random_field(const Grid& g, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    ScalarField f(g);
    for (double& x : f.values()) x = d(rng);
    return f;
}

/// Low-mode stream function sum_{m,n<=3} a_mn sin(m pi x) sin(n pi y) on the grid's box.
MacVelocity random_flow(const Grid& g, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> d(0.0, 1.0);
    double a[4][4];
    for (auto& row : a)
        for (double& x : row) x = d(rng) * scale;
    return stream_function_velocity(interior_stream_function(g, [&](double x, double y) {
        const double xi = (x - g.x0) / g.lx, eta = (y - g.y0) / g.ly;
        double s = 0.0;
        for (int m = 1; m <= 3; ++m)
            for (int n = 1; n <= 3; ++n) s += a[m][n] * std::sin(m * pi * xi) * std::sin(n * pi * eta);
        return s;
    }));
}

State random_state(const Grid& g, std::mt19937_64& rng) {
    ScalarField rho = random_field(g, rng, 0.0, 1.0);
    ScalarField theta = random_field(g, rng, 1.0, 3.0);
    return make_state(std::move(rho), random_flow(g, rng, 0.2), std::move(theta));
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
    return m;
}

}  // namespace

TEST(Coefficients, PowerLaws) {
    const Grid g = Grid::unit_square(4);
    const ScalarField a = mu_of(ScalarField(g, 1.0), 0.7), b = kappa_of(ScalarField(g, 5.0), 0.0),
                      c = mu_of(ScalarField(g, 4.0), 0.5);
    for (double x : a.values()) EXPECT_EQ(x, 1.0);
    for (double x : b.values()) EXPECT_EQ(x, 1.0);
    for (double x : c.values()) EXPECT_DOUBLE_EQ(x, 2.0);
    ScalarField bad(g, 1.0);
    bad(1, 2) = 0.0;
    EXPECT_THROW(mu_of(bad, 0.5), DomainError);
    EXPECT_THROW(kappa_of(bad, 0.5), DomainError);
}

TEST(Cfl, Examples) {
    PhysParams pp;
    const Grid g = Grid::unit_square(100);
    State s = make_state(ScalarField(g, 1.0), MacVelocity(g), ScalarField(g, 1.0));
    EXPECT_EQ(cfl_dt(s, pp), 0.01);
    s.u.u(50, 50) = 1.0;
    EXPECT_DOUBLE_EQ(cfl_dt(s, pp), 0.004);
    // Both components active: the per-direction rates add.
    s.u.v(20, 20) = -1.0;
    EXPECT_DOUBLE_EQ(cfl_dt(s, pp), 0.002);
}

TEST(Params, Validation) {
    PhysParams pp;
    EXPECT_NO_THROW(pp.validate());
    pp.alpha = -1;
    EXPECT_THROW(pp.validate(), PreconditionError);
    pp = {};
    pp.rho_floor = 1e-3;
    EXPECT_THROW(pp.validate(), PreconditionError);
    pp = {};
    pp.cv = 2;
    EXPECT_THROW(pp.validate(), PreconditionError);
}

TEST(ViscousOperator, SymmetricAndDissipative) {
    std::mt19937_64 rng(31);
    const Grid g = Grid::make(12, 9, 0, 0, 1.2, 0.7);
    const ScalarField mu = random_field(g, rng, 0.5, 2.0);
    ViscousOperator op(mu);
    auto random_vel = [&] {
        std::uniform_real_distribution<double> d(-1, 1);
        MacVelocity w(g);
        for (double& x : w.u_values()) x = d(rng);
        for (double& x : w.v_values()) x = d(rng);
        w.enforce_no_slip();
        return w;
    };
    const MacVelocity a = random_vel(), b = random_vel();
    const auto pa = ViscousOperator::pack(a), pb = ViscousOperator::pack(b);
    std::vector<double> la(pa.size()), lb(pb.size());
    op.apply(pa, la);
    op.apply(pb, lb);
    double ab = 0, ba = 0, aa = 0;
    for (std::size_t k = 0; k < pa.size(); ++k) {
        ab += la[k] * pb[k];
        ba += lb[k] * pa[k];
        aa += la[k] * pa[k];
    }
    EXPECT_NEAR(ab, ba, 1e-11 * std::abs(ab));
    // <L u, u> hx hy = -integral 2 mu |D|^2
    const double diss = 2.0 * weighted_integrate(mu, deformation_norm_sq(a));
    EXPECT_NEAR(aa * g.cell_area(), -diss, 1e-11 * diss);
}

TEST(Step, RestStateIsFixedPoint) {
    std::mt19937_64 rng(12);
    const Grid g = Grid::make(24, 24, -1, -1, 2, 2);
    const State s0 = make_state(random_field(g, rng, 0.0, 1.0), MacVelocity(g), ScalarField(g, 1.7));
    PhysParams pp;
    const State s1 = step(s0, pp, 0.01);
    EXPECT_EQ(s1.u.max_abs(), 0.0);
    EXPECT_LE(max_abs_diff(s1.rho, s0.rho), 0.0);
    EXPECT_LE(max_abs_diff(s1.theta, s0.theta), 10 * pp.solver.rel_tol * 1.7);
    EXPECT_NEAR(s1.t, 0.01, 1e-15);
}

TEST(Step, ConservesMassAndKeepsBounds) {
    std::mt19937_64 rng(13);
    PhysParams pp;
    for (int trial = 0; trial < 10; ++trial) {
        const Grid g = Grid::unit_square(32);
        const State s0 = random_state(g, rng);
        const double dt = std::min(cfl_dt(s0, pp), 0.5 / outflow_courant(s0.u, 1.0));
        const State s1 = step(s0, pp, dt);
        EXPECT_LE(std::abs(integrate(s1.rho) - integrate(s0.rho)), 1e-13 * integrate(s0.rho));
        EXPECT_GE(s1.rho.min(), -1e-12);
        EXPECT_LE(s1.rho.max(), s0.bounds.rho_tilde + 1e-12);
        EXPECT_GE(s1.theta.min(), s0.bounds.theta_lower - 1e-10);
        EXPECT_TRUE(s1.u.satisfies_no_slip());
    }
}

TEST(Step, PressureGaugeAndDivergence) {
    std::mt19937_64 rng(14);
    PhysParams pp;
    for (int trial = 0; trial < 10; ++trial) {
        const Grid g = Grid::unit_square(32);
        State s0 = random_state(g, rng);
        for (double& r : s0.rho.values()) r = 0.2 + 0.8 * r;  // keep the projection well conditioned
        s0.bounds = {s0.rho.max(), s0.theta.min()};
        const State s1 = step(s0, pp, cfl_dt(s0, pp));
        const ScalarField mu = mu_of(s1.theta, pp.alpha);
        double gauge = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k) {
            gauge += s1.p.values()[k] / mu.values()[k] * g.cell_area();
            scale += std::abs(s1.p.values()[k]) / mu.values()[k] * g.cell_area();
        }
        EXPECT_LE(std::abs(gauge), 1e-10 * std::max(1.0, scale));
        const double div = norm(divergence(s1.u), NormKind::linf);
        EXPECT_LE(div, 10 * pp.solver.rel_tol * s1.u.max_abs() / g.h());
    }
}

TEST(Step, KineticEnergyNonIncreasingWithConstantCoefficients) {
    std::mt19937_64 rng(15);
    PhysParams pp;
    pp.alpha = 0.0;
    pp.beta = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Grid g = Grid::unit_square(32);
        const State s0 = random_state(g, rng);
        const double dt = std::min(pp.dt_max, 0.5 / outflow_courant(s0.u, 1.0));
        StepReport rep;
        (void)step(s0, pp, dt, &rep);
        EXPECT_LE(rep.ke_after, rep.ke_before) << "trial " << trial;
    }
}

TEST(Step, RejectsNonPositiveStepAndCflViolation) {
    const Grid g = Grid::unit_square(16);
    const State s = make_state(ScalarField(g, 1.0), MacVelocity(g), ScalarField(g, 1.0));
    EXPECT_THROW(step(s, PhysParams{}, 0.0), PreconditionError);
    std::mt19937_64 rng(2);
    const State f = make_state(ScalarField(g, 1.0), random_flow(g, rng, 1.0), ScalarField(g, 1.0));
    EXPECT_THROW(step(f, PhysParams{}, 5.0 / outflow_courant(f.u, 1.0)), CflError);
}

TEST(Run, ZeroDurationReturnsInitialState) {
    std::mt19937_64 rng(16);
    const State s0 = random_state(Grid::unit_square(16), rng);
    int calls = 0;
    const State s1 = run(s0, PhysParams{}, 0.0, [&](const State&, const StepReport*) { ++calls; });
    EXPECT_EQ(calls, 1);
    EXPECT_EQ(s1.t, 0.0);
    EXPECT_EQ(s1.rho.values(), s0.rho.values());
    EXPECT_EQ(s1.u.u_values(), s0.u.u_values());
}

TEST(Run, RestStateStaysAtRest) {
    const ScenarioSpec spec = find_scenario("rest");
    const State s0 = build_scenario(spec);
    PhysParams pp;
    const State s1 = run(s0, pp, 0.2);
    EXPECT_NEAR(s1.t, 0.2, 1e-12);
    EXPECT_EQ(s1.u.max_abs(), 0.0);
    EXPECT_LE(max_abs_diff(s1.theta, s0.theta), 10 * pp.solver.rel_tol);
    EXPECT_LE(max_abs_diff(s1.rho, s0.rho), 0.0);
}

TEST(Run, ObserverWindowsSumStepReports) {
    const ScenarioSpec spec = [] {
        ScenarioSpec s = find_scenario("uniform");
        s.nx = s.ny = 16;
        s.amplitude = 0.1;
        return s;
    }();
    PhysParams pp;
    double dt_sum = 0.0;
    int observed = 0;
    const State s1 = run(build_scenario(spec), pp, 0.1, [&](const State&, const StepReport* r) {
        ++observed;
        if (r) dt_sum += r->dt;
    }, 3);
    EXPECT_NEAR(dt_sum, 0.1, 1e-12);
    EXPECT_NEAR(s1.t, 0.1, 1e-12);
    EXPECT_GE(observed, 2);
}
