#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "nhns/linsolve.hpp"

using namespace nhns;

namespace {

constexpr double pi = std::numbers::pi;

ScalarField random_field(const Grid& g, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    ScalarField f(g);
    for (double& x : f.values()) x = d(rng);
    return f;
}

double mean(const ScalarField& f) {
    double s = 0.0;
    for (double x : f.values()) s += x;
    return s / static_cast<double>(f.size());
}

double poisson_error(int n) {
    const Grid g = Grid::unit_square(n);
    const ScalarField a(g, 1.0);
    const ScalarField rhs = ScalarField::sample(g, [](double x, double) { return pi * pi * std::cos(pi * x); });
    const ScalarField p = solve_varcoef_poisson(a, rhs, SolverParams{});
    const ScalarField exact = ScalarField::sample(g, [](double x, double) { return std::cos(pi * x); });
    double e = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) e = std::max(e, std::abs(p.values()[k] - exact.values()[k]));
    return e;
}

}  // namespace

TEST(Poisson, CosineConvergesSecondOrder) {
    const double e64 = poisson_error(64), e128 = poisson_error(128);
    EXPECT_LT(e64, 1e-3);
    EXPECT_NEAR(e64 / e128, 4.0, 0.4);
}

TEST(Poisson, ManufacturedSolutionRecovered) {
    std::mt19937_64 rng(42);
    for (auto pc : {Preconditioner::none, Preconditioner::jacobi, Preconditioner::ic}) {
        const Grid g = Grid::make(24, 17, 0, 0, 1.5, 1.0);
        const ScalarField a = random_field(g, rng, 0.1, 10.0);
        ScalarField pstar = random_field(g, rng, -1, 1);
        const double m = mean(pstar);
        for (double& x : pstar.values()) x -= m;
        const ScalarField rhs = apply_varcoef_operator(a, pstar);
        SolverParams sp;
        sp.preconditioner = pc;
        const ScalarField p = solve_varcoef_poisson(a, rhs, sp);
        const ScalarField res = apply_varcoef_operator(a, p);
        double rn = 0.0, bn = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            rn += std::pow(res.values()[k] - rhs.values()[k], 2);
            bn += rhs.values()[k] * rhs.values()[k];
        }
        EXPECT_LE(std::sqrt(rn / bn), 10.0 * sp.rel_tol);
        double err = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) err = std::max(err, std::abs(p.values()[k] - pstar.values()[k]));
        EXPECT_LT(err, 1e-6);
        EXPECT_NEAR(mean(p), 0.0, 1e-12);
    }
}

TEST(Poisson, ConstantShiftOfRhsIsIgnored) {
    std::mt19937_64 rng(8);
    const Grid g = Grid::unit_square(20);
    const ScalarField a = random_field(g, rng, 0.5, 2.0);
    const ScalarField rhs = random_field(g, rng, -1, 1);
    ScalarField shifted = rhs;
    for (double& x : shifted.values()) x += 3.25;
    const ScalarField p1 = solve_varcoef_poisson(a, rhs, SolverParams{});
    const ScalarField p2 = solve_varcoef_poisson(a, shifted, SolverParams{});
    for (std::size_t k = 0; k < p1.size(); ++k) EXPECT_NEAR(p1.values()[k], p2.values()[k], 1e-8);
}

TEST(Poisson, LargeCoefficientContrastConverges) {
    const Grid g = Grid::unit_square(64);
    const ScalarField a = ScalarField::sample(g, [](double x, double y) {
        return std::hypot(x - 0.5, y - 0.5) < 0.25 ? 1e6 : 1.0;
    });
    const ScalarField rhs = ScalarField::sample(g, [](double x, double y) { return std::sin(7 * x) * std::cos(3 * y); });
    SolveStats st;
    const ScalarField p = solve_varcoef_poisson(a, rhs, SolverParams{}, &st);
    EXPECT_TRUE(p.all_finite());
    EXPECT_GT(st.iterations, 0);
}

TEST(Poisson, ZeroRhsGivesZero) {
    const Grid g = Grid::unit_square(8);
    const ScalarField p = solve_varcoef_poisson(ScalarField(g, 1.0), ScalarField(g, 5.0), SolverParams{});
    EXPECT_EQ(p.max(), 0.0);
    EXPECT_EQ(p.min(), 0.0);
}

TEST(Poisson, RejectsNonPositiveCoefficient) {
    const Grid g = Grid::unit_square(8);
    ScalarField a(g, 1.0);
    a(3, 3) = 0.0;
    EXPECT_THROW(solve_varcoef_poisson(a, ScalarField(g, 1.0), SolverParams{}), PreconditionError);
}

TEST(Poisson, IterationCapRaisesConvergenceError) {
    std::mt19937_64 rng(1);
    const Grid g = Grid::unit_square(32);
    SolverParams sp;
    sp.max_iters = 2;
    sp.preconditioner = Preconditioner::none;
    try {
        (void)solve_varcoef_poisson(ScalarField(g, 1.0), random_field(g, rng, -1, 1), sp);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_EQ(e.iterations(), 2);
        EXPECT_GT(e.residual(), sp.rel_tol);
    }
}

// The 2-norm of the CG residual is not monotone in general; the energy norm of the error is.
TEST(ConjugateGradient, EnergyNormOfErrorIsMonotone) {
    std::mt19937_64 rng(99);
    const Grid g = Grid::unit_square(24);
    const ScalarField a = random_field(g, rng, 0.2, 5.0);
    ScalarField pstar = random_field(g, rng, -1, 1);
    const double m = mean(pstar);
    for (double& x : pstar.values()) x -= m;
    const ScalarField rhs = apply_varcoef_operator(a, pstar);
    for (auto pc : {Preconditioner::none, Preconditioner::jacobi, Preconditioner::ic}) {
        std::vector<double> energy;
        SolverParams sp;
        sp.preconditioner = pc;
        (void)solve_varcoef_poisson(a, rhs, sp, nullptr, [&](int, const std::vector<double>& x) {
            ScalarField e(g);
            for (std::size_t k = 0; k < x.size(); ++k) e.values()[k] = x[k] - pstar.values()[k];
            const ScalarField ae = apply_varcoef_operator(a, e);
            double s = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) s += e.values()[k] * ae.values()[k];
            energy.push_back(s);
        });
        ASSERT_GT(energy.size(), 2u);
        for (std::size_t k = 1; k < energy.size(); ++k) EXPECT_LE(energy[k], energy[k - 1] * (1 + 1e-12) + 1e-26);
    }
}

TEST(Diffusion, NegligibleConductivityGivesRhsOverRho) {
    std::mt19937_64 rng(5);
    const Grid g = Grid::unit_square(16);
    const ScalarField rho = random_field(g, rng, 0.1, 2.0);
    const ScalarField rhs = random_field(g, rng, 0.5, 3.0);
    const ScalarField th = solve_implicit_diffusion(rho, ScalarField(g, 1e-30), rhs, 0.1, SolverParams{});
    for (std::size_t k = 0; k < th.size(); ++k)
        EXPECT_NEAR(th.values()[k], rhs.values()[k] / rho.values()[k], 1e-12 * th.values()[k]);
}

TEST(Diffusion, ConstantIsFixedPoint) {
    std::mt19937_64 rng(6);
    const Grid g = Grid::unit_square(16);
    const ScalarField rho = random_field(g, rng, 0.1, 2.0);
    const ScalarField kappa = random_field(g, rng, 0.5, 3.0);
    ScalarField rhs = rho;
    for (double& x : rhs.values()) x *= 2.5;
    const ScalarField th = solve_implicit_diffusion(rho, kappa, rhs, 0.3, SolverParams{});
    for (double x : th.values()) EXPECT_NEAR(x, 2.5, 1e-12);
}

TEST(Diffusion, ZeroStepIsExactDivision) {
    std::mt19937_64 rng(7);
    const Grid g = Grid::unit_square(12);
    const ScalarField rho = random_field(g, rng, 0.1, 2.0);
    const ScalarField rhs = random_field(g, rng, -1.0, 3.0);
    const ScalarField th = solve_implicit_diffusion(rho, ScalarField(g, 1.0), rhs, 0.0, SolverParams{});
    for (std::size_t k = 0; k < th.size(); ++k) EXPECT_EQ(th.values()[k], rhs.values()[k] / rho.values()[k]);
}

TEST(Diffusion, MinimumPrincipleOnRandomData) {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> dtd(1e-4, 1.0), extra(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Grid g = Grid::unit_square(12 + trial % 7);
        const ScalarField rho = random_field(g, rng, 0.1, 1.0);
        const ScalarField kappa = random_field(g, rng, 1.0, 2.0);
        ScalarField rhs = rho;
        for (double& x : rhs.values()) x *= 1.0 + extra(rng);
        const ScalarField th = solve_implicit_diffusion(rho, kappa, rhs, dtd(rng), SolverParams{});
        EXPECT_GE(th.min(), 1.0 - 1e-10);
    }
}

TEST(Diffusion, RejectsNegativeStep) {
    const Grid g = Grid::unit_square(4);
    EXPECT_THROW(solve_implicit_diffusion(ScalarField(g, 1.0), ScalarField(g, 1.0), ScalarField(g, 1.0), -0.1,
                                          SolverParams{}),
                 PreconditionError);
}

TEST(Solver, ParamsValidation) {
    SolverParams sp;
    sp.rel_tol = 0.0;
    EXPECT_THROW(sp.validate(), PreconditionError);
    sp.rel_tol = 1e-8;
    sp.max_iters = -1;
    EXPECT_THROW(sp.validate(), PreconditionError);
}

TEST(IncompleteCholesky, ExactForDiagonalAndTridiagonal) {
    // One row: the IC factor of a tridiagonal matrix is exact.
    Stencil5 s;
    s.mx = 6;
    s.my = 1;
    s.diag.assign(6, 2.0);
    s.west.assign(6, -1.0);
    s.west[0] = 0.0;
    s.south.assign(6, 0.0);
    const IncompleteCholesky ic(s);
    std::vector<double> x = {1, -2, 3, 0.5, 0.25, -1}, b(6), z(6);
    for (int k = 0; k < 6; ++k) b[k] = 2 * x[k] - (k > 0 ? x[k - 1] : 0) - (k < 5 ? x[k + 1] : 0);
    ic.apply(b.data(), z.data());
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(z[k], x[k], 1e-13);
}
