#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "nhns/inequalities.hpp"

using namespace nhns;

namespace {

std::vector<double> knots(double t1, int n) {
    std::vector<double> t(n + 1);
    for (int k = 0; k <= n; ++k) t[k] = t1 * k / n;
    return t;
}

/// Classical RK4 for y' = f(t, y) with `sub` substeps per knot interval; returns y at the knots.
template <class F>
std::vector<double> rk4(F&& f, double y0, const std::vector<double>& t, int sub) {
    std::vector<double> out{y0};
    double y = y0;
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double h = (t[k] - t[k - 1]) / sub;
        for (int s = 0; s < sub; ++s) {
            const double a = t[k - 1] + s * h;
            const double k1 = f(a, y), k2 = f(a + h / 2, y + h / 2 * k1), k3 = f(a + h / 2, y + h / 2 * k2),
                         k4 = f(a + h, y + h * k3);
            y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        }
        out.push_back(y);
    }
    return out;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]) / std::abs(b[k]));
    return m;
}

}  // namespace

TEST(SampledFunction, Validation) {
    EXPECT_THROW(SampledFunction({}, {}), PreconditionError);
    EXPECT_THROW(SampledFunction({0, 1}, {1}), PreconditionError);
    EXPECT_THROW(SampledFunction({0, 0}, {1, 2}), PreconditionError);
    EXPECT_THROW(SampledFunction({0, 1}, {1, NAN}), PreconditionError);
    const SampledFunction f({0, 1, 3}, {0, 2, 2});
    EXPECT_DOUBLE_EQ(f(0.5), 1.0);
    EXPECT_DOUBLE_EQ(f(-1), 0.0);
    EXPECT_DOUBLE_EQ(f(10), 2.0);
    EXPECT_DOUBLE_EQ(f.cumulative_integral().back(), 5.0);
    const SampledFunction pc({0, 1, 3}, {1, 2, 5}, Interpolation::piecewise_constant);
    EXPECT_DOUBLE_EQ(pc(0.5), 1.0);
    EXPECT_DOUBLE_EQ(pc.cumulative_integral().back(), 5.0);
}

TEST(Gronwall, ExponentialEnvelope) {
    const auto t = knots(1.0, 1000);
    const SampledFunction one = SampledFunction::sample(t, [](double) { return 1.0; });
    const SampledFunction env = gronwall_envelope(one, one);
    std::vector<double> exact;
    for (double s : t) exact.push_back(std::exp(s));
    EXPECT_LE(max_rel(env.values(), exact), 1e-8);
}

TEST(Gronwall, ZeroRateReturnsF2) {
    const auto t = knots(2.0, 50);
    const SampledFunction f2 = SampledFunction::sample(t, [](double s) { return 1 + s * s; });
    const SampledFunction zero = SampledFunction::sample(t, [](double) { return 0.0; });
    EXPECT_EQ(gronwall_envelope(f2, zero).values(), f2.values());
}

TEST(Gronwall, RandomRateMatchesOde) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> d(0.0, 3.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto t = knots(1.0, 200);
        std::vector<double> cv;
        for (std::size_t k = 0; k < t.size(); ++k) cv.push_back(d(rng));
        const SampledFunction c(t, cv);
        const double f0 = 0.5 + d(rng);
        const SampledFunction f2 = SampledFunction::sample(t, [&](double) { return f0; });
        const auto ode = rk4([&](double s, double e) { return c(s) * e; }, f0, t, 20);
        EXPECT_LE(max_rel(gronwall_envelope(f2, c).values(), ode), 1e-6);
    }
}

TEST(Gronwall, NonMonotoneF2NamesViolation) {
    const SampledFunction f2({0, 1, 2, 3}, {1, 2, 1.5, 3});
    const SampledFunction c({0, 3}, {1, 1});
    try {
        (void)gronwall_envelope(f2, c);
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("t = 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(gronwall_envelope(SampledFunction({0, 1}, {1, 1}), SampledFunction({0, 1}, {1, -1})),
                 PreconditionError);
}

TEST(Bihari, LinearReducesToGronwall) {
    const auto t = knots(1.0, 400);
    const SampledFunction h = SampledFunction::sample(t, [](double s) { return 1 + std::sin(3 * s); });
    const double c1 = 1.7, c2 = 0.8;
    const SampledFunction b = bihari_bound(c1, c2, h, Nonlinearity::linear);
    std::vector<double> cv;
    for (double x : h.values()) cv.push_back(c2 * x);
    const SampledFunction g = gronwall_envelope(SampledFunction::sample(t, [&](double) { return c1; }), SampledFunction(t, cv));
    EXPECT_LE(max_rel(b.values(), g.values()), 1e-8);
}

TEST(Bihari, ZeroSourceGivesC1) {
    const auto t = knots(1.0, 20);
    const SampledFunction zero = SampledFunction::sample(t, [](double) { return 0.0; });
    const SampledFunction b = bihari_bound(2.5, 3.0, zero, Nonlinearity::log_growth);
    for (double x : b.values()) EXPECT_EQ(x, 2.5);
}

TEST(Bihari, LogGrowthMatchesOde) {
    const auto t = knots(1.0, 100);
    const SampledFunction one = SampledFunction::sample(t, [](double) { return 1.0; });
    const SampledFunction b = bihari_bound(1.0, 1.0, one, Nonlinearity::log_growth);
    const auto ode = rk4([](double, double y) { return y * std::log(2 + y); }, 1.0, t, 100);
    EXPECT_LE(max_rel(b.values(), ode), 1e-4);
}

TEST(Bihari, MonotoneInParameters) {
    const auto t = knots(1.0, 50);
    const SampledFunction h = SampledFunction::sample(t, [](double s) { return 0.5 + s; });
    const SampledFunction h2 = SampledFunction::sample(t, [](double s) { return 0.6 + s * s + s; });
    const auto base = bihari_bound(1.0, 1.0, h, Nonlinearity::log_growth).values();
    const auto c1 = bihari_bound(1.2, 1.0, h, Nonlinearity::log_growth).values();
    const auto c2 = bihari_bound(1.0, 1.3, h, Nonlinearity::log_growth).values();
    const auto hh = bihari_bound(1.0, 1.0, h2, Nonlinearity::log_growth).values();
    for (std::size_t k = 0; k < base.size(); ++k) {
        EXPECT_GE(c1[k], base[k]);
        EXPECT_GE(c2[k], base[k]);
        EXPECT_GE(hh[k], base[k]);
        if (k > 0) {
            EXPECT_GE(base[k], base[k - 1]);
        }
    }
}

TEST(Bihari, PrimitiveInverseIsIdentity) {
    for (auto w : {Nonlinearity::linear, Nonlinearity::log_growth}) {
        const BihariPrimitive G(growth_function(w), 0.5);
        for (double x : {1e-3, 0.1, 0.5, 1.0, 3.0, 42.0, 1e4}) {
            const auto y = G.inverse(G(x));
            ASSERT_TRUE(y.has_value());
            EXPECT_NEAR(*y, x, 1e-10 * x);
        }
    }
    const BihariPrimitive lin(growth_function(Nonlinearity::linear), 1.0);
    EXPECT_NEAR(lin(std::exp(2.0)), 2.0, 1e-12);
}

TEST(Bihari, IndependentOfLowerLimit) {
    const auto t = knots(1.0, 40);
    const SampledFunction h = SampledFunction::sample(t, [](double s) { return 2 - s; });
    const auto a = bihari_bound(1.5, 0.7, h, Nonlinearity::log_growth).values();
    for (double x0 : {0.01, 0.3, 2.0, 10.0}) {
        const auto b = bihari_bound(1.5, 0.7, h, Nonlinearity::log_growth, x0).values();
        EXPECT_LE(max_rel(b, a), 1e-10);
    }
}

TEST(Bihari, EscapeAndDomainErrors) {
    const auto t = knots(2.0, 40);
    const SampledFunction one = SampledFunction::sample(t, [](double) { return 1.0; });
    // y' = y^2, y(0) = 1 blows up at t = 1.
    try {
        (void)bihari_bound(1.0, 1.0, one, [](double y) { return y * y; });
        FAIL();
    } catch (const RangeError& e) {
        EXPECT_NE(std::string(e.what()).find("bound escapes to infinity at t="), std::string::npos);
    }
    EXPECT_THROW(bihari_bound(0.0, 1.0, one, Nonlinearity::linear), DomainError);
    EXPECT_THROW(bihari_bound(-1.0, 1.0, one, Nonlinearity::linear), DomainError);
    EXPECT_THROW(bihari_bound(1.0, 1.0, SampledFunction({0, 1}, {1, -1}), Nonlinearity::linear), PreconditionError);
}
