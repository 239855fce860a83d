#pragma once

/// Initial data. The centrepiece is the radial vacuum family
///
///   rho0(r) = 0                                              r <= eps/2
///           = c0 (2r/eps - 1)^k1                             eps/2 <= r <= eps
///           = ((2(1 - c0^(1/k2))/eps) r - 2 + 3 c0^(1/k2))^k2 eps <= r <= 3eps/2
///           = 1                                              r >= 3eps/2
///
/// with eps = pi^(-1/2) exp(-1/(2 c0^2)), for which |{rho0 <= c0}| = pi eps^2 = exp(-1/c0^2),
/// i.e. the smallness condition |V| <= exp(-1/c0^2) holds with equality.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "nhns/dynamics.hpp"
#include "nhns/error.hpp"
#include "nhns/mesh.hpp"

namespace nhns {

enum class DensityProfile { remark3, uniform };
enum class StreamShape { sine, sine_squared };

struct ScenarioSpec {
    std::string name = "remark3";
    DensityProfile density = DensityProfile::remark3;
    double rho_uniform = 1.0;
    double c0 = 0.5;
    double k1 = 1.0;
    double k2 = 1.0;
    double theta_min = 1.0;
    double theta_bump = 0.5;   ///< theta0 = theta_min + theta_bump (1 + cos(pi xi) cos(pi eta)) / 2
    double amplitude = 0.3;    ///< stream-function amplitude
    StreamShape stream = StreamShape::sine_squared;
    int nx = 128;
    int ny = 128;
    double x0 = -1.0;
    double y0 = -1.0;
    double lx = 2.0;
    double ly = 2.0;

    Grid grid() const { return Grid::make(nx, ny, x0, y0, lx, ly); }

    void validate() const {
        if (!(k1 > 0.0 && k1 < 2.0)) throw PreconditionError("k1 not in (0,2)");
        if (!(k2 > 0.0 && k2 < 2.0)) throw PreconditionError("k2 not in (0,2)");
        if (!(c0 > 0.0 && c0 < 1.0)) throw PreconditionError("c0 not in (0,1)");
        if (!(theta_min > 0.0)) throw PreconditionError("theta_min must be positive");
        if (!(theta_bump >= 0.0) || !std::isfinite(theta_bump)) throw PreconditionError("theta_bump must be >= 0");
        if (!std::isfinite(amplitude)) throw PreconditionError("amplitude must be finite");
        if (density == DensityProfile::uniform && !(rho_uniform > 0.0))
            throw PreconditionError("rho_uniform must be positive");
        (void)grid();
    }
};

/// eps = pi^(-1/2) exp(-1/(2 c0^2)).
inline double vacuum_radius(double c0) { return std::exp(-1.0 / (2.0 * c0 * c0)) / std::sqrt(std::numbers::pi); }

inline double remark3_profile(double r, double c0, double k1, double k2) {
    const double eps = vacuum_radius(c0);
    if (r <= 0.5 * eps) return 0.0;
    if (r <= eps) return c0 * std::pow(2.0 * r / eps - 1.0, k1);
    if (r <= 1.5 * eps) {
        const double s = std::pow(c0, 1.0 / k2);
        return std::pow(2.0 * (1.0 - s) / eps * r - 2.0 + 3.0 * s, k2);
    }
    return 1.0;
}

/// The vacuum profile at cell centres; eps must span at least four cells of `g`.
inline ScalarField remark3_density(const ScenarioSpec& spec, const Grid& g) {
    spec.validate();
    if (g.x0 > -1.0 || g.y0 > -1.0 || g.x0 + g.lx < 1.0 || g.y0 + g.ly < 1.0)
        throw PreconditionError("remark3_density: grid must cover [-1,1]^2");
    const double eps = vacuum_radius(spec.c0);
    const double h = std::max(g.hx, g.hy);
    if (eps < 4.0 * h) {
        const int nmin_x = static_cast<int>(std::ceil(4.0 * g.lx / eps));
        const int nmin_y = static_cast<int>(std::ceil(4.0 * g.ly / eps));
        std::ostringstream os;
        os << "remark3_density: vacuum radius eps = " << eps << " for c0 = " << spec.c0
           << " is resolved by fewer than 4 cells; use at least " << nmin_x << " x " << nmin_y << " cells";
        throw PreconditionError(os.str());
    }
    return ScalarField::sample(g, [&](double x, double y) {
        return remark3_profile(std::hypot(x, y), spec.c0, spec.k1, spec.k2);
    });
}

/// Area of {rho0 <= c0}.
inline double vacuum_measure(const ScalarField& rho0, double c0) {
    std::size_t count = 0;
    for (double r : rho0.values())
        if (r <= c0) ++count;
    return static_cast<double>(count) * rho0.grid().cell_area();
}

struct ConditionVerdict {
    bool holds = false;
    double threshold = 0.0;
    double margin = 0.0;  ///< threshold - |V|
};

/// |V| <= exp(-1/c0^2).
inline ConditionVerdict check_condition_79(double vacuum_area, double c0) {
    ConditionVerdict v;
    v.threshold = std::exp(-1.0 / (c0 * c0));
    v.margin = v.threshold - vacuum_area;
    v.holds = vacuum_area <= v.threshold;
    return v;
}

/// Variant with a user-supplied constant C: |V| <= exp(-C (2 beta + 2) / c0) / (64 C^(2 beta + 4)).
inline ConditionVerdict check_condition_83(double vacuum_area, double c0, double beta, double big_c) {
    if (!(big_c > 0.0)) throw DomainError("check_condition_83: C must be positive");
    ConditionVerdict v;
    v.threshold = std::exp(-big_c * (2.0 * beta + 2.0) / c0) / (64.0 * std::pow(big_c, 2.0 * beta + 4.0));
    v.margin = v.threshold - vacuum_area;
    v.holds = vacuum_area <= v.threshold;
    return v;
}

/// MAC velocity u = D_y psi / hy, v = -D_x psi / hx from a node stream function that vanishes
/// on the boundary. Discretely divergence free and no-slip in the normal component.
inline MacVelocity stream_function_velocity(const NodeField& psi) {
    const Grid& g = psi.grid();
    for (int i = 0; i <= g.nx; ++i)
        if (psi(i, 0) != 0.0 || psi(i, g.ny) != 0.0)
            throw PreconditionError("stream_function_velocity: psi must vanish on the boundary");
    for (int j = 0; j <= g.ny; ++j)
        if (psi(0, j) != 0.0 || psi(g.nx, j) != 0.0)
            throw PreconditionError("stream_function_velocity: psi must vanish on the boundary");
    MacVelocity w(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) w.u(i, j) = (psi(i, j + 1) - psi(i, j)) / g.hy;
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) w.v(i, j) = -(psi(i + 1, j) - psi(i, j)) / g.hx;
    return w;
}

/// Samples f at interior nodes; boundary nodes are set to exactly zero.
template <class F>
NodeField interior_stream_function(const Grid& g, F&& f) {
    NodeField psi(g);
    for (int j = 1; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) psi(i, j) = f(g.xn(i), g.yn(j));
    return psi;
}

inline NodeField scenario_stream_function(const ScenarioSpec& spec, const Grid& g) {
    const double pi = std::numbers::pi;
    return interior_stream_function(g, [&](double x, double y) {
        const double sx = std::sin(pi * (x - g.x0) / g.lx);
        const double sy = std::sin(pi * (y - g.y0) / g.ly);
        return spec.stream == StreamShape::sine ? spec.amplitude * sx * sy : spec.amplitude * sx * sx * sy * sy;
    });
}

/// theta0 = theta_min + bump (1 + cos(pi xi) cos(pi eta)) / 2; zero normal derivative at walls.
inline ScalarField scenario_temperature(const ScenarioSpec& spec, const Grid& g) {
    const double pi = std::numbers::pi;
    return ScalarField::sample(g, [&](double x, double y) {
        const double cx = std::cos(pi * (x - g.x0) / g.lx);
        const double cy = std::cos(pi * (y - g.y0) / g.ly);
        return spec.theta_min + spec.theta_bump * 0.5 * (1.0 + cx * cy);
    });
}

inline State build_scenario(const ScenarioSpec& spec) {
    spec.validate();
    const Grid g = spec.grid();
    ScalarField rho = spec.density == DensityProfile::remark3 ? remark3_density(spec, g)
                                                              : ScalarField(g, spec.rho_uniform);
    MacVelocity u = stream_function_velocity(scenario_stream_function(spec, g));
    ScalarField theta = scenario_temperature(spec, g);
    return make_state(std::move(rho), std::move(u), std::move(theta));
}

struct CatalogEntry {
    ScenarioSpec spec;
    std::string description;
};

inline std::vector<CatalogEntry> scenario_catalog() {
    std::vector<CatalogEntry> out;
    {
        ScenarioSpec s;
        s.name = "remark3";
        out.push_back({s, "radial vacuum bubble (c0=0.5, k1=k2=1) on [-1,1]^2, single vortex, warm centre"});
    }
    {
        ScenarioSpec s;
        s.name = "uniform";
        s.density = DensityProfile::uniform;
        s.amplitude = 0.01;
        s.nx = s.ny = 64;
        out.push_back({s, "rho = 1 on [-1,1]^2, weak vortex, warm centre; decay-rate reference case"});
    }
    {
        ScenarioSpec s;
        s.name = "rest";
        s.density = DensityProfile::uniform;
        s.amplitude = 0.0;
        s.theta_bump = 0.0;
        s.nx = s.ny = 32;
        out.push_back({s, "rho = 1, u = 0, theta = theta_min: exact fixed point"});
    }
    return out;
}

inline ScenarioSpec find_scenario(const std::string& name) {
    for (const auto& e : scenario_catalog())
        if (e.spec.name == name) return e.spec;
    throw PreconditionError("unknown scenario '" + name + "'");
}

}  // namespace nhns
