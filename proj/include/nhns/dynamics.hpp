#pragma once

/// Time integration of the heat-conducting, density-dependent incompressible Navier-Stokes
/// system with power-law transport coefficients mu = theta^alpha, kappa = theta^beta, no-slip
/// adiabatic walls, and the pressure gauge  integral(P / mu(theta)) = 0.
///
/// One step is split as
///   (1) mass transport: rho and rho*theta by the same first-order upwind mass fluxes;
///   (2) velocity: upwind advection, then backward-Euler viscous update
///       (rho_f - dt L_mu) u** = rho_f u*, with L_mu the symmetric discrete div(2 mu D(.));
///   (3) projection with coefficient 1/rho;
///   (4) temperature: viscous heating 2 mu |D(u)|^2 of the projected velocity, then
///       backward-Euler diffusion with kappa(theta).
/// The transported density is never floored; the floor rho_floor * rho_tilde enters only
/// where 1/rho appears.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "nhns/error.hpp"
#include "nhns/linsolve.hpp"
#include "nhns/mesh.hpp"

namespace nhns {

struct PhysParams {
    double alpha = 0.05;
    double beta = 0.5;
    double cv = 1.0;
    double rho_floor = 1e-6;  ///< fraction of rho_tilde
    double cfl = 0.4;
    double dt_max = 0.01;
    SolverParams solver{};

    void validate() const {
        if (!(alpha >= 0.0)) throw PreconditionError("alpha must be >= 0");
        if (!(beta >= 0.0)) throw PreconditionError("beta must be >= 0");
        if (cv != 1.0) throw PreconditionError("cv is fixed to 1");
        if (!(rho_floor > 0.0 && rho_floor <= 1e-4)) throw PreconditionError("rho_floor must lie in (0, 1e-4]");
        if (!(cfl > 0.0 && cfl < 1.0)) throw PreconditionError("cfl must lie in (0, 1)");
        if (!(dt_max > 0.0)) throw PreconditionError("dt_max must be positive");
        solver.validate();
    }
};

/// Reference bounds fixed by the initial data: rho_tilde = max rho0, theta_lower = min theta0.
struct ReferenceBounds {
    double rho_tilde = 1.0;
    double theta_lower = 1.0;
};

struct State {
    ScalarField rho;
    MacVelocity u;
    ScalarField theta;
    ScalarField p;
    double t = 0.0;
    ReferenceBounds bounds;
};

/// Assembles an initial state (p = 0) and records its reference bounds.
inline State make_state(ScalarField rho, MacVelocity u, ScalarField theta, double t = 0.0) {
    require_same_grid(rho.grid(), u.grid(), "make_state");
    require_same_grid(rho.grid(), theta.grid(), "make_state");
    State s;
    s.bounds = {rho.max(), theta.min()};
    s.p = ScalarField(rho.grid());
    s.rho = std::move(rho);
    s.u = std::move(u);
    s.theta = std::move(theta);
    s.t = t;
    return s;
}

inline ScalarField power_of(const ScalarField& theta, double exponent, const char* name) {
    ScalarField out(theta.grid(), 1.0);
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double th = theta.values()[k];
        if (!(th > 0.0)) throw DomainError(std::string(name) + ": temperature must be positive");
        if (exponent != 0.0) out.values()[k] = std::pow(th, exponent);
    }
    return out;
}

inline ScalarField mu_of(const ScalarField& theta, double alpha) { return power_of(theta, alpha, "mu_of"); }
inline ScalarField kappa_of(const ScalarField& theta, double beta) { return power_of(theta, beta, "kappa_of"); }

/// Advective time step: cfl / (max|u|/hx + max|v|/hy), capped by dt_max. Viscosity and
/// conduction are implicit and impose no limit.
inline double cfl_dt(const State& s, const PhysParams& params) {
    const Grid& g = s.u.grid();
    const double rate = s.u.max_abs_u() / g.hx + s.u.max_abs_v() / g.hy;
    if (rate == 0.0) return params.dt_max;
    return std::min(params.dt_max, params.cfl / rate);
}

/// Density-weighted face mass: arithmetic mean of the two adjacent cells (interior faces),
/// the adjacent cell at a wall face.
inline MacVelocity face_density(const ScalarField& rho) {
    const Grid& g = rho.grid();
    MacVelocity out(g);
    for (int j = 0; j < g.ny; ++j) {
        out.u(0, j) = rho(0, j);
        out.u(g.nx, j) = rho(g.nx - 1, j);
        for (int i = 1; i < g.nx; ++i) out.u(i, j) = 0.5 * (rho(i - 1, j) + rho(i, j));
    }
    for (int i = 0; i < g.nx; ++i) {
        out.v(i, 0) = rho(i, 0);
        out.v(i, g.ny) = rho(i, g.ny - 1);
        for (int j = 1; j < g.ny; ++j) out.v(i, j) = 0.5 * (rho(i, j - 1) + rho(i, j));
    }
    return out;
}

/// ||sqrt(rho) u||^2 with face quadrature (wall faces carry half weight).
inline double kinetic_energy(const ScalarField& rho, const MacVelocity& w) {
    require_same_grid(rho.grid(), w.grid(), "kinetic_energy");
    const Grid& g = rho.grid();
    const MacVelocity rf = face_density(rho);
    double s = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            s += ((i == 0 || i == g.nx) ? 0.5 : 1.0) * rf.u(i, j) * w.u(i, j) * w.u(i, j);
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            s += ((j == 0 || j == g.ny) ? 0.5 : 1.0) * rf.v(i, j) * w.v(i, j) * w.v(i, j);
    return s * g.cell_area();
}

/// integral of 4 mu |D(u)|^2.
inline double dissipation(const ScalarField& mu, const MacVelocity& w) {
    return 4.0 * weighted_integrate(mu, deformation_norm_sq(w));
}

// ---------------------------------------------------------------------------------------------
// Viscous operator

/// Discrete L_mu u = div(2 mu D(u)), defined as minus half the gradient of the dissipation
/// functional sum_c 2 mu_c |D|_c^2 hx hy (see deformation_norm_sq). Hence L_mu is symmetric,
/// <L_mu u, u> = -integral(2 mu |D(u)|^2), and wall-normal faces are left at zero.
class ViscousOperator {
public:
    explicit ViscousOperator(const ScalarField& mu) : g_(mu.grid()), mu_(mu.values()) {
        mu_node_.assign(static_cast<std::size_t>(g_.nx + 1) * (g_.ny + 1), 0.0);
        for (int j = 0; j < g_.ny; ++j)
            for (int i = 0; i < g_.nx; ++i) {
                const double q = 0.25 * mu(i, j);
                mu_node_[node(i, j)] += q;
                mu_node_[node(i + 1, j)] += q;
                mu_node_[node(i, j + 1)] += q;
                mu_node_[node(i + 1, j + 1)] += q;
            }
        s11_.assign(g_.cells(), 0.0);
        s22_.assign(g_.cells(), 0.0);
        s12_.assign(mu_node_.size(), 0.0);
    }

    const Grid& grid() const { return g_; }
    std::size_t nu() const { return static_cast<std::size_t>(g_.nx + 1) * g_.ny; }
    std::size_t nv() const { return static_cast<std::size_t>(g_.nx) * (g_.ny + 1); }
    std::size_t size() const { return nu() + nv(); }

    /// out = L_mu x on interior faces, 0 on wall-normal faces. x packs u then v.
    void apply(const std::vector<double>& x, std::vector<double>& out) {
        const int nx = g_.nx, ny = g_.ny;
        const double hx = g_.hx, hy = g_.hy;
        const double* u = x.data();
        const double* v = x.data() + nu();
        auto U = [&](int i, int j) { return u[static_cast<std::size_t>(j) * (nx + 1) + i]; };
        auto V = [&](int i, int j) { return v[static_cast<std::size_t>(j) * nx + i]; };
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const std::size_t c = static_cast<std::size_t>(j) * nx + i;
                s11_[c] = 2.0 * mu_[c] * (U(i + 1, j) - U(i, j)) / hx;
                s22_[c] = 2.0 * mu_[c] * (V(i, j + 1) - V(i, j)) / hy;
            }
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                const double above = j < ny ? U(i, j) : -U(i, ny - 1);
                const double below = j > 0 ? U(i, j - 1) : -U(i, 0);
                const double right = i < nx ? V(i, j) : -V(nx - 1, j);
                const double left = i > 0 ? V(i - 1, j) : -V(0, j);
                const double d12 = 0.5 * ((above - below) / hy + (right - left) / hx);
                s12_[node(i, j)] = 2.0 * mu_node_[node(i, j)] * d12;
            }
        double* ou = out.data();
        double* ov = out.data() + nu();
        for (int j = 0; j < ny; ++j) {
            const double cb = (j == 0 ? 2.0 : 1.0) / hy;
            const double ct = (j == ny - 1 ? 2.0 : 1.0) / hy;
            const std::size_t row = static_cast<std::size_t>(j) * (nx + 1);
            ou[row] = 0.0;
            ou[row + nx] = 0.0;
            for (int i = 1; i < nx; ++i) {
                const std::size_t c = static_cast<std::size_t>(j) * nx + i;
                ou[row + i] = (s11_[c] - s11_[c - 1]) / hx + ct * s12_[node(i, j + 1)] - cb * s12_[node(i, j)];
            }
        }
        for (int j = 0; j <= ny; ++j) {
            const std::size_t row = static_cast<std::size_t>(j) * nx;
            if (j == 0 || j == ny) {
                for (int i = 0; i < nx; ++i) ov[row + i] = 0.0;
                continue;
            }
            for (int i = 0; i < nx; ++i) {
                const double cl = (i == 0 ? 2.0 : 1.0) / hx;
                const double cr = (i == nx - 1 ? 2.0 : 1.0) / hx;
                const std::size_t c = row + i;
                ov[c] = (s22_[c] - s22_[c - nx]) / hy + cr * s12_[node(i + 1, j)] - cl * s12_[node(i, j)];
            }
        }
    }

    /// Diagonal of -L_mu (zero on wall-normal faces).
    std::vector<double> negative_diagonal() const {
        const int nx = g_.nx, ny = g_.ny;
        const double ix2 = 1.0 / (g_.hx * g_.hx), iy2 = 1.0 / (g_.hy * g_.hy);
        std::vector<double> d(size(), 0.0);
        for (int j = 0; j < ny; ++j) {
            const double cb = j == 0 ? 2.0 : 1.0;
            const double ct = j == ny - 1 ? 2.0 : 1.0;
            for (int i = 1; i < nx; ++i) {
                const std::size_t c = static_cast<std::size_t>(j) * nx + i;
                d[static_cast<std::size_t>(j) * (nx + 1) + i] =
                    2.0 * (mu_[c - 1] + mu_[c]) * ix2 +
                    (mu_node_[node(i, j)] * cb * cb + mu_node_[node(i, j + 1)] * ct * ct) * iy2;
            }
        }
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double cl = i == 0 ? 2.0 : 1.0;
                const double cr = i == nx - 1 ? 2.0 : 1.0;
                const std::size_t c = static_cast<std::size_t>(j) * nx + i;
                d[nu() + c] = 2.0 * (mu_[c - nx] + mu_[c]) * iy2 +
                              (mu_node_[node(i, j)] * cl * cl + mu_node_[node(i + 1, j)] * cr * cr) * ix2;
            }
        return d;
    }

    /// Diagonal blocks (u-u and v-v) of mass - dt L_mu as 5-point stencils, with identity rows
    /// on wall-normal faces. `mass` is packed like the unknowns.
    std::vector<Stencil5> implicit_blocks(const std::vector<double>& mass, double dt) const {
        const int nx = g_.nx, ny = g_.ny;
        const double ix2 = dt / (g_.hx * g_.hx), iy2 = dt / (g_.hy * g_.hy);
        const std::vector<double> d = negative_diagonal();
        Stencil5 bu(nx + 1, ny), bv(nx, ny + 1);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                const std::size_t k = static_cast<std::size_t>(j) * (nx + 1) + i;
                if (i == 0 || i == nx) {
                    bu.diag[k] = 1.0;
                    continue;
                }
                bu.diag[k] = mass[k] + dt * d[k];
                if (i > 1) bu.west[k] = -2.0 * mu_[static_cast<std::size_t>(j) * nx + i - 1] * ix2;
                if (j > 0) bu.south[k] = -mu_node_[node(i, j)] * iy2;
            }
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const std::size_t k = static_cast<std::size_t>(j) * nx + i;
                if (j == 0 || j == ny) {
                    bv.diag[k] = 1.0;
                    continue;
                }
                bv.diag[k] = mass[nu() + k] + dt * d[nu() + k];
                if (i > 0) bv.west[k] = -mu_node_[node(i, j)] * ix2;
                if (j > 1) bv.south[k] = -2.0 * mu_[k - nx] * iy2;
            }
        return {std::move(bu), std::move(bv)};
    }

    static std::vector<double> pack(const MacVelocity& w) {
        std::vector<double> x(w.u_values());
        x.insert(x.end(), w.v_values().begin(), w.v_values().end());
        return x;
    }
    MacVelocity unpack(const std::vector<double>& x) const {
        MacVelocity w(g_);
        std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(nu()), w.u_values().begin());
        std::copy(x.begin() + static_cast<std::ptrdiff_t>(nu()), x.end(), w.v_values().begin());
        return w;
    }
    MacVelocity apply(const MacVelocity& w) {
        std::vector<double> out(size());
        apply(pack(w), out);
        return unpack(out);
    }

private:
    std::size_t node(int i, int j) const { return static_cast<std::size_t>(j) * (g_.nx + 1) + i; }

    Grid g_;
    std::vector<double> mu_;
    std::vector<double> mu_node_;
    std::vector<double> s11_, s22_, s12_;
};

/// Solves (rho_f - dt L_mu) w = rho_f w_star for the interior faces; wall-normal faces stay 0.
/// `rho` must already be floored.
inline MacVelocity solve_implicit_viscous(const ScalarField& rho, const ScalarField& mu, const MacVelocity& w_star,
                                          double dt, const SolverParams& params, SolveStats* stats = nullptr) {
    const Grid& g = rho.grid();
    ViscousOperator op(mu);
    const std::vector<double> mass = ViscousOperator::pack(face_density(rho));
    std::vector<bool> interior(op.size(), true);
    for (int j = 0; j < g.ny; ++j) {
        interior[static_cast<std::size_t>(j) * (g.nx + 1)] = false;
        interior[static_cast<std::size_t>(j) * (g.nx + 1) + g.nx] = false;
    }
    for (int i = 0; i < g.nx; ++i) {
        interior[op.nu() + i] = false;
        interior[op.nu() + static_cast<std::size_t>(g.ny) * g.nx + i] = false;
    }
    std::vector<double> b = ViscousOperator::pack(w_star);
    for (std::size_t k = 0; k < b.size(); ++k) b[k] = interior[k] ? b[k] * mass[k] : 0.0;
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        op.apply(x, y);
        for (std::size_t k = 0; k < y.size(); ++k) y[k] = interior[k] ? mass[k] * x[k] - dt * y[k] : x[k];
    };
    const double bnorm = std::sqrt(detail::dot(b, b));
    std::vector<double> x0 = ViscousOperator::pack(w_star);
    for (std::size_t k = 0; k < x0.size(); ++k)
        if (!interior[k]) x0[k] = 0.0;
    if (bnorm == 0.0) {
        if (stats) *stats = {};
        return MacVelocity(g);
    }
    const BlockPreconditioner precond(params.preconditioner, op.implicit_blocks(mass, dt));
    return op.unpack(conjugate_gradient(apply, precond, b, std::move(x0), params, params.iteration_cap(g), bnorm,
                                        false, stats));
}

/// First-order upwind advection of each velocity component by the velocity itself
/// (advective form, u* = u - dt (u . grad) u). Wall-normal faces stay zero.
inline MacVelocity advect_velocity_upwind(const MacVelocity& w, double dt) {
    const Grid& g = w.grid();
    const int nx = g.nx, ny = g.ny;
    MacVelocity out(g);
    for (int j = 0; j < ny; ++j)
        for (int i = 1; i < nx; ++i) {
            const double uc = w.u(i, j);
            const double vb = 0.25 * (w.v(i - 1, j) + w.v(i, j) + w.v(i - 1, j + 1) + w.v(i, j + 1));
            const double dudx = uc > 0.0 ? (uc - w.u(i - 1, j)) / g.hx : (w.u(i + 1, j) - uc) / g.hx;
            const double below = j > 0 ? w.u(i, j - 1) : -uc;
            const double above = j < ny - 1 ? w.u(i, j + 1) : -uc;
            const double dudy = vb > 0.0 ? (uc - below) / g.hy : (above - uc) / g.hy;
            out.u(i, j) = uc - dt * (uc * dudx + vb * dudy);
        }
    for (int j = 1; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double vc = w.v(i, j);
            const double ub = 0.25 * (w.u(i, j - 1) + w.u(i + 1, j - 1) + w.u(i, j) + w.u(i + 1, j));
            const double left = i > 0 ? w.v(i - 1, j) : -vc;
            const double right = i < nx - 1 ? w.v(i + 1, j) : -vc;
            const double dvdx = ub > 0.0 ? (vc - left) / g.hx : (right - vc) / g.hx;
            const double dvdy = vc > 0.0 ? (vc - w.v(i, j - 1)) / g.hy : (w.v(i, j + 1) - vc) / g.hy;
            out.v(i, j) = vc - dt * (ub * dvdx + vc * dvdy);
        }
    return out;
}

/// Upwind transport of rho and of rho*theta with the same face mass fluxes. theta is recovered
/// as a convex combination of the donor temperatures weighted by transported mass, so constants
/// and the minimum principle survive exactly; cells that end with zero mass keep their theta.
inline std::pair<ScalarField, ScalarField> transport_mass_and_temperature(const ScalarField& rho,
                                                                          const ScalarField& theta,
                                                                          const MacVelocity& w, double dt) {
    detail::check_courant(outflow_courant(w, dt));
    const auto& r = rho.values();
    const auto& th = theta.values();
    std::vector<double> keep(r.size(), 1.0), mass_in(r.size(), 0.0), heat_in(r.size(), 0.0);
    detail::for_each_upwind_face(w, dt, Topology::walled, [&](std::size_t donor, std::size_t recv, double c) {
        keep[donor] -= c;
        const double m = c * r[donor];
        mass_in[recv] += m;
        heat_in[recv] += m * th[donor];
    });
    ScalarField rho_new(rho.grid(), 0.0, rho.policy());
    ScalarField theta_new(theta.grid(), 0.0, theta.policy());
    for (std::size_t k = 0; k < r.size(); ++k) {
        const double stay = r[k] * keep[k];
        const double total = stay + mass_in[k];
        rho_new.values()[k] = total;
        theta_new.values()[k] = total > 0.0 ? (stay * th[k] + heat_in[k]) / total : th[k];
    }
    return {std::move(rho_new), std::move(theta_new)};
}

/// Shifts p so that integral(p / mu) = 0.
inline void regauge_pressure(ScalarField& p, const ScalarField& mu) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        num += p.values()[k] / mu.values()[k];
        den += 1.0 / mu.values()[k];
    }
    const double shift = num / den;
    for (double& x : p.values()) x -= shift;
}

struct StepReport {
    double dt = 0.0;
    double ke_before = 0.0;   ///< ||sqrt(rho^n) u^n||^2
    double ke_after = 0.0;    ///< ||sqrt(rho^{n+1}) u^{n+1}||^2
    double dissipation = 0.0; ///< dt * integral(4 mu(theta^n) |D(u^{n+1})|^2)
    double energy_residual = 0.0;  ///< ke_after - ke_before + dissipation
    int viscous_iterations = 0;
    int projection_iterations = 0;
    int diffusion_iterations = 0;
};

inline constexpr double rho_bound_tol = 1e-12;
inline constexpr double theta_bound_tol = 1e-10;

inline State step(const State& s, const PhysParams& params, double dt, StepReport* report = nullptr) {
    if (!(dt > 0.0)) throw PreconditionError("step: dt must be positive");
    const Grid& g = s.rho.grid();
    const double floor_value = params.rho_floor * s.bounds.rho_tilde;

    // (1) mass and temperature transport with u^n
    auto [rho_new, theta_adv] = transport_mass_and_temperature(s.rho, s.theta, s.u, dt);

    ScalarField rho_eps = rho_new;
    for (double& x : rho_eps.values()) x = std::max(x, floor_value);

    // (2) momentum: advection, then implicit viscosity with mu(theta^n)
    const ScalarField mu = mu_of(s.theta, params.alpha);
    const MacVelocity u_star = advect_velocity_upwind(s.u, dt);
    SolveStats visc_stats;
    MacVelocity u_visc = solve_implicit_viscous(rho_eps, mu, u_star, dt, params.solver, &visc_stats);

    // (3) projection: -div((1/rho) grad phi) = -div(u**)/dt
    ScalarField inv_rho(g);
    for (std::size_t k = 0; k < inv_rho.size(); ++k) inv_rho.values()[k] = 1.0 / rho_eps.values()[k];
    ScalarField rhs = divergence(u_visc);
    for (double& x : rhs.values()) x = -x / dt;
    SolveStats proj_stats;
    ScalarField phi = solve_varcoef_poisson(inv_rho, rhs, params.solver, &proj_stats);
    const MacVelocity corr = face_flux(inv_rho, phi);
    MacVelocity u_new = u_visc;
    for (std::size_t k = 0; k < u_new.u_values().size(); ++k) u_new.u_values()[k] -= dt * corr.u_values()[k];
    for (std::size_t k = 0; k < u_new.v_values().size(); ++k) u_new.v_values()[k] -= dt * corr.v_values()[k];
    u_new.enforce_no_slip();

    // (4) temperature: heating 2 mu |D(u^{n+1})|^2, implicit diffusion with kappa(theta^n)
    const ScalarField dsq = deformation_norm_sq(u_new);
    ScalarField heat_rhs(g);
    for (std::size_t k = 0; k < heat_rhs.size(); ++k)
        heat_rhs.values()[k] =
            rho_eps.values()[k] * theta_adv.values()[k] + dt * 2.0 * mu.values()[k] * dsq.values()[k];
    SolveStats diff_stats;
    ScalarField theta_new =
        solve_implicit_diffusion(rho_eps, kappa_of(s.theta, params.beta), heat_rhs, dt, params.solver, &diff_stats);

    State out;
    out.bounds = s.bounds;
    out.t = s.t + dt;
    out.p = std::move(phi);
    regauge_pressure(out.p, mu_of(theta_new, params.alpha));
    out.rho = std::move(rho_new);
    out.u = std::move(u_new);
    out.theta = std::move(theta_new);

    if (!out.rho.all_finite() || !out.theta.all_finite() || !out.u.all_finite() || !out.p.all_finite())
        throw InvariantError("step produced non-finite values");
    const double rmin = out.rho.min(), rmax = out.rho.max(), tmin = out.theta.min();
    if (rmin < -rho_bound_tol || rmax > s.bounds.rho_tilde + rho_bound_tol || tmin < s.bounds.theta_lower - theta_bound_tol) {
        std::ostringstream os;
        os << std::setprecision(17) << "bound violation: min rho " << rmin << ", max rho " << rmax << " (rho_tilde "
           << s.bounds.rho_tilde << "), min theta " << tmin << " (theta_lower " << s.bounds.theta_lower << ")";
        throw InvariantError(os.str());
    }

    if (report) {
        report->dt = dt;
        report->ke_before = kinetic_energy(s.rho, s.u);
        report->ke_after = kinetic_energy(out.rho, out.u);
        report->dissipation = dt * 4.0 * weighted_integrate(mu, dsq);
        report->energy_residual = report->ke_after - report->ke_before + report->dissipation;
        report->viscous_iterations = visc_stats.iterations;
        report->projection_iterations = proj_stats.iterations;
        report->diffusion_iterations = diff_stats.iterations;
    }
    return out;
}

/// Called with the current state and the report accumulated over the steps since the previous
/// call (null for the initial state): dt, dissipation and energy_residual are sums.
using StepObserver = std::function<void(const State&, const StepReport*)>;

/// Advances s0 to t_end with adaptive steps min(cfl_dt, t_end - t). The observer sees the
/// initial state, every `every`-th step, and the final step.
inline State run(State s, const PhysParams& params, double t_end, const StepObserver& observer = {}, int every = 1) {
    params.validate();
    if (every < 1) throw PreconditionError("run: output cadence must be >= 1");
    if (observer) observer(s, nullptr);
    const double eps = 1e-12 * std::max(1.0, std::abs(t_end));
    long n = 0;
    StepReport window;  // accumulated since the last observation
    bool fresh = true;
    while (s.t < t_end - eps) {
        double dt = cfl_dt(s, params);
        if (s.t + dt > t_end - eps) dt = t_end - s.t;
        StepReport rep;
        try {
            s = step(s, params, dt, &rep);
        } catch (const Error& e) {
            std::ostringstream os;
            os << std::setprecision(17) << "step failed at t = " << s.t << ": " << e.what();
            throw SimulationError(s.t, os.str());
        }
        ++n;
        if (fresh) {
            window = rep;
            fresh = false;
        } else {
            window.dt += rep.dt;
            window.ke_after = rep.ke_after;
            window.dissipation += rep.dissipation;
            window.energy_residual += rep.energy_residual;
            window.viscous_iterations += rep.viscous_iterations;
            window.projection_iterations += rep.projection_iterations;
            window.diffusion_iterations += rep.diffusion_iterations;
        }
        const bool last = !(s.t < t_end - eps);
        if (observer && (n % every == 0 || last)) {
            observer(s, &window);
            fresh = true;
        }
    }
    return s;
}

}  // namespace nhns
