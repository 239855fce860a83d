#pragma once

/// Uniform staggered (MAC) grid on a rectangle, the discrete fields living on it, and the
/// discrete differential and integral operators shared by the solver and the diagnostics.
///
/// Layout conventions:
///   - cell (i, j), 0 <= i < nx, 0 <= j < ny, centre (x0 + (i+1/2) hx, y0 + (j+1/2) hy);
///   - x-velocity on vertical faces (i, j), 0 <= i <= nx, located at (x0 + i hx, y0 + (j+1/2) hy);
///   - y-velocity on horizontal faces (i, j), 0 <= j <= ny, located at (x0 + (i+1/2) hx, y0 + j hy);
///   - nodes (i, j), 0 <= i <= nx, 0 <= j <= ny, at (x0 + i hx, y0 + j hy).
/// All arrays are row-major: the fastest index is i.
///
/// Tangential velocity at a wall is zero (no-slip). Stencils that reach across a wall use the
/// reflected ghost value -u, so the wall value interpolates to exactly zero.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nhns/error.hpp"

namespace nhns {

struct Grid {
    int nx = 0;
    int ny = 0;
    double x0 = 0.0;
    double y0 = 0.0;
    double lx = 1.0;
    double ly = 1.0;
    double hx = 1.0;
    double hy = 1.0;
    double diameter = std::sqrt(2.0);

    static Grid make(int nx, int ny, double x0, double y0, double lx, double ly) {
        if (nx < 1 || ny < 1) throw PreconditionError("grid needs at least one cell per direction");
        if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
            throw PreconditionError("grid extents must be positive and finite");
        Grid g;
        g.nx = nx;
        g.ny = ny;
        g.x0 = x0;
        g.y0 = y0;
        g.lx = lx;
        g.ly = ly;
        g.hx = lx / nx;
        g.hy = ly / ny;
        g.diameter = std::hypot(lx, ly);
        return g;
    }
    static Grid unit_square(int n) { return make(n, n, 0.0, 0.0, 1.0, 1.0); }

    double xc(int i) const { return x0 + (i + 0.5) * hx; }
    double yc(int j) const { return y0 + (j + 0.5) * hy; }
    double xn(int i) const { return x0 + i * hx; }
    double yn(int j) const { return y0 + j * hy; }
    double cell_area() const { return hx * hy; }
    double area() const { return lx * ly; }
    double h() const { return std::min(hx, hy); }
    std::size_t cells() const { return static_cast<std::size_t>(nx) * ny; }

    bool operator==(const Grid&) const = default;
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* op) {
    if (!(a == b)) throw StructuralError(std::string(op) + ": fields live on different grids");
}

/// Boundary treatment of a cell-centred field where a stencil reaches across a wall.
struct BoundaryPolicy {
    enum class Kind { neumann_zero, dirichlet, extrapolate };
    Kind kind = Kind::neumann_zero;
    double value = 0.0;

    static BoundaryPolicy neumann() { return {}; }
    static BoundaryPolicy dirichlet(double v) { return {Kind::dirichlet, v}; }
    static BoundaryPolicy extrapolate() { return {Kind::extrapolate, 0.0}; }
};

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const Grid& g, double fill = 0.0, BoundaryPolicy policy = {})
        : grid_(g), policy_(policy), data_(g.cells(), fill) {}

    const Grid& grid() const { return grid_; }
    BoundaryPolicy policy() const { return policy_; }
    void set_policy(BoundaryPolicy p) { policy_ = p; }

    double& operator()(int i, int j) { return data_[idx(i, j)]; }
    double operator()(int i, int j) const { return data_[idx(i, j)]; }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }
    std::size_t size() const { return data_.size(); }

    double min() const { return *std::min_element(data_.begin(), data_.end()); }
    double max() const { return *std::max_element(data_.begin(), data_.end()); }
    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
    }

    template <class F>
    static ScalarField sample(const Grid& g, F&& f, BoundaryPolicy policy = {}) {
        ScalarField out(g, 0.0, policy);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) out(i, j) = f(g.xc(i), g.yc(j));
        return out;
    }

private:
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * grid_.nx + i; }

    Grid grid_;
    BoundaryPolicy policy_;
    std::vector<double> data_;
};

/// Node-valued scalar; used for stream functions.
class NodeField {
public:
    NodeField() = default;
    explicit NodeField(const Grid& g, double fill = 0.0)
        : grid_(g), data_(static_cast<std::size_t>(g.nx + 1) * (g.ny + 1), fill) {}

    const Grid& grid() const { return grid_; }
    double& operator()(int i, int j) { return data_[idx(i, j)]; }
    double operator()(int i, int j) const { return data_[idx(i, j)]; }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    template <class F>
    static NodeField sample(const Grid& g, F&& f) {
        NodeField out(g);
        for (int j = 0; j <= g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) out(i, j) = f(g.xn(i), g.yn(j));
        return out;
    }

private:
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * (grid_.nx + 1) + i; }

    Grid grid_;
    std::vector<double> data_;
};

class MacVelocity {
public:
    MacVelocity() = default;
    explicit MacVelocity(const Grid& g, double u_fill = 0.0, double v_fill = 0.0)
        : grid_(g),
          u_(static_cast<std::size_t>(g.nx + 1) * g.ny, u_fill),
          v_(static_cast<std::size_t>(g.nx) * (g.ny + 1), v_fill) {}

    const Grid& grid() const { return grid_; }

    double& u(int i, int j) { return u_[static_cast<std::size_t>(j) * (grid_.nx + 1) + i]; }
    double u(int i, int j) const { return u_[static_cast<std::size_t>(j) * (grid_.nx + 1) + i]; }
    double& v(int i, int j) { return v_[static_cast<std::size_t>(j) * grid_.nx + i]; }
    double v(int i, int j) const { return v_[static_cast<std::size_t>(j) * grid_.nx + i]; }

    std::vector<double>& u_values() { return u_; }
    const std::vector<double>& u_values() const { return u_; }
    std::vector<double>& v_values() { return v_; }
    const std::vector<double>& v_values() const { return v_; }

    /// Pin the wall-normal components to zero.
    void enforce_no_slip() {
        for (int j = 0; j < grid_.ny; ++j) u(0, j) = u(grid_.nx, j) = 0.0;
        for (int i = 0; i < grid_.nx; ++i) v(i, 0) = v(i, grid_.ny) = 0.0;
    }
    bool satisfies_no_slip() const {
        for (int j = 0; j < grid_.ny; ++j)
            if (u(0, j) != 0.0 || u(grid_.nx, j) != 0.0) return false;
        for (int i = 0; i < grid_.nx; ++i)
            if (v(i, 0) != 0.0 || v(i, grid_.ny) != 0.0) return false;
        return true;
    }
    bool all_finite() const {
        auto fin = [](double x) { return std::isfinite(x); };
        return std::all_of(u_.begin(), u_.end(), fin) && std::all_of(v_.begin(), v_.end(), fin);
    }
    double max_abs() const {
        double m = 0.0;
        for (double x : u_) m = std::max(m, std::abs(x));
        for (double x : v_) m = std::max(m, std::abs(x));
        return m;
    }
    double max_abs_u() const {
        double m = 0.0;
        for (double x : u_) m = std::max(m, std::abs(x));
        return m;
    }
    double max_abs_v() const {
        double m = 0.0;
        for (double x : v_) m = std::max(m, std::abs(x));
        return m;
    }

    /// Samples an analytic velocity (ux(x,y), uy(x,y)) at the face centres.
    template <class FU, class FV>
    static MacVelocity sample(const Grid& g, FU&& fu, FV&& fv) {
        MacVelocity out(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) out.u(i, j) = fu(g.xn(i), g.yc(j));
        for (int j = 0; j <= g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) out.v(i, j) = fv(g.xc(i), g.yn(j));
        return out;
    }

private:
    Grid grid_;
    std::vector<double> u_;
    std::vector<double> v_;
};

// ---------------------------------------------------------------------------------------------
// Differential operators

inline ScalarField divergence(const MacVelocity& w) {
    const Grid& g = w.grid();
    ScalarField out(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            out(i, j) = (w.u(i + 1, j) - w.u(i, j)) / g.hx + (w.v(i, j + 1) - w.v(i, j)) / g.hy;
    return out;
}

namespace detail {

/// Gradient across boundary face; `inner` is the cell next to the wall, `sign` is +1 on the
/// high side of the domain and -1 on the low side, `h` the cell size, `interior` the gradient
/// on the neighbouring interior face (for extrapolation).
inline double boundary_gradient(const BoundaryPolicy& bp, double inner, double sign, double h,
                                double interior) {
    switch (bp.kind) {
        case BoundaryPolicy::Kind::neumann_zero:
            return 0.0;
        case BoundaryPolicy::Kind::dirichlet:
            return sign * (bp.value - inner) / (0.5 * h);
        case BoundaryPolicy::Kind::extrapolate:
            return interior;
    }
    return 0.0;
}

}  // namespace detail

inline MacVelocity grad_to_faces(const ScalarField& p) {
    const Grid& g = p.grid();
    const BoundaryPolicy bp = p.policy();
    MacVelocity out(g);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 1; i < g.nx; ++i) out.u(i, j) = (p(i, j) - p(i - 1, j)) / g.hx;
        const double left_in = g.nx > 1 ? out.u(1, j) : 0.0;
        const double right_in = g.nx > 1 ? out.u(g.nx - 1, j) : 0.0;
        out.u(0, j) = detail::boundary_gradient(bp, p(0, j), -1.0, g.hx, left_in);
        out.u(g.nx, j) = detail::boundary_gradient(bp, p(g.nx - 1, j), 1.0, g.hx, right_in);
    }
    for (int i = 0; i < g.nx; ++i) {
        for (int j = 1; j < g.ny; ++j) out.v(i, j) = (p(i, j) - p(i, j - 1)) / g.hy;
        const double bot_in = g.ny > 1 ? out.v(i, 1) : 0.0;
        const double top_in = g.ny > 1 ? out.v(i, g.ny - 1) : 0.0;
        out.v(i, 0) = detail::boundary_gradient(bp, p(i, 0), -1.0, g.hy, bot_in);
        out.v(i, g.ny) = detail::boundary_gradient(bp, p(i, g.ny - 1), 1.0, g.hy, top_in);
    }
    return out;
}

/// du/dy at node (i, j), reflecting across the bottom and top walls.
inline double du_dy_node(const MacVelocity& w, int i, int j) {
    const Grid& g = w.grid();
    const double above = j < g.ny ? w.u(i, j) : -w.u(i, g.ny - 1);
    const double below = j > 0 ? w.u(i, j - 1) : -w.u(i, 0);
    return (above - below) / g.hy;
}

/// dv/dx at node (i, j), reflecting across the left and right walls.
inline double dv_dx_node(const MacVelocity& w, int i, int j) {
    const Grid& g = w.grid();
    const double right = i < g.nx ? w.v(i, j) : -w.v(g.nx - 1, j);
    const double left = i > 0 ? w.v(i - 1, j) : -w.v(0, j);
    return (right - left) / g.hx;
}

/// Off-diagonal deformation D12 = (du/dy + dv/dx)/2 at every node.
inline NodeField shear_at_nodes(const MacVelocity& w) {
    const Grid& g = w.grid();
    NodeField out(g);
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) out(i, j) = 0.5 * (du_dy_node(w, i, j) + dv_dx_node(w, i, j));
    return out;
}

/// |D(u)|^2 at cell centres. Diagonal entries are exact cell differences; the squared
/// off-diagonal entry is the mean of its four corner-node values, which makes
/// sum(|D|^2) over cells equal to the node-based dissipation functional.
inline ScalarField deformation_norm_sq(const MacVelocity& w) {
    const Grid& g = w.grid();
    const NodeField d12 = shear_at_nodes(w);
    ScalarField out(g);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const double d11 = (w.u(i + 1, j) - w.u(i, j)) / g.hx;
            const double d22 = (w.v(i, j + 1) - w.v(i, j)) / g.hy;
            const double a = d12(i, j), b = d12(i + 1, j), c = d12(i, j + 1), d = d12(i + 1, j + 1);
            const double off = 0.25 * (a * a + b * b + c * c + d * d);
            out(i, j) = d11 * d11 + d22 * d22 + 2.0 * off;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Transport

enum class Topology { walled, periodic };

/// Largest per-cell outflow Courant number dt * sum(outgoing face speed / h). The upwind update
/// is a convex combination exactly when this is at most one.
inline double outflow_courant(const MacVelocity& w, double dt, Topology topo = Topology::walled) {
    const Grid& g = w.grid();
    double worst = 0.0;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            double ul = w.u(i, j), ur = w.u(i + 1, j), vb = w.v(i, j), vt = w.v(i, j + 1);
            if (topo == Topology::periodic) {
                if (i == g.nx - 1) ur = w.u(0, j);
                if (j == g.ny - 1) vt = w.v(i, 0);
            }
            const double out = std::max(ur, 0.0) / g.hx + std::max(-ul, 0.0) / g.hx +
                               std::max(vt, 0.0) / g.hy + std::max(-vb, 0.0) / g.hy;
            worst = std::max(worst, dt * out);
        }
    }
    return worst;
}

namespace detail {

inline void check_courant(double courant) {
    if (!(courant <= 1.0 + 1e-12)) {
        std::ostringstream os;
        os << std::setprecision(6) << "CFL violation: outflow Courant number " << courant << " > 1";
        throw CflError(os.str(), courant);
    }
}

/// Visits each face once with (donor cell, receiver cell, Courant fraction >= 0) for every
/// face that carries flow between two cells. Wall faces are skipped under `walled` topology
/// (their normal velocity is pinned to zero); under `periodic` the low face of the domain is
/// identified with the high face.
template <class Visit>
void for_each_upwind_face(const MacVelocity& w, double dt, Topology topo, Visit&& visit) {
    const Grid& g = w.grid();
    const int nx = g.nx, ny = g.ny;
    auto cell = [nx](int i, int j) { return static_cast<std::size_t>(j) * nx + i; };
    const bool per = topo == Topology::periodic;
    for (int j = 0; j < ny; ++j) {
        const int i_begin = per ? 0 : 1;
        for (int i = i_begin; i < nx; ++i) {
            const double s = w.u(i, j);
            const int il = i == 0 ? nx - 1 : i - 1;
            const double c = std::abs(s) * dt / g.hx;
            if (s > 0.0) visit(cell(il, j), cell(i, j), c);
            else if (s < 0.0) visit(cell(i, j), cell(il, j), c);
        }
    }
    for (int j = per ? 0 : 1; j < ny; ++j) {
        const int jb = j == 0 ? ny - 1 : j - 1;
        for (int i = 0; i < nx; ++i) {
            const double s = w.v(i, j);
            const double c = std::abs(s) * dt / g.hy;
            if (s > 0.0) visit(cell(i, jb), cell(i, j), c);
            else if (s < 0.0) visit(cell(i, j), cell(i, jb), c);
        }
    }
}

}  // namespace detail

/// First-order upwind update of d f/dt + div(f v) = 0 in flux form, written as the convex
/// combination f_new = f (1 - outflow) + sum(inflow * f_upwind). Conservative, and monotone
/// when `outflow_courant(v, dt) <= 1` and v is discretely divergence free.
inline ScalarField advect_scalar_upwind(const ScalarField& f, const MacVelocity& w, double dt,
                                        Topology topo = Topology::walled) {
    require_same_grid(f.grid(), w.grid(), "advect_scalar_upwind");
    if (dt < 0.0) throw PreconditionError("advect_scalar_upwind: negative dt");
    detail::check_courant(outflow_courant(w, dt, topo));
    const auto& in = f.values();
    std::vector<double> keep(in.size(), 1.0);
    std::vector<double> gain(in.size(), 0.0);
    detail::for_each_upwind_face(w, dt, topo, [&](std::size_t donor, std::size_t recv, double c) {
        keep[donor] -= c;
        gain[recv] += c * in[donor];
    });
    ScalarField out(f.grid(), 0.0, f.policy());
    auto& o = out.values();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = in[k] * keep[k] + gain[k];
    return out;
}

// ---------------------------------------------------------------------------------------------
// Quadrature and norms (midpoint rule everywhere)

inline double integrate(const ScalarField& f) {
    double s = 0.0;
    for (double x : f.values()) s += x;
    return s * f.grid().cell_area();
}

inline double weighted_integrate(const ScalarField& w, const ScalarField& f) {
    require_same_grid(w.grid(), f.grid(), "weighted_integrate");
    double s = 0.0;
    const auto& a = w.values();
    const auto& b = f.values();
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s * f.grid().cell_area();
}

enum class NormKind { l2, l4, linf, h1_seminorm };

inline double norm(const ScalarField& f, NormKind kind) {
    const Grid& g = f.grid();
    const double da = g.cell_area();
    switch (kind) {
        case NormKind::l2: {
            double s = 0.0;
            for (double x : f.values()) s += x * x;
            return std::sqrt(s * da);
        }
        case NormKind::l4: {
            double s = 0.0;
            for (double x : f.values()) s += (x * x) * (x * x);
            return std::pow(s * da, 0.25);
        }
        case NormKind::linf: {
            double m = 0.0;
            for (double x : f.values()) m = std::max(m, std::abs(x));
            return m;
        }
        case NormKind::h1_seminorm: {
            // Face differences; wall faces carry half weight and the policy's one-sided gradient.
            const MacVelocity grad = grad_to_faces(f);
            double s = 0.0;
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i <= g.nx; ++i) {
                    const double wgt = (i == 0 || i == g.nx) ? 0.5 : 1.0;
                    s += wgt * grad.u(i, j) * grad.u(i, j);
                }
            for (int j = 0; j <= g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    const double wgt = (j == 0 || j == g.ny) ? 0.5 : 1.0;
                    s += wgt * grad.v(i, j) * grad.v(i, j);
                }
            return std::sqrt(s * da);
        }
    }
    return 0.0;
}

/// Quadrature weight of node (i, j) relative to a cell area: (number of adjacent cells) / 4.
inline double node_weight(const Grid& g, int i, int j) {
    const double wx = (i == 0 || i == g.nx) ? 0.5 : 1.0;
    const double wy = (j == 0 || j == g.ny) ? 0.5 : 1.0;
    return wx * wy;
}

/// Cell-centred velocity reconstruction (face averages).
inline std::array<double, 2> cell_velocity(const MacVelocity& w, int i, int j) {
    return {0.5 * (w.u(i, j) + w.u(i + 1, j)), 0.5 * (w.v(i, j) + w.v(i, j + 1))};
}

inline double norm(const MacVelocity& w, NormKind kind) {
    const Grid& g = w.grid();
    const double da = g.cell_area();
    switch (kind) {
        case NormKind::l2: {
            double s = 0.0;
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i <= g.nx; ++i)
                    s += ((i == 0 || i == g.nx) ? 0.5 : 1.0) * w.u(i, j) * w.u(i, j);
            for (int j = 0; j <= g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    s += ((j == 0 || j == g.ny) ? 0.5 : 1.0) * w.v(i, j) * w.v(i, j);
            return std::sqrt(s * da);
        }
        case NormKind::l4: {
            double s = 0.0;
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    const auto c = cell_velocity(w, i, j);
                    const double m2 = c[0] * c[0] + c[1] * c[1];
                    s += m2 * m2;
                }
            return std::pow(s * da, 0.25);
        }
        case NormKind::linf:
            return w.max_abs();
        case NormKind::h1_seminorm: {
            double s = 0.0;
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    const double ux = (w.u(i + 1, j) - w.u(i, j)) / g.hx;
                    const double vy = (w.v(i, j + 1) - w.v(i, j)) / g.hy;
                    s += ux * ux + vy * vy;
                }
            for (int j = 0; j <= g.ny; ++j)
                for (int i = 0; i <= g.nx; ++i) {
                    const double uy = du_dy_node(w, i, j);
                    const double vx = dv_dx_node(w, i, j);
                    s += node_weight(g, i, j) * (uy * uy + vx * vx);
                }
            return std::sqrt(s * da);
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------------------------
// Point sampling

inline bool contains(const Grid& g, double x, double y) {
    return x >= g.x0 && x <= g.x0 + g.lx && y >= g.y0 && y <= g.y0 + g.ly;
}

namespace detail {

/// Locates coordinate `s` on a 1-D lattice with first point `first` and spacing `h`,
/// `count` points. Returns the lower index in [0, count-2] and the fractional weight.
inline std::pair<int, double> locate(double s, double first, double h, int count) {
    const double r = (s - first) / h;
    int k = static_cast<int>(std::floor(r));
    k = std::clamp(k, 0, std::max(count - 2, 0));
    return {k, count > 1 ? r - k : 0.0};
}

}  // namespace detail

/// Bilinear interpolation of both face components at (x, y). Rows beyond the first/last face
/// row use the reflected wall ghost so the tangential component vanishes on the wall; points
/// on the boundary return exactly (0, 0).
inline std::array<double, 2> sample_velocity_at(const MacVelocity& w, double x, double y) {
    const Grid& g = w.grid();
    if (!contains(g, x, y)) {
        std::ostringstream os;
        os << std::setprecision(17) << "sample_velocity_at: point (" << x << ", " << y
           << ") outside the domain";
        throw RangeError(os.str());
    }
    if (x == g.x0 || x == g.x0 + g.lx || y == g.y0 || y == g.y0 + g.ly) return {0.0, 0.0};

    // u: columns at x0 + i hx (i = 0..nx), rows at y0 + (j + 1/2) hy extended by ghost rows
    // j = -1 and j = ny.
    auto u_at = [&](int i, int j) {
        if (j < 0) return -w.u(i, 0);
        if (j >= g.ny) return -w.u(i, g.ny - 1);
        return w.u(i, j);
    };
    auto v_at = [&](int i, int j) {
        if (i < 0) return -w.v(0, j);
        if (i >= g.nx) return -w.v(g.nx - 1, j);
        return w.v(i, j);
    };

    auto [iu, fx] = detail::locate(x, g.x0, g.hx, g.nx + 1);
    double ry = (y - (g.y0 - 0.5 * g.hy)) / g.hy;  // ghost row j = -1 sits at index 0
    int ju = std::clamp(static_cast<int>(std::floor(ry)), 0, g.ny);
    double fy = ry - ju;
    const double ux = (1 - fx) * (1 - fy) * u_at(iu, ju - 1) + fx * (1 - fy) * u_at(iu + 1, ju - 1) +
                      (1 - fx) * fy * u_at(iu, ju) + fx * fy * u_at(iu + 1, ju);

    double rx = (x - (g.x0 - 0.5 * g.hx)) / g.hx;
    int iv = std::clamp(static_cast<int>(std::floor(rx)), 0, g.nx);
    double gx = rx - iv;
    auto [jv, gy] = detail::locate(y, g.y0, g.hy, g.ny + 1);
    const double uy = (1 - gx) * (1 - gy) * v_at(iv - 1, jv) + gx * (1 - gy) * v_at(iv, jv) +
                      (1 - gx) * gy * v_at(iv - 1, jv + 1) + gx * gy * v_at(iv, jv + 1);
    return {ux, uy};
}

/// Bilinear interpolation of a cell-centred field; constant extrapolation in the half cell
/// next to each wall.
inline double sample_scalar_at(const ScalarField& f, double x, double y) {
    const Grid& g = f.grid();
    if (!contains(g, x, y)) throw RangeError("sample_scalar_at: point outside the domain");
    const double cx = std::clamp(x, g.xc(0), g.xc(g.nx - 1));
    const double cy = std::clamp(y, g.yc(0), g.yc(g.ny - 1));
    auto [i, fx] = detail::locate(cx, g.xc(0), g.hx, g.nx);
    auto [j, fy] = detail::locate(cy, g.yc(0), g.hy, g.ny);
    const int i1 = std::min(i + 1, g.nx - 1), j1 = std::min(j + 1, g.ny - 1);
    return (1 - fx) * (1 - fy) * f(i, j) + fx * (1 - fy) * f(i1, j) + (1 - fx) * fy * f(i, j1) +
           fx * fy * f(i1, j1);
}

// ---------------------------------------------------------------------------------------------
// Snapshot files
//
//   # nhns field snapshot
//   name <field name>
//   time <t>
//   dims <nx> <ny>
//   extent <x0> <y0> <lx> <ly>
//   <ny lines, row j = 0 first, nx values each>
//
// Every number is written with 17 significant digits.

struct Snapshot {
    std::string name;
    double time = 0.0;
    ScalarField field;
};

inline void write_snapshot(std::ostream& os, const std::string& name, double time,
                           const ScalarField& f) {
    const Grid& g = f.grid();
    os << std::setprecision(17);
    os << "# nhns field snapshot\n";
    os << "name " << name << '\n';
    os << "time " << time << '\n';
    os << "dims " << g.nx << ' ' << g.ny << '\n';
    os << "extent " << g.x0 << ' ' << g.y0 << ' ' << g.lx << ' ' << g.ly << '\n';
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            if (i) os << ' ';
            os << f(i, j);
        }
        os << '\n';
    }
}

inline Snapshot read_snapshot(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# nhns field snapshot", 0) != 0)
        throw StructuralError("snapshot: missing header line");
    Snapshot snap;
    int nx = 0, ny = 0;
    double x0 = 0, y0 = 0, lx = 0, ly = 0;
    bool have_dims = false, have_extent = false;
    for (int k = 0; k < 4; ++k) {
        if (!std::getline(is, line)) throw StructuralError("snapshot: truncated header");
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "name") ls >> snap.name;
        else if (key == "time") ls >> snap.time;
        else if (key == "dims") { ls >> nx >> ny; have_dims = true; }
        else if (key == "extent") { ls >> x0 >> y0 >> lx >> ly; have_extent = true; }
        else throw StructuralError("snapshot: unknown header key '" + key + "'");
        if (ls.fail()) throw StructuralError("snapshot: malformed header line '" + line + "'");
    }
    if (!have_dims || !have_extent) throw StructuralError("snapshot: incomplete header");
    snap.field = ScalarField(Grid::make(nx, ny, x0, y0, lx, ly));
    for (int j = 0; j < ny; ++j) {
        if (!std::getline(is, line)) throw StructuralError("snapshot: missing data rows");
        std::istringstream ls(line);
        for (int i = 0; i < nx; ++i) {
            if (!(ls >> snap.field(i, j))) throw StructuralError("snapshot: short data row");
        }
    }
    if (!snap.field.all_finite()) throw StructuralError("snapshot: non-finite values");
    return snap;
}

}  // namespace nhns
