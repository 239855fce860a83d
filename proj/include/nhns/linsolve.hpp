#pragma once

/// Symmetric elliptic solves on cell-centred unknowns: the variable-coefficient pressure
/// Poisson problem with zero-flux walls and the backward-Euler temperature diffusion system.
/// Both are solved by preconditioned conjugate gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "nhns/error.hpp"
#include "nhns/mesh.hpp"

namespace nhns {

enum class Preconditioner { none, jacobi, ic };

struct SolverParams {
    double rel_tol = 1e-10;
    int max_iters = 0;  ///< 0 selects 20 * (nx + ny)
    Preconditioner preconditioner = Preconditioner::ic;

    void validate() const {
        if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw PreconditionError("solver rel_tol must lie in (0, 1)");
        if (max_iters < 0) throw PreconditionError("solver max_iters must be >= 1 (or 0 for the default)");
    }
    int iteration_cap(const Grid& g) const { return max_iters > 0 ? max_iters : 20 * (g.nx + g.ny); }
};

struct SolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
    std::vector<double> residual_history;  ///< ||r_k|| / reference, one entry per iterate
};

using IterateObserver = std::function<void(int, const std::vector<double>&)>;

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline void remove_mean(std::vector<double>& r) {
    const double m = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    for (double& x : r) x -= m;
}

}  // namespace detail

/// Symmetric 5-point matrix on an mx * my index grid (k = i + mx j). Off-diagonal entries are
/// stored once: west[k] = A(k, k-1), south[k] = A(k, k-mx); both are zero across the grid edge.
struct Stencil5 {
    int mx = 0;
    int my = 0;
    std::vector<double> diag, west, south;

    Stencil5() = default;
    Stencil5(int mx_, int my_)
        : mx(mx_), my(my_), diag(static_cast<std::size_t>(mx_) * my_, 0.0), west(diag.size(), 0.0),
          south(diag.size(), 0.0) {}
    std::size_t size() const { return diag.size(); }

    /// max_k sum_l |A(k, l)|
    double abs_row_max() const {
        double m = 0.0;
        const std::size_t n = size();
        for (std::size_t k = 0; k < n; ++k) {
            double s = std::abs(diag[k]) + std::abs(west[k]) + std::abs(south[k]);
            if ((k + 1) % mx != 0) s += std::abs(west[k + 1]);
            if (k + mx < n) s += std::abs(south[k + mx]);
            m = std::max(m, s);
        }
        return m;
    }
};

/// Modified incomplete Cholesky, MIC(0), of a Stencil5 matrix.
class IncompleteCholesky {
public:
    explicit IncompleteCholesky(Stencil5 a, double tau = 0.97, double sigma = 0.25) : a_(std::move(a)) {
        const int mx = a_.mx;
        inv_.assign(a_.size(), 0.0);
        for (int j = 0; j < a_.my; ++j)
            for (int i = 0; i < mx; ++i) {
                const std::size_t k = static_cast<std::size_t>(j) * mx + i;
                double e = a_.diag[k];
                if (i > 0) {
                    const double w = a_.west[k] * inv_[k - 1];
                    const double north_of_w = j + 1 < a_.my ? a_.south[k - 1 + mx] : 0.0;
                    e -= w * w + tau * a_.west[k] * north_of_w * inv_[k - 1] * inv_[k - 1];
                }
                if (j > 0) {
                    const double s = a_.south[k] * inv_[k - mx];
                    const double east_of_s = i + 1 < mx ? a_.west[k - mx + 1] : 0.0;
                    e -= s * s + tau * a_.south[k] * east_of_s * inv_[k - mx] * inv_[k - mx];
                }
                if (!(e >= sigma * a_.diag[k])) e = a_.diag[k];
                if (!(e > 0.0)) throw PreconditionError("incomplete Cholesky: non-positive pivot");
                inv_[k] = 1.0 / std::sqrt(e);
            }
        q_.assign(a_.size(), 0.0);
    }

    std::size_t size() const { return a_.size(); }

    /// z = (L L^T)^{-1} r on n = size() entries.
    void apply(const double* r, double* z) const {
        const int mx = a_.mx;
        const std::size_t n = a_.size();
        for (std::size_t k = 0; k < n; ++k) {
            double t = r[k];
            if (k % mx != 0) t -= a_.west[k] * inv_[k - 1] * q_[k - 1];
            if (k >= static_cast<std::size_t>(mx)) t -= a_.south[k] * inv_[k - mx] * q_[k - mx];
            q_[k] = t * inv_[k];
        }
        for (std::size_t k = n; k-- > 0;) {
            double t = q_[k];
            if ((k + 1) % mx != 0) t -= a_.west[k + 1] * inv_[k] * z[k + 1];
            if (k + mx < n) t -= a_.south[k + mx] * inv_[k] * z[k + mx];
            z[k] = t * inv_[k];
        }
    }

private:
    Stencil5 a_;
    std::vector<double> inv_;
    mutable std::vector<double> q_;
};

/// Preconditioner selected by SolverParams. The ic variant factors each diagonal block given as
/// a Stencil5; blocks are laid out back to back.
class BlockPreconditioner {
public:
    BlockPreconditioner(Preconditioner kind, std::vector<Stencil5> blocks) : kind_(kind), blocks_(std::move(blocks)) {
        for (const auto& b : blocks_) {
            diag_.insert(diag_.end(), b.diag.begin(), b.diag.end());
            if (kind == Preconditioner::ic) ic_.emplace_back(b);
        }
        if (kind == Preconditioner::jacobi)
            for (double d : diag_)
                if (!(d > 0.0)) throw PreconditionError("Jacobi preconditioner: non-positive diagonal");
    }

    std::size_t size() const { return diag_.size(); }
    /// || |B| |x| ||_2 for the block-diagonal part B; scales the round-off floor of b - A x.
    double abs_product_norm(const std::vector<double>& x) const {
        double s = 0.0;
        std::size_t off = 0;
        for (const auto& b : blocks_) {
            const std::size_t n = b.size();
            const double* xb = x.data() + off;
            for (std::size_t k = 0; k < n; ++k) {
                double t = std::abs(b.diag[k] * xb[k]);
                if (k % b.mx != 0) t += std::abs(b.west[k] * xb[k - 1]);
                if (k >= static_cast<std::size_t>(b.mx)) t += std::abs(b.south[k] * xb[k - b.mx]);
                if ((k + 1) % b.mx != 0) t += std::abs(b.west[k + 1] * xb[k + 1]);
                if (k + b.mx < n) t += std::abs(b.south[k + b.mx] * xb[k + b.mx]);
                s += t * t;
            }
            off += n;
        }
        return std::sqrt(s);
    }

    void operator()(const std::vector<double>& r, std::vector<double>& z) const {
        switch (kind_) {
            case Preconditioner::none: z = r; break;
            case Preconditioner::jacobi:
                for (std::size_t k = 0; k < r.size(); ++k) z[k] = r[k] / diag_[k];
                break;
            case Preconditioner::ic: {
                std::size_t off = 0;
                for (const auto& f : ic_) {
                    f.apply(r.data() + off, z.data() + off);
                    off += f.size();
                }
                break;
            }
        }
    }

private:
    Preconditioner kind_;
    std::vector<Stencil5> blocks_;
    std::vector<double> diag_;
    std::vector<IncompleteCholesky> ic_;
};

/// Preconditioned conjugate gradients for a symmetric positive (semi-)definite operator.
///
/// Iterates until ||b - A x|| <= rel_tol * reference, or until the true residual is at the
/// round-off level eps || |A| |x| || when the preconditioner can estimate it. With `singular` set the operator is
/// assumed to have the constants as kernel; the residual is kept mean-free.
template <class Apply, class Precond>
std::vector<double> conjugate_gradient(Apply&& apply, const Precond& precond,
                                       const std::vector<double>& b, std::vector<double> x,
                                       const SolverParams& params, int max_iters, double reference,
                                       bool singular, SolveStats* stats = nullptr,
                                       const IterateObserver& observer = {}) {
    const std::size_t n = b.size();
    if (x.size() != n) throw StructuralError("conjugate_gradient: size mismatch");
    const double target = params.rel_tol * reference;

    std::vector<double> r(n), z(n), p(n), q(n);
    auto true_residual = [&] {
        apply(x, q);
        for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - q[k];
        if (singular) detail::remove_mean(r);
    };
    // Residuals below eps || |A| |x| || are round-off; they are accepted as converged.
    auto rounding_floor = [&] {
        if constexpr (requires { precond.abs_product_norm(x); })
            return std::numeric_limits<double>::epsilon() * precond.abs_product_norm(x);
        else
            return 0.0;
    };
    auto precondition = [&] {
        precond(r, z);
        if (singular) detail::remove_mean(z);
    };

    true_residual();
    double rnorm = std::sqrt(detail::dot(r, r));
    if (stats) {
        stats->residual_history.clear();
        stats->residual_history.push_back(reference > 0 ? rnorm / reference : 0.0);
    }
    if (observer) observer(0, x);
    int it = 0;
    bool converged = rnorm <= target;
    while (!converged) {
        precondition();
        p = z;
        double rz = detail::dot(r, z);
        bool breakdown = false;
        while (true) {
            if (it >= max_iters) {
                std::ostringstream os;
                os << "conjugate gradient did not converge in " << max_iters
                   << " iterations (relative residual " << rnorm / reference << ")";
                throw ConvergenceError(os.str(), rnorm / reference, it);
            }
            apply(p, q);
            const double pq = detail::dot(p, q);
            if (!(pq > 0.0)) {
                breakdown = true;
                break;
            }
            const double step = rz / pq;
            for (std::size_t k = 0; k < n; ++k) {
                x[k] += step * p[k];
                r[k] -= step * q[k];
            }
            if (singular) detail::remove_mean(r);
            ++it;
            rnorm = std::sqrt(detail::dot(r, r));
            if (stats) stats->residual_history.push_back(rnorm / reference);
            if (observer) observer(it, x);
            if (rnorm <= target) break;
            precondition();
            const double rz_new = detail::dot(r, z);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
        }
        // The recursive residual drifts from b - A x; decide on the true one and restart if needed.
        true_residual();
        rnorm = std::sqrt(detail::dot(r, r));
        converged = rnorm <= std::max(target, rounding_floor());
        if (!converged && breakdown) {
            std::ostringstream os;
            os << "conjugate gradient broke down (relative residual " << rnorm / reference << ")";
            throw ConvergenceError(os.str(), rnorm / reference, it);
        }
    }
    if (stats) {
        stats->iterations = it;
        stats->relative_residual = reference > 0 ? rnorm / reference : 0.0;
    }
    return x;
}

namespace detail {

inline double harmonic_mean(double a, double b) { return 2.0 * a * b / (a + b); }

/// Face coefficients of a cell-centred positive coefficient by harmonic averaging.
/// Wall faces carry zero coefficient (no flux).
struct FaceCoefficients {
    std::vector<double> ax;  ///< (nx+1) * ny
    std::vector<double> ay;  ///< nx * (ny+1)
};

inline FaceCoefficients face_coefficients(const ScalarField& a) {
    const Grid& g = a.grid();
    FaceCoefficients fc;
    fc.ax.assign(static_cast<std::size_t>(g.nx + 1) * g.ny, 0.0);
    fc.ay.assign(static_cast<std::size_t>(g.nx) * (g.ny + 1), 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            fc.ax[static_cast<std::size_t>(j) * (g.nx + 1) + i] = harmonic_mean(a(i - 1, j), a(i, j));
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            fc.ay[static_cast<std::size_t>(j) * g.nx + i] = harmonic_mean(a(i, j - 1), a(i, j));
    return fc;
}

/// out = -div(a grad p) with zero-flux walls (5-point stencil).
inline void apply_flux_laplacian(const Grid& g, const FaceCoefficients& fc, const std::vector<double>& p,
                                 std::vector<double>& out) {
    const int nx = g.nx, ny = g.ny;
    const double ix2 = 1.0 / (g.hx * g.hx), iy2 = 1.0 / (g.hy * g.hy);
    for (int j = 0; j < ny; ++j) {
        const std::size_t row = static_cast<std::size_t>(j) * nx;
        const std::size_t frow = static_cast<std::size_t>(j) * (nx + 1);
        for (int i = 0; i < nx; ++i) {
            const std::size_t c = row + i;
            const double pc = p[c];
            double s = 0.0;
            if (i > 0) s += fc.ax[frow + i] * ix2 * (pc - p[c - 1]);
            if (i < nx - 1) s += fc.ax[frow + i + 1] * ix2 * (pc - p[c + 1]);
            if (j > 0) s += fc.ay[row + i] * iy2 * (pc - p[c - nx]);
            if (j < ny - 1) s += fc.ay[row + nx + i] * iy2 * (pc - p[c + nx]);
            out[c] = s;
        }
    }
}

/// Matrix of -div(a grad) scaled by `scale`, plus `shift` on the diagonal.
inline Stencil5 flux_laplacian_stencil(const Grid& g, const FaceCoefficients& fc, double scale = 1.0,
                                       const std::vector<double>* shift = nullptr) {
    const int nx = g.nx, ny = g.ny;
    const double ix2 = scale / (g.hx * g.hx), iy2 = scale / (g.hy * g.hy);
    Stencil5 m(nx, ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const std::size_t frow = static_cast<std::size_t>(j) * (nx + 1);
            const std::size_t k = static_cast<std::size_t>(j) * nx + i;
            m.diag[k] = (fc.ax[frow + i] + fc.ax[frow + i + 1]) * ix2 + (fc.ay[k] + fc.ay[k + nx]) * iy2;
            if (shift) m.diag[k] += (*shift)[k];
            m.west[k] = -fc.ax[frow + i] * ix2;
            m.south[k] = -fc.ay[k] * iy2;
        }
    return m;
}

inline void require_positive(const ScalarField& a, const char* what) {
    for (double x : a.values())
        if (!(x > 0.0) || !std::isfinite(x))
            throw PreconditionError(std::string(what) + " must be positive and finite everywhere");
}

}  // namespace detail

/// Face gradient scaled by the harmonic face coefficient: a_f * (p_right - p_left) / h.
/// Wall faces are zero. This is the flux used by the projection step.
inline MacVelocity face_flux(const ScalarField& a, const ScalarField& p) {
    require_same_grid(a.grid(), p.grid(), "face_flux");
    const Grid& g = a.grid();
    MacVelocity out(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            out.u(i, j) = detail::harmonic_mean(a(i - 1, j), a(i, j)) * (p(i, j) - p(i - 1, j)) / g.hx;
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            out.v(i, j) = detail::harmonic_mean(a(i, j - 1), a(i, j)) * (p(i, j) - p(i, j - 1)) / g.hy;
    return out;
}

/// -div(a grad p) with zero-flux walls.
inline ScalarField apply_varcoef_operator(const ScalarField& a, const ScalarField& p) {
    require_same_grid(a.grid(), p.grid(), "apply_varcoef_operator");
    const auto fc = detail::face_coefficients(a);
    ScalarField out(p.grid());
    detail::apply_flux_laplacian(p.grid(), fc, p.values(), out.values());
    return out;
}

/// Solves -div(a grad p) = rhs with zero-flux walls. The mean of rhs is removed first
/// (compatibility); the returned p has zero plain mean. Callers re-gauge as needed.
inline ScalarField solve_varcoef_poisson(const ScalarField& a, const ScalarField& rhs,
                                         const SolverParams& params, SolveStats* stats = nullptr,
                                         const IterateObserver& observer = {}) {
    require_same_grid(a.grid(), rhs.grid(), "solve_varcoef_poisson");
    params.validate();
    detail::require_positive(a, "solve_varcoef_poisson: coefficient");
    const Grid& g = a.grid();
    std::vector<double> b = rhs.values();
    detail::remove_mean(b);
    const double bnorm = std::sqrt(detail::dot(b, b));
    ScalarField out(g);
    if (bnorm == 0.0) {
        if (stats) *stats = {};
        return out;
    }
    const auto fc = detail::face_coefficients(a);
    const BlockPreconditioner precond(params.preconditioner, {detail::flux_laplacian_stencil(g, fc)});
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        detail::apply_flux_laplacian(g, fc, x, y);
    };
    std::vector<double> x = conjugate_gradient(apply, precond, b, std::vector<double>(b.size(), 0.0), params,
                                               params.iteration_cap(g), bnorm, true, stats, observer);
    detail::remove_mean(x);
    out.values() = std::move(x);
    return out;
}

/// Solves (rho - dt div(kappa grad)) theta = rhs with zero-flux walls.
///
/// Starts from rhs/rho (the dt = 0 solution) and stops once the residual is below rel_tol times
/// the smaller of ||rhs|| and the initial residual, floored at 1e-2 ||rhs|| so the target stays
/// above round-off. The matrix is an M-matrix, so rhs >= rho * c implies theta >= c.
inline ScalarField solve_implicit_diffusion(const ScalarField& rho, const ScalarField& kappa,
                                            const ScalarField& rhs, double dt, const SolverParams& params,
                                            SolveStats* stats = nullptr) {
    require_same_grid(rho.grid(), kappa.grid(), "solve_implicit_diffusion");
    require_same_grid(rho.grid(), rhs.grid(), "solve_implicit_diffusion");
    params.validate();
    detail::require_positive(rho, "solve_implicit_diffusion: density");
    detail::require_positive(kappa, "solve_implicit_diffusion: conductivity");
    if (dt < 0.0) throw PreconditionError("solve_implicit_diffusion: negative dt");
    const Grid& g = rho.grid();
    const auto& r = rho.values();
    const auto& b = rhs.values();
    ScalarField out(g, 0.0, BoundaryPolicy::neumann());
    std::vector<double> x(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) x[k] = b[k] / r[k];
    if (dt == 0.0) {
        if (stats) *stats = {};
        out.values() = std::move(x);
        return out;
    }
    const auto fc = detail::face_coefficients(kappa);
    const BlockPreconditioner precond(params.preconditioner, {detail::flux_laplacian_stencil(g, fc, dt, &r)});
    auto apply = [&](const std::vector<double>& in, std::vector<double>& y) {
        detail::apply_flux_laplacian(g, fc, in, y);
        for (std::size_t k = 0; k < y.size(); ++k) y[k] = r[k] * in[k] + dt * y[k];
    };
    std::vector<double> r0(b.size());
    apply(x, r0);
    for (std::size_t k = 0; k < r0.size(); ++k) r0[k] = b[k] - r0[k];
    const double bnorm = std::sqrt(detail::dot(b, b));
    const double r0norm = std::sqrt(detail::dot(r0, r0));
    const double reference = std::min(bnorm, std::max(r0norm, 1e-2 * bnorm));
    if (r0norm == 0.0 || bnorm == 0.0) {
        if (stats) *stats = {};
        out.values() = std::move(x);
        return out;
    }
    out.values() = conjugate_gradient(apply, precond, b, std::move(x), params, params.iteration_cap(g),
                                      reference, false, stats);
    return out;
}

}  // namespace nhns
