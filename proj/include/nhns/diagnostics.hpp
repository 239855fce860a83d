#pragma once

/// Conserved quantities, decay constants, decay-rate fits, the flow-map identity along
/// particle paths, and empirical constants of the functional inequalities.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nhns/dynamics.hpp"
#include "nhns/error.hpp"
#include "nhns/mesh.hpp"
#include "nhns/scenarios.hpp"

namespace nhns {

struct TheoremConstants {
    double rho_tilde = 0.0;
    double theta_lower = 0.0;
    double d = 0.0;           ///< diameter of the grid rectangle
    double E0 = 0.0;
    double rho_bar = 0.0;
    double theta_star = 0.0;  ///< E0 / (rho_bar |Omega|)
    double sigma1 = 0.0;
    double sigma2 = 0.0;
};

/// integral(rho theta + rho |u|^2 / 2).
inline double total_energy(const State& s) {
    return weighted_integrate(s.rho, s.theta) + 0.5 * kinetic_energy(s.rho, s.u);
}

inline TheoremConstants theorem_constants(const State& s0, const PhysParams& params, const Grid& g) {
    require_same_grid(s0.rho.grid(), g, "theorem_constants");
    TheoremConstants k;
    k.rho_tilde = s0.rho.max();
    k.theta_lower = s0.theta.min();
    k.d = std::hypot(g.lx, g.ly);
    k.E0 = total_energy(s0);
    k.rho_bar = integrate(s0.rho) / g.area();
    if (!(k.rho_bar > 0.0)) throw DegenerateDataError("theorem_constants: initial density has zero mean");
    if (!(k.theta_lower > 0.0)) throw DegenerateDataError("theorem_constants: initial temperature must be positive");
    k.theta_star = k.E0 / (k.rho_bar * g.area());
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double base = pi2 / (k.rho_tilde * k.d * k.d);
    const double ta = std::pow(k.theta_lower, params.alpha);
    const double tb = std::pow(k.theta_lower, params.beta);
    const double q = 1.0 + k.rho_tilde / k.rho_bar;
    k.sigma1 = base * ta;
    k.sigma2 = base * std::min(0.5 * tb / (q * q), ta);
    return k;
}

struct DiagRecord {
    double t = 0.0;
    double mass = 0.0;
    double E_total = 0.0;
    double KE = 0.0;
    double grad_u_sq = 0.0;
    double min_rho = 0.0;
    double max_rho = 0.0;
    double min_theta = 0.0;
    double theta_dist = 0.0;
    double div_residual = 0.0;
    double energy_residual = 0.0;
    double vacuum_measure = 0.0;

    static constexpr std::size_t field_count = 12;
    std::array<double, field_count> as_array() const {
        return {t, mass, E_total, KE, grad_u_sq, min_rho, max_rho, min_theta, theta_dist, div_residual,
                energy_residual, vacuum_measure};
    }
    static DiagRecord from_array(const std::array<double, field_count>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8], a[9], a[10], a[11]};
    }
    bool all_finite() const {
        for (double x : as_array())
            if (!std::isfinite(x)) return false;
        return true;
    }
};

/// `energy_residual` is the per-step energy identity residual reported by the integrator.
inline DiagRecord compute_record(const State& s, const TheoremConstants& k, double c0, double energy_residual = 0.0) {
    DiagRecord r;
    r.t = s.t;
    r.mass = integrate(s.rho);
    r.KE = kinetic_energy(s.rho, s.u);
    r.E_total = weighted_integrate(s.rho, s.theta) + 0.5 * r.KE;
    const double gn = norm(s.u, NormKind::h1_seminorm);
    r.grad_u_sq = gn * gn;
    r.min_rho = s.rho.min();
    r.max_rho = s.rho.max();
    r.min_theta = s.theta.min();
    double dist = 0.0;
    for (double th : s.theta.values()) dist = std::max(dist, std::abs(th - k.theta_star));
    r.theta_dist = dist;
    r.div_residual = norm(divergence(s.u), NormKind::linf);
    r.energy_residual = energy_residual;
    r.vacuum_measure = vacuum_measure(s.rho, c0);
    return r;
}

/// Discrete surrogate for the H^2 distance of theta to theta_star: L-infinity distance plus the
/// discrete H^1 seminorm. Reported only.
inline double theta_distance_surrogate(const State& s, const TheoremConstants& k) {
    double dist = 0.0;
    for (double th : s.theta.values()) dist = std::max(dist, std::abs(th - k.theta_star));
    return dist + norm(s.theta, NormKind::h1_seminorm);
}

// ---------------------------------------------------------------------------------------------
// CSV

inline constexpr const char* csv_header =
    "t,mass,E_total,KE,grad_u_sq,min_rho,max_rho,min_theta,theta_dist,div_residual,energy_residual,vacuum_measure";

inline std::string format_full(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_csv_header(std::ostream& os) { os << csv_header << '\n'; }

inline void write_csv_row(std::ostream& os, const DiagRecord& r) {
    const auto a = r.as_array();
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (k) os << ',';
        os << format_full(a[k]);
    }
    os << '\n';
}

inline std::vector<DiagRecord> read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw StructuralError("diagnostics csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != csv_header) throw StructuralError("diagnostics csv: unexpected header '" + line + "'");
    std::vector<DiagRecord> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<double, DiagRecord::field_count> a{};
        std::stringstream ss(line);
        std::string cell;
        std::size_t k = 0;
        while (std::getline(ss, cell, ',')) {
            if (k >= a.size()) throw StructuralError("diagnostics csv: too many columns on line " + std::to_string(lineno));
            try {
                std::size_t used = 0;
                a[k] = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw StructuralError("diagnostics csv: bad number '" + cell + "' on line " + std::to_string(lineno));
            }
            ++k;
        }
        if (k != a.size()) throw StructuralError("diagnostics csv: too few columns on line " + std::to_string(lineno));
        out.push_back(DiagRecord::from_array(a));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Decay fits

/// Least-squares slope of -log(value) against t over samples with t in [t_lo, t_hi].
inline double fit_decay_rate(const std::vector<std::pair<double, double>>& series, double t_lo, double t_hi) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [t, v] : series) {
        if (t < t_lo || t > t_hi) continue;
        if (!(v > 0.0) || !std::isfinite(v)) {
            std::ostringstream os;
            os << "fit_decay_rate: non-positive value " << v << " at t = " << t;
            throw DomainError(os.str());
        }
        pts.emplace_back(t, -std::log(v));
    }
    if (pts.size() < 8) {
        std::ostringstream os;
        os << "fit_decay_rate: " << pts.size() << " samples in [" << t_lo << ", " << t_hi << "], need at least 8";
        throw PreconditionError(os.str());
    }
    double mt = 0.0, my = 0.0;
    for (const auto& [t, y] : pts) {
        mt += t;
        my += y;
    }
    mt /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double stt = 0.0, sty = 0.0;
    for (const auto& [t, y] : pts) {
        stt += (t - mt) * (t - mt);
        sty += (t - mt) * (y - my);
    }
    if (!(stt > 0.0)) throw PreconditionError("fit_decay_rate: window samples share one time");
    return sty / stt;
}

// ---------------------------------------------------------------------------------------------
// Flow map

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Advects particles with the simulated velocity and compares rho along their paths with the
/// initial density at the seeds. Each step is a midpoint rule with the velocity averaged
/// between the two time levels.
class FlowMapTracer {
public:
    FlowMapTracer(const ScalarField& rho0, std::vector<Point> seeds) : pos_(std::move(seeds)) {
        const Grid& g = rho0.grid();
        for (const auto& p : pos_) {
            if (!(p.x > g.x0 && p.x < g.x0 + g.lx && p.y > g.y0 && p.y < g.y0 + g.ly))
                throw PreconditionError("FlowMapTracer: seeds must lie in the interior of the domain");
            ref_.push_back(sample_scalar_at(rho0, p.x, p.y));
        }
    }

    void advance(const MacVelocity& u_old, const MacVelocity& u_new, double dt) {
        require_same_grid(u_old.grid(), u_new.grid(), "FlowMapTracer::advance");
        const Grid& g = u_old.grid();
        auto vel = [&](double x, double y, double wgt_new) {
            const auto a = sample_velocity_at(u_old, x, y);
            const auto b = sample_velocity_at(u_new, x, y);
            return std::array<double, 2>{(1.0 - wgt_new) * a[0] + wgt_new * b[0], (1.0 - wgt_new) * a[1] + wgt_new * b[1]};
        };
        for (auto& p : pos_) {
            const auto k1 = vel(p.x, p.y, 0.0);
            const double mx = p.x + 0.5 * dt * k1[0], my = p.y + 0.5 * dt * k1[1];
            if (!contains(g, mx, my)) throw InvariantError("FlowMapTracer: particle left the domain");
            const auto k2 = vel(mx, my, 0.5);
            p.x += dt * k2[0];
            p.y += dt * k2[1];
            if (!contains(g, p.x, p.y)) throw InvariantError("FlowMapTracer: particle left the domain");
        }
    }

    /// max over particles of |rho(X(t), t) - rho0(X(0))|.
    double error(const ScalarField& rho) const {
        double e = 0.0;
        for (std::size_t k = 0; k < pos_.size(); ++k)
            e = std::max(e, std::abs(sample_scalar_at(rho, pos_[k].x, pos_[k].y) - ref_[k]));
        return e;
    }

    const std::vector<Point>& positions() const { return pos_; }

private:
    std::vector<Point> pos_;
    std::vector<double> ref_;
};

struct FlowFrame {
    double t = 0.0;
    MacVelocity u;
    ScalarField rho;
};

/// Traces seeds through a sequence of frames (first frame = initial data) up to t_end and
/// returns the final flow-map error.
inline double trace_flow_map(const std::vector<FlowFrame>& frames, const std::vector<Point>& seeds, double t_end) {
    if (frames.empty()) throw PreconditionError("trace_flow_map: no frames");
    if (t_end < frames.front().t || t_end > frames.back().t + 1e-12 * std::max(1.0, std::abs(t_end)))
        throw PreconditionError("trace_flow_map: frames do not cover [t0, t_end]");
    FlowMapTracer tracer(frames.front().rho, seeds);
    std::size_t k = 0;
    while (k + 1 < frames.size() && frames[k + 1].t <= t_end + 1e-12 * std::max(1.0, std::abs(t_end))) {
        const double dt = frames[k + 1].t - frames[k].t;
        if (!(dt > 0.0)) throw PreconditionError("trace_flow_map: frame times must increase");
        tracer.advance(frames[k].u, frames[k + 1].u, dt);
        ++k;
    }
    return tracer.error(frames[k].rho);
}

// ---------------------------------------------------------------------------------------------
// Inequality ratios. An empty result marks a zero denominator.

namespace detail {

inline std::optional<double> ratio(double num, double den) {
    if (!(den > 0.0) || !std::isfinite(den)) return std::nullopt;
    return num / den;
}

}  // namespace detail

/// ||u||_4 / (||u||_2^(1/2) ||grad u||_2^(1/2)).
inline std::optional<double> gn_l4_ratio(const ScalarField& f) {
    return detail::ratio(norm(f, NormKind::l4),
                         std::sqrt(norm(f, NormKind::l2)) * std::sqrt(norm(f, NormKind::h1_seminorm)));
}

inline std::optional<double> gn_l4_ratio(const MacVelocity& w) {
    return detail::ratio(norm(w, NormKind::l4),
                         std::sqrt(norm(w, NormKind::l2)) * std::sqrt(norm(w, NormKind::h1_seminorm)));
}

/// ||f||_p / (||g f||_1 + ||grad f||_2).
inline std::optional<double> weighted_poincare_ratio(const ScalarField& f, const ScalarField& g, double p) {
    require_same_grid(f.grid(), g.grid(), "weighted_poincare_ratio");
    if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("weighted_poincare_ratio: p must be >= 1");
    double sp = 0.0, s1 = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        sp += std::pow(std::abs(f.values()[k]), p);
        s1 += std::abs(g.values()[k] * f.values()[k]);
    }
    const double da = f.grid().cell_area();
    return detail::ratio(std::pow(sp * da, 1.0 / p), s1 * da + norm(f, NormKind::h1_seminorm));
}

/// ||sqrt(rho) u||_4^2 / ((1 + ||sqrt(rho) u||_2) ||grad u||_2 sqrt(log(2 + ||grad u||_2^2))).
inline std::optional<double> desjardins_ratio(const ScalarField& rho, const MacVelocity& w) {
    require_same_grid(rho.grid(), w.grid(), "desjardins_ratio");
    const Grid& g = w.grid();
    double s4 = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const auto c = cell_velocity(w, i, j);
            const double m = rho(i, j) * (c[0] * c[0] + c[1] * c[1]);
            s4 += m * m;
        }
    const double lhs = std::sqrt(s4 * g.cell_area());
    const double l2 = std::sqrt(kinetic_energy(rho, w));
    const double gn = norm(w, NormKind::h1_seminorm);
    return detail::ratio(lhs, (1.0 + l2) * gn * std::sqrt(std::log(2.0 + gn * gn)));
}

}  // namespace nhns
