#pragma once

/// Bound calculators for the linear Gronwall inequality and the Bihari-LaSalle inequality
///
///   y(t) <= c1 + c2 integral_0^t h(s) w(y(s)) ds   =>   y(t) <= G^{-1}(G(c1) + c2 integral_0^t h),
///
/// with G(x) = integral_{x0}^x dy / w(y).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nhns/error.hpp"

namespace nhns {

enum class Interpolation { piecewise_constant, linear };

class SampledFunction {
public:
    SampledFunction() = default;
    SampledFunction(std::vector<double> knots, std::vector<double> values,
                    Interpolation interp = Interpolation::linear)
        : t_(std::move(knots)), v_(std::move(values)), interp_(interp) {
        if (t_.empty() || t_.size() != v_.size())
            throw PreconditionError("SampledFunction: knots and values must be non-empty and of equal length");
        for (std::size_t k = 0; k < t_.size(); ++k) {
            if (!std::isfinite(t_[k]) || !std::isfinite(v_[k]))
                throw PreconditionError("SampledFunction: non-finite knot or value at index " + std::to_string(k));
            if (k > 0 && !(t_[k] > t_[k - 1]))
                throw PreconditionError("SampledFunction: knots must be strictly increasing (index " +
                                        std::to_string(k) + ")");
        }
    }

    template <class F>
    static SampledFunction sample(const std::vector<double>& knots, F&& f, Interpolation interp = Interpolation::linear) {
        std::vector<double> v;
        v.reserve(knots.size());
        for (double t : knots) v.push_back(f(t));
        return SampledFunction(knots, std::move(v), interp);
    }

    const std::vector<double>& knots() const { return t_; }
    const std::vector<double>& values() const { return v_; }
    Interpolation interpolation() const { return interp_; }
    std::size_t size() const { return t_.size(); }

    /// Value at t; constant extension outside the knot range.
    double operator()(double t) const {
        if (t <= t_.front()) return v_.front();
        if (t >= t_.back()) return v_.back();
        const auto it = std::upper_bound(t_.begin(), t_.end(), t);
        const std::size_t k = static_cast<std::size_t>(it - t_.begin()) - 1;
        if (interp_ == Interpolation::piecewise_constant) return v_[k];
        const double a = (t - t_[k]) / (t_[k + 1] - t_[k]);
        return (1.0 - a) * v_[k] + a * v_[k + 1];
    }

    /// Trapezoid integral from the first knot to each knot.
    std::vector<double> cumulative_integral() const {
        std::vector<double> out(t_.size(), 0.0);
        for (std::size_t k = 1; k < t_.size(); ++k) {
            const double dt = t_[k] - t_[k - 1];
            const double piece = interp_ == Interpolation::linear ? 0.5 * (v_[k] + v_[k - 1]) * dt : v_[k - 1] * dt;
            out[k] = out[k - 1] + piece;
        }
        return out;
    }

private:
    std::vector<double> t_, v_;
    Interpolation interp_ = Interpolation::linear;
};

namespace detail {

inline void require_nonnegative(const SampledFunction& f, const char* what) {
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f.values()[k] < 0.0) {
            std::ostringstream os;
            os << what << " must be >= 0; value " << f.values()[k] << " at t = " << f.knots()[k];
            throw PreconditionError(os.str());
        }
}

/// c resampled on the knots of `on`.
inline SampledFunction resample(const SampledFunction& c, const SampledFunction& on) {
    if (c.knots() == on.knots()) return c;
    return SampledFunction::sample(on.knots(), [&](double t) { return c(t); }, c.interpolation());
}

}  // namespace detail

/// f2(t) exp(integral_0^t c) on the knots of f2 (c is resampled there when its knots differ).
inline SampledFunction gronwall_envelope(const SampledFunction& f2, const SampledFunction& c) {
    for (std::size_t k = 1; k < f2.size(); ++k)
        if (f2.values()[k] < f2.values()[k - 1]) {
            std::ostringstream os;
            os << "gronwall_envelope: f2 must be non-decreasing; first violation at t = " << f2.knots()[k] << " ("
               << f2.values()[k - 1] << " -> " << f2.values()[k] << ")";
            throw PreconditionError(os.str());
        }
    detail::require_nonnegative(c, "gronwall_envelope: c");
    const std::vector<double> ic = detail::resample(c, f2).cumulative_integral();
    std::vector<double> out(f2.size());
    for (std::size_t k = 0; k < f2.size(); ++k) out[k] = f2.values()[k] * std::exp(ic[k]);
    return SampledFunction(f2.knots(), std::move(out), f2.interpolation());
}

enum class Nonlinearity { linear, log_growth };

using GrowthFunction = std::function<double(double)>;

inline GrowthFunction growth_function(Nonlinearity w) {
    if (w == Nonlinearity::linear) return [](double y) { return y; };
    return [](double y) { return y * std::log(2.0 + y); };
}

/// G(x) = integral_{x0}^x dy / w(y) for positive, continuous, non-decreasing w. The integral is
/// taken in s = ln y by adaptive Simpson quadrature.
class BihariPrimitive {
public:
    BihariPrimitive(GrowthFunction w, double x0) : w_(std::move(w)), x0_(x0) {
        if (!(x0 > 0.0) || !std::isfinite(x0)) throw DomainError("Bihari primitive: x0 must be positive");
    }

    double x0() const { return x0_; }

    double operator()(double x) const {
        if (!(x > 0.0)) throw DomainError("Bihari primitive: argument must be positive");
        return integrate_log(std::log(x0_), std::log(x));
    }

    /// Solves G(x) = target by bisection in ln x. Empty when target exceeds G on the
    /// representable range.
    std::optional<double> inverse(double target) const {
        double lo = std::log(x0_), hi = lo;
        double glo = 0.0;
        // Bracket with doubling steps in s = ln x.
        double step = 1.0;
        if (target >= 0.0) {
            const double s_max = std::log(std::numeric_limits<double>::max()) - 1.0;
            double ghi = 0.0;
            while (ghi < target) {
                lo = hi;
                glo = ghi;
                if (hi >= s_max) return std::nullopt;
                const double next = std::min(hi + step, s_max);
                ghi = glo + integrate_log(hi, next);
                hi = next;
                step *= 2.0;
            }
        } else {
            const double s_min = std::log(std::numeric_limits<double>::min()) + 1.0;
            double g = 0.0;
            while (g > target) {
                hi = lo;
                if (lo <= s_min) return std::nullopt;
                const double next = std::max(lo - step, s_min);
                g -= integrate_log(next, lo);
                lo = next;
                step *= 2.0;
            }
            glo = g;
        }
        // G(e^lo) = glo <= target <= G(e^hi)
        while (hi - lo > 1e-13 * std::max(1.0, std::abs(lo))) {
            const double mid = 0.5 * (lo + hi);
            const double gm = glo + integrate_log(lo, mid);
            if (gm < target) {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        return std::exp(0.5 * (lo + hi));
    }

private:
    double integrand(double s) const {
        const double y = std::exp(s);
        const double wy = w_(y);
        if (std::isinf(wy) && wy > 0.0) return 0.0;  // w overflowed; 1/w underflows
        if (!(wy > 0.0) || std::isnan(wy)) {
            std::ostringstream os;
            os << "Bihari primitive: w(" << y << ") = " << wy << " is not positive";
            throw DomainError(os.str());
        }
        return y / wy;
    }

    double integrate_log(double a, double b) const {
        if (a == b) return 0.0;
        const double fa = integrand(a), fb = integrand(b), fm = integrand(0.5 * (a + b));
        const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        return simpson(a, b, fa, fm, fb, whole, 1e-14 * std::max(1.0, std::abs(whole)), 50);
    }

    double simpson(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) const {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        const double flm = integrand(lm), frm = integrand(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double diff = left + right - whole;
        if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
        return simpson(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
               simpson(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }

    GrowthFunction w_;
    double x0_;
};

/// G^{-1}(G(c1) + c2 integral_0^t h) on the knots of h. x0 defaults to min(c1, 1) / 2.
inline SampledFunction bihari_bound(double c1, double c2, const SampledFunction& h, GrowthFunction w,
                                    std::optional<double> x0 = std::nullopt) {
    if (!(c1 > 0.0) || !std::isfinite(c1)) throw DomainError("bihari_bound: c1 must be positive");
    if (!(c2 > 0.0) || !std::isfinite(c2)) throw DomainError("bihari_bound: c2 must be positive");
    detail::require_nonnegative(h, "bihari_bound: h");
    const BihariPrimitive G(std::move(w), x0.value_or(0.5 * std::min(c1, 1.0)));
    const double g1 = G(c1);
    const std::vector<double> ih = h.cumulative_integral();
    std::vector<double> out(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) {
        if (ih[k] == 0.0) {
            out[k] = c1;
            continue;
        }
        const auto y = G.inverse(g1 + c2 * ih[k]);
        if (!y) {
            std::ostringstream os;
            os << "bihari_bound: bound escapes to infinity at t=" << h.knots()[k];
            throw RangeError(os.str());
        }
        out[k] = *y;
    }
    return SampledFunction(h.knots(), std::move(out), h.interpolation());
}

inline SampledFunction bihari_bound(double c1, double c2, const SampledFunction& h, Nonlinearity w,
                                    std::optional<double> x0 = std::nullopt) {
    return bihari_bound(c1, c2, h, growth_function(w), x0);
}

}  // namespace nhns
