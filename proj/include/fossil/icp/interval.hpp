// Interval arithmetic with outward rounding.
//
// Soundness contract: for every operation, the result interval contains the
// exact real image of the operand intervals.  Finite bounds are widened by a
// few ulps after each native double operation (1 ulp covers correctly-rounded
// arithmetic; transcendental results are widened by 4 ulps, a safety factor
// over glibc's documented ~1 ulp error bounds).

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace fossil::icp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double step_down(double v, int ulps = 1) {
    if (!std::isfinite(v)) return v;
    for (int i = 0; i < ulps; ++i) v = std::nextafter(v, -kInf);
    return v;
}

inline double step_up(double v, int ulps = 1) {
    if (!std::isfinite(v)) return v;
    for (int i = 0; i < ulps; ++i) v = std::nextafter(v, kInf);
    return v;
}

// Error-free-transformation based directed bounds: each primitive computes
// the rounding residual of the native double operation and nudges the result
// outward only when it is inexact.  Exact results (sums of same-exponent
// values, products with zero, multiplications by powers of two) keep their
// exact bounds, which zero-margin refutations rely on.
namespace detail {

inline double add_dir(double a, double b, bool up) {
    const double s = a + b;
    if (!std::isfinite(s)) return s;
    const double bv = s - a;
    const double av = s - bv;
    const double err = (a - av) + (b - bv);  // exact: a + b == s + err
    if (err == 0.0) return s;
    return up ? (err > 0 ? step_up(s) : s) : (err < 0 ? step_down(s) : s);
}

inline double mul_dir(double a, double b, bool up) {
    if (a == 0.0 || b == 0.0) return 0.0;
    const double p = a * b;
    if (!std::isfinite(p)) return p;
    const double err = std::fma(a, b, -p);  // exact: a * b == p + err
    if (err == 0.0) return p;
    return up ? (err > 0 ? step_up(p) : p) : (err < 0 ? step_down(p) : p);
}

inline double div_dir(double a, double b, bool up) {
    const double q = a / b;
    if (!std::isfinite(q) || std::isnan(q)) return q;
    const double rem = std::fma(q, b, -a);  // q*b - a, exact
    if (rem == 0.0) return q;
    // q too small when (rem < 0) == (b > 0).
    const bool q_below = (rem < 0) == (b > 0);
    return up ? (q_below ? step_up(q) : q) : (!q_below ? step_down(q) : q);
}

}  // namespace detail

struct Interval {
    double lo = -kInf;
    double hi = kInf;

    static Interval whole() { return {-kInf, kInf}; }
    static Interval empty() { return {1.0, -1.0}; }
    static Interval point(double v) { return {v, v}; }
    static Interval make(double lo, double hi) {
        if (std::isnan(lo) || std::isnan(hi)) return whole();
        return {lo, hi};
    }

    bool is_empty() const { return !(lo <= hi); }
    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains_zero() const { return lo <= 0.0 && 0.0 <= hi; }
    bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
    double width() const { return is_empty() ? 0.0 : hi - lo; }
    double mid() const {
        if (!std::isfinite(lo)) return std::isfinite(hi) ? hi - 1.0 : 0.0;
        if (!std::isfinite(hi)) return lo + 1.0;
        return 0.5 * (lo + hi);
    }

    Interval intersect(const Interval& o) const {
        return {std::max(lo, o.lo), std::min(hi, o.hi)};
    }

    Interval hull(const Interval& o) const {
        if (is_empty()) return o;
        if (o.is_empty()) return *this;
        return {std::min(lo, o.lo), std::max(hi, o.hi)};
    }
};

inline Interval widen(Interval v, int ulps = 1) {
    if (v.is_empty()) return v;
    return {step_down(v.lo, ulps), step_up(v.hi, ulps)};
}

inline Interval iadd(const Interval& a, const Interval& b) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    return Interval::make(detail::add_dir(a.lo, b.lo, false), detail::add_dir(a.hi, b.hi, true));
}

inline Interval isub(const Interval& a, const Interval& b) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    return Interval::make(detail::add_dir(a.lo, -b.hi, false), detail::add_dir(a.hi, -b.lo, true));
}

inline Interval ineg(const Interval& a) {
    if (a.is_empty()) return a;
    return {-a.hi, -a.lo};
}

inline Interval imul(const Interval& a, const Interval& b) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    const double lo = std::min({detail::mul_dir(a.lo, b.lo, false), detail::mul_dir(a.lo, b.hi, false),
                                detail::mul_dir(a.hi, b.lo, false), detail::mul_dir(a.hi, b.hi, false)});
    const double hi = std::max({detail::mul_dir(a.lo, b.lo, true), detail::mul_dir(a.lo, b.hi, true),
                                detail::mul_dir(a.hi, b.lo, true), detail::mul_dir(a.hi, b.hi, true)});
    return Interval::make(lo, hi);
}

// x * x evaluated as a square, avoiding the sign-loss of naive imul(x, x).
inline Interval isqr(const Interval& a) {
    if (a.is_empty()) return a;
    const double alo = std::fabs(a.lo), ahi = std::fabs(a.hi);
    const double big = std::max(alo, ahi);
    const double small = a.contains_zero() ? 0.0 : std::min(alo, ahi);
    return Interval::make(detail::mul_dir(small, small, false), detail::mul_dir(big, big, true));
}

// Hull of { x : x^2 in target }.
inline Interval isqr_inverse(const Interval& target) {
    if (target.is_empty() || target.hi < 0.0) return Interval::empty();
    const double r = std::isfinite(target.hi) ? step_up(std::sqrt(target.hi), 2) : kInf;
    return {-r, r};
}

inline Interval idiv(const Interval& a, const Interval& b) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    if (b.contains_zero()) {
        if (b.lo == 0.0 && b.hi == 0.0) return Interval::empty();  // division by exactly zero
        return Interval::whole();
    }
    const double lo = std::min({detail::div_dir(a.lo, b.lo, false), detail::div_dir(a.lo, b.hi, false),
                                detail::div_dir(a.hi, b.lo, false), detail::div_dir(a.hi, b.hi, false)});
    const double hi = std::max({detail::div_dir(a.lo, b.lo, true), detail::div_dir(a.lo, b.hi, true),
                                detail::div_dir(a.hi, b.lo, true), detail::div_dir(a.hi, b.hi, true)});
    return Interval::make(lo, hi);
}

namespace detail {
// Transcendental endpoint with 4-ulp widening, except at anchor arguments
// whose IEEE results are exact (sin/tanh at 0, exp at 0, log at 1).
inline double tr_down(double v, bool exact) { return exact ? v : step_down(v, 4); }
inline double tr_up(double v, bool exact) { return exact ? v : step_up(v, 4); }
}  // namespace detail

inline Interval iexp(const Interval& a) {
    if (a.is_empty()) return a;
    return {std::max(0.0, detail::tr_down(std::exp(a.lo), a.lo == 0.0)),
            detail::tr_up(std::exp(a.hi), a.hi == 0.0)};
}

// Natural logarithm; defined on (0, inf).  Arguments at or below zero shrink
// the domain rather than poisoning the result.
inline Interval ilog(const Interval& a) {
    if (a.is_empty() || a.hi <= 0.0) return Interval::empty();
    const double lo = a.lo <= 0.0 ? -kInf : detail::tr_down(std::log(a.lo), a.lo == 1.0);
    return {lo, detail::tr_up(std::log(a.hi), a.hi == 1.0)};
}

inline Interval itanh(const Interval& a) {
    if (a.is_empty()) return a;
    return {std::max(-1.0, detail::tr_down(std::tanh(a.lo), a.lo == 0.0)),
            std::min(1.0, detail::tr_up(std::tanh(a.hi), a.hi == 0.0))};
}

namespace detail {

inline constexpr double kPiLo = 3.141592653589793;     // closest double below pi
inline constexpr double kHalfPi = 1.5707963267948966;  // ~pi/2
inline constexpr double kTwoPi = 6.283185307179586;    // ~2*pi

// Does [lo, hi] contain a point c + k * 2*pi for some integer k?  Tested with
// an outward-widened comparison, so uncertainty only over-approximates.
inline bool contains_shifted_grid(double lo, double hi, double c) {
    if (hi - lo >= kTwoPi) return true;
    const double mid = 0.5 * (lo + hi);
    const double k0 = std::round((mid - c) / kTwoPi);
    for (int dk = -2; dk <= 2; ++dk) {
        const double candidate = c + (k0 + dk) * kTwoPi;
        const double slack = 1e-9 * (std::fabs(candidate) + 1.0) + 1e-12;
        if (candidate >= lo - slack && candidate <= hi + slack) return true;
    }
    return false;
}

}  // namespace detail

inline Interval isin(const Interval& a) {
    if (a.is_empty()) return a;
    if (!a.bounded() || a.width() >= detail::kTwoPi || std::fabs(a.lo) > 1e15 || std::fabs(a.hi) > 1e15)
        return {-1.0, 1.0};
    const bool exact_lo = a.lo == 0.0, exact_hi = a.hi == 0.0;
    const double slo = std::sin(a.lo), shi = std::sin(a.hi);
    double lo = std::min(detail::tr_down(slo, exact_lo), detail::tr_down(shi, exact_hi));
    double hi = std::max(detail::tr_up(slo, exact_lo), detail::tr_up(shi, exact_hi));
    if (detail::contains_shifted_grid(a.lo, a.hi, detail::kHalfPi)) hi = 1.0;
    if (detail::contains_shifted_grid(a.lo, a.hi, -detail::kHalfPi)) lo = -1.0;
    return {std::max(-1.0, lo), std::min(1.0, hi)};
}

inline Interval icos(const Interval& a) {
    if (a.is_empty()) return a;
    if (!a.bounded() || a.width() >= detail::kTwoPi || std::fabs(a.lo) > 1e15 || std::fabs(a.hi) > 1e15)
        return {-1.0, 1.0};
    const bool exact_lo = a.lo == 0.0, exact_hi = a.hi == 0.0;
    const double clo = std::cos(a.lo), chi = std::cos(a.hi);
    double lo = std::min(detail::tr_down(clo, exact_lo), detail::tr_down(chi, exact_hi));
    double hi = std::max(detail::tr_up(clo, exact_lo), detail::tr_up(chi, exact_hi));
    if (detail::contains_shifted_grid(a.lo, a.hi, 0.0)) hi = 1.0;
    if (detail::contains_shifted_grid(a.lo, a.hi, detail::kPiLo)) lo = -1.0;
    return {std::max(-1.0, lo), std::min(1.0, hi)};
}

// ---------------------------------------------------------------------------
// Inverse projections (for backward contraction).  Each returns an interval
// guaranteed to contain { x : f(x) in target }, possibly Interval::whole()
// when no useful contraction exists.

inline Interval iexp_inverse(const Interval& target) {  // x with exp(x) in target
    return ilog(target);
}

inline Interval ilog_inverse(const Interval& target) {  // x with log(x) in target
    return iexp(target);
}

inline Interval itanh_inverse(const Interval& target) {
    Interval t = target.intersect({-1.0, 1.0});
    if (t.is_empty()) return Interval::empty();
    const double lo = t.lo <= -1.0 ? -kInf : step_down(std::atanh(t.lo), 4);
    const double hi = t.hi >= 1.0 ? kInf : step_up(std::atanh(t.hi), 4);
    return {lo, hi};
}

// Contract x given sin(x) in target; only attempted when x spans a single
// monotone branch of sin.
inline Interval isin_inverse(const Interval& x, const Interval& target) {
    if (x.is_empty() || !x.bounded() || x.width() >= detail::kPiLo) return x;
    Interval t = target.intersect({-1.0, 1.0});
    if (t.is_empty()) return Interval::empty();
    const double k = std::round(x.mid() / detail::kPiLo);
    const double center = k * detail::kPiLo;
    const double slack = 1e-9 * (std::fabs(center) + 1.0);
    if (x.lo < center - detail::kHalfPi - slack || x.hi > center + detail::kHalfPi + slack)
        return x;  // spans a fold point; skip
    // On branch k: sin(x) = s * sin(x - k*pi) with s = +1 for even k.
    const bool even = std::fmod(k, 2.0) == 0.0;
    Interval reduced = even ? t : ineg(t);
    const double alo = std::asin(std::max(-1.0, reduced.lo));
    const double ahi = std::asin(std::min(1.0, reduced.hi));
    Interval branch{step_down(center + alo, 8), step_up(center + ahi, 8)};
    // Guard the branch-reduction rounding with an absolute margin.
    branch.lo -= slack;
    branch.hi += slack;
    return x.intersect(branch);
}

inline Interval icos_inverse(const Interval& x, const Interval& target) {
    if (x.is_empty() || !x.bounded() || x.width() >= detail::kPiLo) return x;
    Interval t = target.intersect({-1.0, 1.0});
    if (t.is_empty()) return Interval::empty();
    // cos is monotone on [k*pi, (k+1)*pi].
    const double k = std::floor(x.mid() / detail::kPiLo);
    const double left = k * detail::kPiLo;
    const double slack = 1e-9 * (std::fabs(left) + 1.0);
    if (x.lo < left - slack || x.hi > left + detail::kPiLo + slack) return x;
    const bool decreasing = std::fmod(k, 2.0) == 0.0;
    const double a1 = std::acos(std::min(1.0, std::max(-1.0, t.lo)));
    const double a2 = std::acos(std::min(1.0, std::max(-1.0, t.hi)));
    Interval branch;
    if (decreasing) {
        branch = {step_down(left + a2, 8), step_up(left + a1, 8)};
    } else {
        branch = {step_down(left + detail::kPiLo - a1, 8), step_up(left + detail::kPiLo - a2, 8)};
    }
    branch.lo -= slack;
    branch.hi += slack;
    return x.intersect(branch);
}

// Extended division used by multiplication projections: hull of
// { x : exists y in b with x * y in a }.
inline Interval iext_div(const Interval& a, const Interval& b) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    if (b.contains_zero()) {
        if (b.lo == 0.0 && b.hi == 0.0) return a.contains_zero() ? Interval::whole() : Interval::empty();
        return Interval::whole();
    }
    return idiv(a, b);
}

}  // namespace fossil::icp
