#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace fiberdiv {

/// Raised when an interval operation has no sound finite enclosure in strict mode
/// (division by an interval containing zero, sqrt of a strictly negative interval).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double down(double x, int ulps = 1) {
    if (std::isinf(x)) return x;
    for (int i = 0; i < ulps; ++i) x = std::nextafter(x, -kInf);
    return x;
}

inline double up(double x, int ulps = 1) {
    if (std::isinf(x)) return x;
    for (int i = 0; i < ulps; ++i) x = std::nextafter(x, kInf);
    return x;
}

// Endpoint product where 0 * inf is taken as 0 (the limit of x*y over the box).
inline double endpoint_mul(double a, double b) {
    if (a == 0.0 || b == 0.0) return 0.0;
    return a * b;
}

} // namespace detail

/// Closed real interval [lo, hi] with outward-rounded arithmetic.
///
/// Endpoints may be +/-inf but never NaN. The empty set is a separate state, not an
/// inverted pair. Every operation returns a superset of the exact image: each
/// computed endpoint is nudged one ulp outward (two for library transcendentals),
/// which stays sound regardless of the FPU rounding mode.
class Interval {
public:
    constexpr Interval() noexcept : lo_(0.0), hi_(0.0), empty_(false) {}
    constexpr explicit Interval(double v) : Interval(v, v) {}

    constexpr Interval(double lo, double hi) : lo_(lo), hi_(hi), empty_(false) {
        if (lo != lo || hi != hi) throw std::invalid_argument("Interval: NaN endpoint");
        if (lo > hi) throw std::invalid_argument("Interval: lo > hi");
    }

    static constexpr Interval empty() noexcept {
        Interval r;
        r.empty_ = true;
        return r;
    }
    static constexpr Interval entire() noexcept {
        Interval r;
        r.lo_ = -detail::kInf;
        r.hi_ = detail::kInf;
        return r;
    }

    constexpr double lo() const noexcept { return lo_; }
    constexpr double hi() const noexcept { return hi_; }
    constexpr bool is_empty() const noexcept { return empty_; }
    constexpr double width() const noexcept { return empty_ ? 0.0 : hi_ - lo_; }
    constexpr double mid() const noexcept { return 0.5 * lo_ + 0.5 * hi_; }

    constexpr bool contains(double v) const noexcept { return !empty_ && lo_ <= v && v <= hi_; }
    constexpr bool contains_zero() const noexcept { return contains(0.0); }

    /// True iff `other` is a subset of *this. The empty set is a subset of everything.
    constexpr bool encloses(const Interval& other) const noexcept {
        if (other.empty_) return true;
        if (empty_) return false;
        return lo_ <= other.lo_ && other.hi_ <= hi_;
    }

    friend constexpr bool operator==(const Interval& a, const Interval& b) noexcept {
        if (a.empty_ || b.empty_) return a.empty_ == b.empty_;
        return a.lo_ == b.lo_ && a.hi_ == b.hi_;
    }

    friend std::ostream& operator<<(std::ostream& os, const Interval& a) {
        if (a.empty_) return os << "[empty]";
        return os << '[' << a.lo_ << ", " << a.hi_ << ']';
    }

private:
    double lo_;
    double hi_;
    bool empty_;
};

/// Hull of two computed endpoints, each nudged `ulps` outward.
inline Interval outward(double lo, double hi, int ulps = 1) {
    return Interval(detail::down(lo, ulps), detail::up(hi, ulps));
}

inline bool contains(const Interval& a, double v) noexcept { return a.contains(v); }

inline Interval hull(const Interval& a, const Interval& b) {
    if (a.is_empty()) return b;
    if (b.is_empty()) return a;
    return Interval(std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

// ---------------------------------------------------------------------------
// Binary operations

inline Interval operator+(const Interval& a, const Interval& b) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    return outward(a.lo() + b.lo(), a.hi() + b.hi());
}

inline Interval operator-(const Interval& a) {
    if (a.is_empty()) return a;
    return Interval(-a.hi(), -a.lo());
}

inline Interval operator-(const Interval& a, const Interval& b) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    return outward(a.lo() - b.hi(), a.hi() - b.lo());
}

inline Interval operator*(const Interval& a, const Interval& b) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    const double p[4] = {
        detail::endpoint_mul(a.lo(), b.lo()),
        detail::endpoint_mul(a.lo(), b.hi()),
        detail::endpoint_mul(a.hi(), b.lo()),
        detail::endpoint_mul(a.hi(), b.hi()),
    };
    return outward(*std::min_element(p, p + 4), *std::max_element(p, p + 4));
}

enum class DivisionMode { strict, extended };

/// Interval quotient. In strict mode a divisor containing zero (even at an endpoint)
/// raises DomainError; extended mode answers the whole real line instead.
inline Interval divide(const Interval& a, const Interval& b, DivisionMode mode = DivisionMode::strict) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    if (b.contains_zero()) {
        if (mode == DivisionMode::strict) throw DomainError("interval division by an interval containing 0");
        return Interval::entire();
    }
    const double q[4] = {a.lo() / b.lo(), a.lo() / b.hi(), a.hi() / b.lo(), a.hi() / b.hi()};
    return outward(*std::min_element(q, q + 4), *std::max_element(q, q + 4));
}

inline Interval operator/(const Interval& a, const Interval& b) { return divide(a, b); }

inline Interval min(const Interval& a, const Interval& b) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    return Interval(std::min(a.lo(), b.lo()), std::min(a.hi(), b.hi()));
}

inline Interval max(const Interval& a, const Interval& b) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    return Interval(std::max(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

// ---------------------------------------------------------------------------
// Unary operations

inline Interval abs(const Interval& a) {
    if (a.is_empty()) return a;
    if (a.lo() >= 0.0) return a;
    if (a.hi() <= 0.0) return -a;
    return Interval(0.0, std::max(-a.lo(), a.hi()));
}

inline Interval sqr(const Interval& a) {
    if (a.is_empty()) return a;
    const Interval m = abs(a);
    return Interval(m.lo() == 0.0 ? 0.0 : detail::down(m.lo() * m.lo()), detail::up(m.hi() * m.hi()));
}

namespace detail {

// x^k for k >= 0 with a rigorous error budget: repeated squaring performs at most
// 2*log2(k) correctly rounded multiplies, so widening by that many ulps is sound.
inline int pow_ulps(unsigned k) {
    int steps = 0;
    while (k > 1) {
        steps += (k & 1u) ? 2 : 1;
        k >>= 1;
    }
    return steps + 1;
}

inline double pow_nonneg(double x, unsigned k) {
    double r = 1.0;
    double b = x;
    while (k) {
        if (k & 1u) r *= b;
        b *= b;
        k >>= 1;
    }
    return r;
}

} // namespace detail

/// Integer power. Even exponents respect the sign ambiguity (the result starts at 0
/// when 0 is inside the base); negative exponents divide strictly.
inline Interval pow_int(const Interval& a, int k) {
    if (a.is_empty()) return a;
    if (k == 0) return Interval(1.0);
    if (k == 1) return a;
    if (k < 0) return divide(Interval(1.0), pow_int(a, -k));
    if (k == 2) return sqr(a);

    const auto uk = static_cast<unsigned>(k);
    const int ulps = detail::pow_ulps(uk);
    auto lower = [&](double x) { return x == 0.0 ? 0.0 : detail::down(detail::pow_nonneg(x, uk), ulps); };
    auto upper = [&](double x) { return x == 0.0 ? 0.0 : detail::up(detail::pow_nonneg(x, uk), ulps); };

    if (uk % 2 == 0) {
        const Interval m = abs(a);
        return Interval(lower(m.lo()), upper(m.hi()));
    }
    // Odd power is monotone; x^k for negative x is -(|x|^k).
    const double lo = a.lo() >= 0.0 ? lower(a.lo()) : -upper(-a.lo());
    const double hi = a.hi() >= 0.0 ? upper(a.hi()) : -lower(-a.hi());
    return Interval(lo, hi);
}

inline Interval exp(const Interval& a) {
    if (a.is_empty()) return a;
    const double lo = std::max(0.0, detail::down(std::exp(a.lo()), 2));
    return Interval(lo, detail::up(std::exp(a.hi()), 2));
}

/// Square root. A strictly negative argument raises DomainError. When only the lower
/// endpoint is negative it is clamped to 0 and `clamped` (if given) is set.
inline Interval sqrt(const Interval& a, bool* clamped = nullptr) {
    if (a.is_empty()) return a;
    if (a.hi() < 0.0) throw DomainError("sqrt of a strictly negative interval");
    double lo = a.lo();
    if (lo < 0.0) {
        lo = 0.0;
        if (clamped) *clamped = true;
    }
    return Interval(std::max(0.0, detail::down(std::sqrt(lo))), detail::up(std::sqrt(a.hi())));
}

namespace detail {

// pi enclosed by the nearest double widened 2 ulps each way.
inline const Interval& pi_enclosure() {
    static const Interval pi(down(3.141592653589793, 2), up(3.141592653589793, 2));
    return pi;
}

// Beyond this magnitude argument reduction against the pi enclosure loses all
// resolution; the range is then the whole [-1, 1].
constexpr double kTrigReductionLimit = 1.0e12;

// Periodic extremum detection shared by sin and cos. Candidate critical points are
// m*pi/2 for integer m; `peak(m)` yields +1, -1, or 0 (not an extremum) for m mod 4.
template <class Fn, class Peak>
Interval trig(const Interval& a, Fn fn, Peak peak) {
    if (a.is_empty()) return a;
    if (!std::isfinite(a.lo()) || !std::isfinite(a.hi()) || a.width() >= 7.0 ||
        std::max(std::fabs(a.lo()), std::fabs(a.hi())) > kTrigReductionLimit) {
        return Interval(-1.0, 1.0);
    }
    const Interval half_pi = pi_enclosure() * Interval(0.5);
    const double f_lo = fn(a.lo());
    const double f_hi = fn(a.hi());
    double lo = down(std::min(f_lo, f_hi), 2);
    double hi = up(std::max(f_lo, f_hi), 2);

    const auto m_first = static_cast<std::int64_t>(std::floor(a.lo() / half_pi.hi())) - 2;
    const auto m_last = static_cast<std::int64_t>(std::ceil(a.hi() / half_pi.lo())) + 2;
    for (std::int64_t m = m_first; m <= m_last; ++m) {
        const int p = peak(static_cast<int>(((m % 4) + 4) % 4));
        if (p == 0) continue;
        // Enclosure of the critical point; if it touches a, assume it is inside.
        const Interval c = Interval(static_cast<double>(m)) * half_pi;
        if (c.hi() < a.lo() || c.lo() > a.hi()) continue;
        if (p > 0) hi = 1.0;
        else lo = -1.0;
    }
    return Interval(std::max(lo, -1.0), std::min(hi, 1.0));
}

} // namespace detail

inline Interval sin(const Interval& a) {
    return detail::trig(a, [](double x) { return std::sin(x); },
                        [](int r) { return r == 1 ? 1 : (r == 3 ? -1 : 0); });
}

inline Interval cos(const Interval& a) {
    return detail::trig(a, [](double x) { return std::cos(x); },
                        [](int r) { return r == 0 ? 1 : (r == 2 ? -1 : 0); });
}

// ---------------------------------------------------------------------------
// Operator enums used by the expression layer.

enum class BinaryOp { add, sub, mul, div, pow_int, min, max };
enum class UnaryOp { neg, sin, cos, exp, sqrt, abs, sqr };

/// pow_int takes its exponent from `b`, which must be a degenerate integral interval.
inline Interval interval_binary(BinaryOp op, const Interval& a, const Interval& b,
                                DivisionMode mode = DivisionMode::strict) {
    switch (op) {
    case BinaryOp::add: return a + b;
    case BinaryOp::sub: return a - b;
    case BinaryOp::mul: return a * b;
    case BinaryOp::div: return divide(a, b, mode);
    case BinaryOp::pow_int: {
        if (b.is_empty() || b.lo() != b.hi() || std::trunc(b.lo()) != b.lo() || std::fabs(b.lo()) > 1.0e6)
            throw std::invalid_argument("pow_int: exponent must be a small integer");
        return pow_int(a, static_cast<int>(b.lo()));
    }
    case BinaryOp::min: return min(a, b);
    case BinaryOp::max: return max(a, b);
    }
    throw std::logic_error("interval_binary: unknown op");
}

inline Interval interval_unary(UnaryOp op, const Interval& a, bool* clamped = nullptr) {
    switch (op) {
    case UnaryOp::neg: return -a;
    case UnaryOp::sin: return sin(a);
    case UnaryOp::cos: return cos(a);
    case UnaryOp::exp: return exp(a);
    case UnaryOp::sqrt: return sqrt(a, clamped);
    case UnaryOp::abs: return abs(a);
    case UnaryOp::sqr: return sqr(a);
    }
    throw std::logic_error("interval_unary: unknown op");
}

} // namespace fiberdiv
