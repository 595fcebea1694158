/// @file rational.hpp
/// @brief Exact rational scalars and radical comparisons.
///
/// Every geometric threshold in the library (separation > M, covering < 2M,
/// tile radii, pattern windows) is decided on squared quantities in exact
/// integer arithmetic.  Two layers are provided:
///
///  * Rat    -- a small normalized rational on 64-bit words, used for user
///              thresholds and hot-path predicates (products go through
///              __int128, so inputs up to ~1e9 are safe);
///  * BigRat -- an arbitrary-precision rational, used in the geometry kernel
///              (circumcenters, covering radii) where intermediate
///              determinants can exceed any fixed width.

#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace zcantor {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;

/// Small normalized rational.  Denominator is always positive.
struct Rat {
    long long num = 0;
    long long den = 1;

    Rat() = default;
    Rat(long long n) : num(n), den(1) {}
    Rat(long long n, long long d) : num(n), den(d) { normalize(); }

    void normalize() {
        if (den == 0) throw std::invalid_argument("Rat: zero denominator");
        if (den < 0) { num = -num; den = -den; }
        long long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
    }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline BigRat to_big(const Rat& r) { return BigRat(BigInt(r.num), BigInt(r.den)); }

/// num/den as a BigRat for arbitrary-sign den.  (The underlying rational type
/// accepts only positive denominators at construction; arithmetic is fine.)
inline BigRat make_brat(BigInt num, BigInt den) {
    if (den < 0) { num = -num; den = -den; }
    return BigRat(std::move(num), std::move(den));
}

/// Three-way comparison of small rationals, exact via 128-bit products.
inline int cmp(const Rat& a, const Rat& b) {
    __int128 lhs = static_cast<__int128>(a.num) * b.den;
    __int128 rhs = static_cast<__int128>(b.num) * a.den;
    return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

inline bool operator==(const Rat& a, const Rat& b) { return cmp(a, b) == 0; }
inline bool operator!=(const Rat& a, const Rat& b) { return cmp(a, b) != 0; }
inline bool operator<(const Rat& a, const Rat& b) { return cmp(a, b) < 0; }
inline bool operator<=(const Rat& a, const Rat& b) { return cmp(a, b) <= 0; }
inline bool operator>(const Rat& a, const Rat& b) { return cmp(a, b) > 0; }
inline bool operator>=(const Rat& a, const Rat& b) { return cmp(a, b) >= 0; }

inline Rat operator+(const Rat& a, const Rat& b) { return Rat(a.num * b.den + b.num * a.den, a.den * b.den); }
inline Rat operator-(const Rat& a, const Rat& b) { return Rat(a.num * b.den - b.num * a.den, a.den * b.den); }
inline Rat operator*(const Rat& a, const Rat& b) { return Rat(a.num * b.num, a.den * b.den); }
inline Rat operator/(const Rat& a, const Rat& b) {
    if (b.num == 0) throw std::invalid_argument("Rat: division by zero");
    return Rat(a.num * b.den, a.den * b.num);
}
inline Rat operator-(const Rat& a) { Rat r; r.num = -a.num; r.den = a.den; return r; }

inline Rat squared(const Rat& a) { return Rat(a.num * a.num, a.den * a.den); }

/// Parses "7", "5/2" or "2.5" into an exact rational.
inline Rat parse_rat(const std::string& s) {
    auto slash = s.find('/');
    if (slash != std::string::npos) {
        return Rat(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
    }
    auto dot = s.find('.');
    if (dot != std::string::npos) {
        std::string frac = s.substr(dot + 1);
        if (frac.empty()) return Rat(std::stoll(s.substr(0, dot)));
        long long den = 1;
        for (size_t i = 0; i < frac.size(); ++i) den *= 10;
        long long whole = dot == 0 ? 0 : std::stoll(s.substr(0, dot));
        long long sign = (!s.empty() && s[0] == '-') ? -1 : 1;
        if (whole < 0) whole = -whole;
        return Rat(sign * (whole * den + std::stoll(frac)), den);
    }
    return Rat(std::stoll(s));
}

/// Compares an exact squared distance (integer) with a rational threshold t:
/// returns cmp(sqrt(d2), t).  d2 >= 0 is required.
inline int cmp_sqrt(long long d2, const Rat& t) {
    if (t.num < 0) return 1;
    __int128 lhs = static_cast<__int128>(d2) * t.den * t.den;
    __int128 rhs = static_cast<__int128>(t.num) * t.num;
    return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

/// cmp(sqrt(a), t) for exact rationals a >= 0.
inline int cmp_sqrt(const BigRat& a, const BigRat& t) {
    if (t < BigRat(0)) return 1;
    BigRat lhs = a;
    BigRat rhs = t * t;
    return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

/// cmp(sqrt(a) + sqrt(b), t) for exact rationals a, b >= 0.
/// Used for certified bracket tests of the form covering + sqrt(d)/2 < 2M.
inline int cmp_sqrt_sum(const BigRat& a, const BigRat& b, const BigRat& t) {
    if (t < BigRat(0)) return 1;
    // (sqrt(a)+sqrt(b))^2 = a + b + 2 sqrt(ab);   compare with t^2.
    BigRat rest = t * t - a - b;
    if (rest < BigRat(0)) return 1;
    // compare 2 sqrt(ab) with rest:  4ab vs rest^2.
    BigRat lhs = BigRat(4) * a * b;
    BigRat rhs = rest * rest;
    return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

}  // namespace zcantor
