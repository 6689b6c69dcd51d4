#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskconv {

/// Exact scalar for the rational evaluation mode.  Arbitrary precision so
/// that refinement ladders (2^14 atoms) and lcm-of-block-sizes constructions
/// never overflow an intermediate product.
using Rational = boost::multiprecision::cpp_rational;

using BigInt = boost::multiprecision::cpp_int;

/// Uniform interface over the two scalar modes.  Algorithms that must be
/// exact in rational mode are templated on S and consult these traits only
/// for conversions and comparison slack.
template <class S> struct scalar_traits;

template <> struct scalar_traits<double> {
    static constexpr bool exact = false;
    static double abs(double v) { return std::fabs(v); }
    static double to_double(double v) { return v; }
    static double from_double(double v) { return v; }
    static double infinity() { return std::numeric_limits<double>::infinity(); }
    static double ratio(long num, long den) {
        return static_cast<double>(num) / static_cast<double>(den);
    }
};

template <> struct scalar_traits<Rational> {
    static constexpr bool exact = true;
    static Rational abs(const Rational& v) { return v < 0 ? Rational(-v) : v; }
    static double to_double(const Rational& v) { return v.template convert_to<double>(); }
    /// exact: doubles are dyadic rationals
    static Rational from_double(double v) { return Rational(v); }
    static Rational infinity() {
        throw std::domain_error("rational scalars cannot represent infinity");
    }
    static Rational ratio(long num, long den) { return Rational(num, den); }
};

template <class S> double to_double(const S& v) { return scalar_traits<S>::to_double(v); }

/**
 * Parses a decimal or fraction literal into an exact rational.
 *
 * Accepted forms: "3", "-4.25", "1e-3", "2.5e2", "7/4".  This is the exact
 * counterpart of strtod: "0.1" becomes 1/10, not the nearest double.
 */
inline Rational parse_rational(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("parse_rational: empty string");
    const auto slash = text.find('/');
    if (slash != std::string::npos) {
        const Rational num(BigInt(text.substr(0, slash)));
        const BigInt den(text.substr(slash + 1));
        if (den == 0) throw std::invalid_argument("parse_rational: zero denominator");
        return num / Rational(den);
    }
    std::size_t pos = 0;
    bool negative = false;
    if (text[pos] == '+' || text[pos] == '-') negative = text[pos++] == '-';
    std::string digits;
    long frac_digits = 0;
    bool seen_digit = false, seen_dot = false;
    for (; pos < text.size() && (std::isdigit(static_cast<unsigned char>(text[pos])) ||
                                 text[pos] == '.');
         ++pos) {
        if (text[pos] == '.') {
            if (seen_dot) throw std::invalid_argument("parse_rational: bad literal " + text);
            seen_dot = true;
        } else {
            digits.push_back(text[pos]);
            seen_digit = true;
            if (seen_dot) ++frac_digits;
        }
    }
    if (!seen_digit) throw std::invalid_argument("parse_rational: bad literal " + text);
    long exponent = 0;
    if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
        exponent = std::stol(text.substr(pos + 1));
        pos = text.size();
    }
    if (pos != text.size()) throw std::invalid_argument("parse_rational: bad literal " + text);
    Rational value{BigInt(digits)};
    long ten_power = exponent - frac_digits;
    BigInt scale = 1;
    for (long i = 0; i < (ten_power < 0 ? -ten_power : ten_power); ++i) scale *= 10;
    if (ten_power >= 0)
        value *= Rational(scale);
    else
        value /= Rational(scale);
    return negative ? Rational(-value) : value;
}

inline std::string rational_to_string(const Rational& v) { return v.str(); }

/// lcm with a cap; returns 0 when the running lcm would exceed the cap.
inline unsigned long long capped_lcm(const std::vector<std::size_t>& sizes,
                                     unsigned long long cap) {
    unsigned long long acc = 1;
    for (std::size_t s : sizes) {
        if (s == 0) throw std::invalid_argument("capped_lcm: zero block size");
        const unsigned long long g = std::gcd(acc, static_cast<unsigned long long>(s));
        const unsigned long long quotient = acc / g;
        if (quotient > cap / s) return 0;
        acc = quotient * s;
        if (acc > cap) return 0;
    }
    return acc;
}

} // namespace riskconv
