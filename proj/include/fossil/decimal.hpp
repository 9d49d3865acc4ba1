// Decimal formatting of doubles for two distinct purposes:
//
//  * exact_decimal: the exact (finite) decimal expansion of a binary64 value,
//    used when emitting SMT-LIB scripts.  A solver that parses the literal
//    reconstructs the identical real number the training loop computed with,
//    so numeric and symbolic interpretations agree bit for bit.
//
//  * shortest_decimal: the shortest string that round-trips, used for
//    human-facing infix output.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fossil {

namespace detail {

// Arbitrary-precision decimal digit string for m * 2^e with m, e integers.
// Works digit-vector at a time; fine for the 53-bit mantissas we feed it.
inline std::string pow2_scaled_digits(std::uint64_t mantissa, int exponent) {
    // Integer part digits (little-endian decimal) of mantissa * 2^max(e,0).
    std::vector<std::uint32_t> intdig;
    for (std::uint64_t m = mantissa; m != 0; m /= 10) intdig.push_back(static_cast<std::uint32_t>(m % 10));
    if (intdig.empty()) intdig.push_back(0);

    auto double_digits = [&]() {
        std::uint32_t carry = 0;
        for (auto& d : intdig) {
            std::uint32_t v = d * 2 + carry;
            d = v % 10;
            carry = v / 10;
        }
        if (carry) intdig.push_back(carry);
    };
    auto halve_digits = [&](std::vector<std::uint32_t>& frac) {
        // Divide the integer part by 2; the remainder flows into the fraction.
        std::uint32_t rem = 0;
        for (std::size_t i = intdig.size(); i-- > 0;) {
            std::uint32_t v = rem * 10 + intdig[i];
            intdig[i] = v / 2;
            rem = v % 2;
        }
        while (intdig.size() > 1 && intdig.back() == 0) intdig.pop_back();
        // Propagate remainder * 0.5 into the fraction digits (big-endian).
        std::uint32_t carry = rem * 5;
        for (auto& d : frac) {
            std::uint32_t v = d;
            d = (v / 2) + carry;
            carry = (v % 2) * 5;
        }
        if (carry) frac.push_back(carry);
    };

    std::vector<std::uint32_t> frac;  // big-endian fraction digits
    if (exponent >= 0) {
        for (int i = 0; i < exponent; ++i) double_digits();
    } else {
        for (int i = 0; i < -exponent; ++i) halve_digits(frac);
    }

    std::string out;
    for (std::size_t i = intdig.size(); i-- > 0;) out.push_back(static_cast<char>('0' + intdig[i]));
    if (!frac.empty()) {
        out.push_back('.');
        for (auto d : frac) out.push_back(static_cast<char>('0' + d));
        while (out.back() == '0') out.pop_back();
        if (out.back() == '.') out.pop_back();
    }
    return out;
}

}  // namespace detail

// Exact decimal expansion of a finite double, without sign.  "0.1" prints as
// 0.1000000000000000055511151231257827021181583404541015625.
inline std::string exact_decimal_magnitude(double v) {
    if (std::isnan(v) || std::isinf(v)) throw std::invalid_argument("exact_decimal: non-finite value");
    v = std::fabs(v);
    if (v == 0.0) return "0.0";
    int exp2 = 0;
    const double frac = std::frexp(v, &exp2);             // v = frac * 2^exp2, frac in [0.5, 1)
    const auto mant = static_cast<std::uint64_t>(std::ldexp(frac, 53));  // 53-bit integer
    std::string s = detail::pow2_scaled_digits(mant, exp2 - 53);
    if (s.find('.') == std::string::npos) s += ".0";      // SMT-LIB decimals need a point
    return s;
}

inline std::string exact_decimal(double v) {
    if (std::signbit(v) && v != 0.0) return "-" + exact_decimal_magnitude(v);
    return exact_decimal_magnitude(v);
}

// Shortest round-trip representation ("0.5", "0.73575", "1e-09" becomes
// "1e-09" -> normalized here to plain or scientific as to_chars decides).
inline std::string shortest_decimal(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace fossil
