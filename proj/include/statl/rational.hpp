#pragma once

// Exact rational arithmetic used everywhere weights, probabilities and
// bounds appear.  Backed by boost::multiprecision::cpp_rational, which is
// always stored in canonical form (reduced, positive denominator).

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <stdexcept>
#include <string>

namespace statl {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Canonical "p/q" rendering; integers print without the "/1".
inline std::string rat_to_string(const Rational& r) {
    std::string num = numerator(r).str();
    if (denominator(r) == 1) return num;
    return num + "/" + denominator(r).str();
}

// "p/q" rendering that always includes the denominator.  The surface
// printer uses this for pairs whose first component would otherwise read
// as an injection tag.
inline std::string rat_to_fraction_string(const Rational& r) {
    return numerator(r).str() + "/" + denominator(r).str();
}

// Parses "p", "-p", "p/q" with q > 0.  Returns nullopt on malformed input.
inline std::optional<Rational> rat_from_string(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::size_t slash = s.find('/');
    auto is_int = [](const std::string& t, bool allow_sign) {
        if (t.empty()) return false;
        std::size_t i = 0;
        if (allow_sign && (t[0] == '-' || t[0] == '+')) i = 1;
        if (i == t.size()) return false;
        for (; i < t.size(); ++i)
            if (t[i] < '0' || t[i] > '9') return false;
        return true;
    };
    try {
        if (slash == std::string::npos) {
            if (!is_int(s, true)) return std::nullopt;
            return Rational(BigInt(s));
        }
        std::string num = s.substr(0, slash), den = s.substr(slash + 1);
        if (!is_int(num, true) || !is_int(den, false)) return std::nullopt;
        BigInt d(den);
        if (d == 0) return std::nullopt;
        return Rational(BigInt(num), d);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

// r^n with the 0^0 = 1 convention (geometric bounds use C * rho^0 = C).
inline Rational rat_pow(const Rational& r, unsigned long n) {
    Rational acc(1), base = r;
    while (n > 0) {
        if (n & 1) acc *= base;
        base *= base;
        n >>= 1;
    }
    return acc;
}

inline Rational rat_abs(const Rational& r) { return r < 0 ? Rational(-r) : r; }

// FNV-1a 64-bit over a string.  Used for stable program digests; pinned
// here because std::hash is not reproducible across platforms.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& s) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(s);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace statl
