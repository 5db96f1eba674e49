#pragma once

#include <cstdint>
#include <string>

namespace calign {

// Exact non-negative fraction. Never reduced; compared by cross
// multiplication in 128-bit so equal values with different
// representations (2/4 vs 1/2) compare equal.
struct Rational {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    constexpr Rational() = default;
    constexpr Rational(std::uint64_t n, std::uint64_t d) : num(n), den(d == 0 ? 1 : d) {}

    static constexpr Rational zero() { return Rational(0, 1); }
    static constexpr Rational one() { return Rational(1, 1); }

    // 0 denominator means an empty union; defined as 0/1.
    static constexpr Rational make(std::uint64_t n, std::uint64_t d) {
        return d == 0 ? Rational(0, 1) : Rational(n, d);
    }

    friend constexpr bool operator==(const Rational& a, const Rational& b) {
        return (unsigned __int128)a.num * b.den == (unsigned __int128)b.num * a.den;
    }
    friend constexpr bool operator<(const Rational& a, const Rational& b) {
        return (unsigned __int128)a.num * b.den < (unsigned __int128)b.num * a.den;
    }
    friend constexpr bool operator>(const Rational& a, const Rational& b) { return b < a; }
    friend constexpr bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
    friend constexpr bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }
    friend constexpr bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }

    double to_double() const { return den ? double(num) / double(den) : 0.0; }

    // Fixed-point decimal rendering, round half up.
    std::string to_decimal_string(int places = 12) const {
        unsigned __int128 n = num;
        std::uint64_t ipart = std::uint64_t(n / den);
        unsigned __int128 rem = n % den;
        std::string out = std::to_string(ipart);
        if (places <= 0) return out;
        out += '.';
        for (int i = 0; i < places; ++i) {
            rem *= 10;
            out += char('0' + int(rem / den));
            rem %= den;
        }
        if (rem * 2 >= den) {  // round last digit up, with carry
            int i = int(out.size()) - 1;
            while (i >= 0) {
                if (out[i] == '.') { --i; continue; }
                if (out[i] < '9') { ++out[i]; break; }
                out[i] = '0';
                --i;
            }
            if (i < 0) out.insert(out.begin(), '1');
        }
        return out;
    }

    std::string to_fraction_string() const {
        return std::to_string(num) + "/" + std::to_string(den);
    }
};

}  // namespace calign
