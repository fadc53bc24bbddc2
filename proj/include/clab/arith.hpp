#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace clab {

using Int = std::int64_t;
using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

enum class Errc {
    NotMonic,
    ConstantTermNotUnit,
    CompositeEll,
    ModulusTooLarge,
    ActionNotAnnihilated,
    ActionNotWellDefined,
    ActionNotInvertible,
    NotDecorated,
    EnumerationTooLarge,
    Undetermined,
    NotCoprime,
    EllEven,
    ResidueFieldTooSmall,
    BudgetExceeded,
    GenerationStalled,
    PreconditionViolated,
    MismatchDetected,
    ConfigError,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::NotMonic: return "NotMonic";
        case Errc::ConstantTermNotUnit: return "ConstantTermNotUnit";
        case Errc::CompositeEll: return "CompositeEll";
        case Errc::ModulusTooLarge: return "ModulusTooLarge";
        case Errc::ActionNotAnnihilated: return "ActionNotAnnihilated";
        case Errc::ActionNotWellDefined: return "ActionNotWellDefined";
        case Errc::ActionNotInvertible: return "ActionNotInvertible";
        case Errc::NotDecorated: return "NotDecorated";
        case Errc::EnumerationTooLarge: return "EnumerationTooLarge";
        case Errc::Undetermined: return "Undetermined";
        case Errc::NotCoprime: return "NotCoprime";
        case Errc::EllEven: return "EllEven";
        case Errc::ResidueFieldTooSmall: return "ResidueFieldTooSmall";
        case Errc::BudgetExceeded: return "BudgetExceeded";
        case Errc::GenerationStalled: return "GenerationStalled";
        case Errc::PreconditionViolated: return "PreconditionViolated";
        case Errc::MismatchDetected: return "MismatchDetected";
        case Errc::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure in the library is reported through this exception type;
/// callers switch on code() rather than on the message text.
class Error : public std::runtime_error {
   public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    Errc code() const noexcept { return code_; }

   private:
    Errc code_;
};

inline Int mod(Int a, Int m) {
    Int r = a % m;
    return r < 0 ? r + m : r;
}

inline Int mulmod(Int a, Int b, Int m) {
    return static_cast<Int>((static_cast<__int128>(a) * b) % m);
}

inline Int powmod(Int base, std::uint64_t e, Int m) {
    Int r = 1 % m;
    base = mod(base, m);
    while (e) {
        if (e & 1) r = mulmod(r, base, m);
        base = mulmod(base, base, m);
        e >>= 1;
    }
    return r;
}

inline Int ipow(Int base, int e) {
    Int r = 1;
    for (int i = 0; i < e; ++i) {
        if (r > std::numeric_limits<Int>::max() / base)
            throw Error(Errc::ModulusTooLarge, "integer power overflows 64 bits");
        r *= base;
    }
    return r;
}

/// Extended Euclid; returns (g, x, y) with a*x + b*y = g.
inline std::tuple<Int, Int, Int> xgcd(Int a, Int b) {
    Int x0 = 1, y0 = 0, x1 = 0, y1 = 1;
    while (b != 0) {
        Int q = a / b;
        std::tie(a, b) = std::make_pair(b, a - q * b);
        std::tie(x0, x1) = std::make_pair(x1, x0 - q * x1);
        std::tie(y0, y1) = std::make_pair(y1, y0 - q * y1);
    }
    return {a, x0, y0};
}

/// Inverse of a unit modulo m. Throws if a is not a unit.
inline Int invmod(Int a, Int m) {
    auto [g, x, y] = xgcd(mod(a, m), m);
    (void)y;
    if (g != 1) throw std::domain_error("invmod: not a unit");
    return mod(x, m);
}

inline bool is_prime(Int n) {
    if (n < 2) return false;
    for (Int d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

/// ell-adic valuation of a residue x in [0, ell^level); returns level for x == 0.
inline int valuation(Int x, Int ell, int level) {
    if (x == 0) return level;
    int v = 0;
    while (x % ell == 0) {
        x /= ell;
        ++v;
    }
    return v < level ? v : level;
}

inline Rational rational_pow(const Rational& base, int e) {
    Rational r = 1;
    if (e >= 0) {
        for (int i = 0; i < e; ++i) r *= base;
    } else {
        for (int i = 0; i < -e; ++i) r /= base;
    }
    return r;
}

/// "p/q" in lowest terms, or just "p" when the denominator is 1.
inline std::string to_string(const Rational& r) {
    const BigInt den = boost::multiprecision::denominator(r);
    if (den == 1) return boost::multiprecision::numerator(r).str();
    return boost::multiprecision::numerator(r).str() + "/" + den.str();
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace clab
