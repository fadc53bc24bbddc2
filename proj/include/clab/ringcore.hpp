#pragma once
// Exact arithmetic in Z/ell^N and in quotient rings (Z/ell^N)[x]/(P).

#include "clab/arith.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace clab {

/// Largest modulus we allow; keeps every product of two residues inside 63 bits.
inline constexpr Int kMaxModulus = Int{1} << 31;

struct PrimePower {
    Int ell = 2;
    int level = 1;

    PrimePower() = default;
    PrimePower(Int ell_, int level_) : ell(ell_), level(level_) {
        if (!is_prime(ell)) throw Error(Errc::CompositeEll, "ell = " + std::to_string(ell) + " is not prime");
        if (level < 1) throw Error(Errc::PreconditionViolated, "level must be >= 1");
        Int m = 1;
        for (int i = 0; i < level; ++i) {
            m *= ell;
            if (m >= kMaxModulus)
                throw Error(Errc::ModulusTooLarge, std::to_string(ell) + "^" + std::to_string(level) + " exceeds 2^31");
        }
        modulus_ = m;
    }

    Int modulus() const { return modulus_; }
    Int power(int k) const {
        Int r = 1;
        for (int i = 0; i < k; ++i) r *= ell;
        return r;
    }
    PrimePower with_level(int k) const { return PrimePower(ell, k); }
    friend bool operator==(const PrimePower& a, const PrimePower& b) { return a.ell == b.ell && a.level == b.level; }

   private:
    Int modulus_ = 2;
};

// ---------------------------------------------------------------------------
// Polynomials with coefficients in Z/m, ascending degree.

struct Poly {
    std::vector<Int> coeffs;  // ascending degree, trimmed (no trailing zeros)
    Int modulus = 2;

    Poly() = default;
    Poly(std::vector<Int> c, Int m) : coeffs(std::move(c)), modulus(m) { normalize(); }

    static Poly constant(Int c, Int m) { return Poly({c}, m); }
    static Poly x_power(int k, Int m) {
        std::vector<Int> c(k + 1, 0);
        c[k] = 1;
        return Poly(std::move(c), m);
    }

    int degree() const { return coeffs.empty() ? -1 : static_cast<int>(coeffs.size()) - 1; }
    bool is_zero() const { return coeffs.empty(); }
    bool monic() const { return !coeffs.empty() && coeffs.back() == 1; }
    Int lead() const { return coeffs.empty() ? 0 : coeffs.back(); }
    Int operator[](std::size_t i) const { return i < coeffs.size() ? coeffs[i] : 0; }

    void normalize() {
        for (auto& c : coeffs) c = mod(c, modulus);
        while (!coeffs.empty() && coeffs.back() == 0) coeffs.pop_back();
    }

    Poly reduced(Int m) const { return Poly(coeffs, m); }

    Int eval(Int x) const {
        Int r = 0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) r = mod(mulmod(r, x, modulus) + *it, modulus);
        return r;
    }

    friend bool operator==(const Poly& a, const Poly& b) { return a.modulus == b.modulus && a.coeffs == b.coeffs; }
};

inline Poly operator+(const Poly& a, const Poly& b) {
    std::vector<Int> c(std::max(a.coeffs.size(), b.coeffs.size()), 0);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a[i] + b[i];
    return Poly(std::move(c), a.modulus);
}

inline Poly operator-(const Poly& a, const Poly& b) {
    std::vector<Int> c(std::max(a.coeffs.size(), b.coeffs.size()), 0);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a[i] - b[i];
    return Poly(std::move(c), a.modulus);
}

inline Poly operator*(const Poly& a, const Poly& b) {
    if (a.is_zero() || b.is_zero()) return Poly({}, a.modulus);
    std::vector<Int> c(a.coeffs.size() + b.coeffs.size() - 1, 0);
    for (std::size_t i = 0; i < a.coeffs.size(); ++i)
        for (std::size_t j = 0; j < b.coeffs.size(); ++j)
            c[i + j] = mod(c[i + j] + mulmod(a.coeffs[i], b.coeffs[j], a.modulus), a.modulus);
    return Poly(std::move(c), a.modulus);
}

inline Poly scale(const Poly& a, Int s) {
    std::vector<Int> c(a.coeffs);
    for (auto& x : c) x = mulmod(x, mod(s, a.modulus), a.modulus);
    return Poly(std::move(c), a.modulus);
}

/// Division by a polynomial whose leading coefficient is a unit mod the modulus.
inline std::pair<Poly, Poly> divmod(const Poly& a, const Poly& b) {
    if (b.is_zero()) throw std::domain_error("polynomial division by zero");
    const Int m = a.modulus;
    Int inv_lead = invmod(b.lead(), m);
    std::vector<Int> r(a.coeffs);
    int db = b.degree();
    if (a.degree() < db) return {Poly({}, m), a};
    std::vector<Int> q(a.degree() - db + 1, 0);
    for (int i = a.degree(); i >= db; --i) {
        Int c = mulmod(mod(r[i], m), inv_lead, m);
        q[i - db] = c;
        if (c == 0) continue;
        for (int j = 0; j <= db; ++j) r[i - db + j] = mod(r[i - db + j] - mulmod(c, b.coeffs[j], m), m);
    }
    return {Poly(std::move(q), m), Poly(std::move(r), m)};
}

inline Poly operator%(const Poly& a, const Poly& b) { return divmod(a, b).second; }

inline Poly derivative(const Poly& a) {
    if (a.degree() < 1) return Poly({}, a.modulus);
    std::vector<Int> c(a.coeffs.size() - 1);
    for (std::size_t i = 1; i < a.coeffs.size(); ++i) c[i - 1] = mulmod(a.coeffs[i], static_cast<Int>(i), a.modulus);
    return Poly(std::move(c), a.modulus);
}

inline Poly make_monic(const Poly& a) {
    if (a.is_zero()) return a;
    return scale(a, invmod(a.lead(), a.modulus));
}

inline Poly powmod(const Poly& base, BigInt e, const Poly& f) {
    Poly r = Poly::constant(1, base.modulus) % f;
    Poly b = base % f;
    while (e > 0) {
        if ((e & 1) != 0) r = (r * b) % f;
        b = (b * b) % f;
        e >>= 1;
    }
    return r;
}

// Field-only routines; the modulus must be a prime.

inline Poly gcd_field(Poly a, Poly b) {
    while (!b.is_zero()) {
        Poly r = a % b;
        a = std::move(b);
        b = std::move(r);
    }
    return make_monic(a);
}

/// Returns (g, s, t) with s*a + t*b = g monic.
inline std::tuple<Poly, Poly, Poly> xgcd_field(Poly a, Poly b) {
    const Int m = a.modulus;
    Poly s0 = Poly::constant(1, m), s1({}, m), t0({}, m), t1 = Poly::constant(1, m);
    while (!b.is_zero()) {
        auto [q, r] = divmod(a, b);
        a = std::move(b);
        b = std::move(r);
        Poly s2 = s0 - q * s1, t2 = t0 - q * t1;
        s0 = std::move(s1);
        s1 = std::move(s2);
        t0 = std::move(t1);
        t1 = std::move(t2);
    }
    Int inv = invmod(a.lead(), m);
    return {scale(a, inv), scale(s0, inv), scale(t0, inv)};
}

/// p-th root of a polynomial over F_p whose derivative vanishes.
inline Poly pth_root(const Poly& a) {
    const Int p = a.modulus;
    std::vector<Int> c;
    for (int i = 0; i <= a.degree(); i += static_cast<int>(p)) c.push_back(a.coeffs[i]);
    return Poly(std::move(c), p);
}

/// Squarefree decomposition over F_p: list of (squarefree factor, multiplicity).
inline std::vector<std::pair<Poly, int>> squarefree_decomposition(const Poly& f_in) {
    const Int p = f_in.modulus;
    std::vector<std::pair<Poly, int>> out;
    Poly f = make_monic(f_in);
    if (f.degree() < 1) return out;
    Poly fd = derivative(f);
    if (fd.is_zero()) {
        for (auto& [g, e] : squarefree_decomposition(pth_root(f))) out.emplace_back(g, e * static_cast<int>(p));
        return out;
    }
    Poly c = gcd_field(f, fd);
    Poly w = divmod(f, c).first;
    int i = 1;
    while (w.degree() > 0) {
        Poly y = gcd_field(w, c);
        Poly z = divmod(w, y).first;
        if (z.degree() > 0) out.emplace_back(make_monic(z), i);
        ++i;
        w = y;
        c = divmod(c, y).first;
    }
    if (c.degree() > 0) {
        for (auto& [g, e] : squarefree_decomposition(pth_root(c))) out.emplace_back(g, e * static_cast<int>(p));
    }
    return out;
}

/// Distinct-degree factorization of a monic squarefree polynomial over F_p.
inline std::vector<std::pair<Poly, int>> distinct_degree_factorization(Poly f) {
    const Int p = f.modulus;
    std::vector<std::pair<Poly, int>> out;
    Poly x = Poly::x_power(1, p);
    Poly h = x % f;
    int d = 0;
    while (f.degree() >= 2 * (d + 1)) {
        ++d;
        h = powmod(h, BigInt(p), f);
        Poly g = gcd_field(f, h - x);
        if (g.degree() > 0) {
            out.emplace_back(g, d);
            f = divmod(f, g).first;
            h = h % f;
        }
    }
    if (f.degree() > 0) out.emplace_back(make_monic(f), f.degree());
    return out;
}

/// Equal-degree splitting (Cantor-Zassenhaus; trace map in characteristic 2).
inline std::vector<Poly> equal_degree_factorization(const Poly& f, int d, std::mt19937_64& rng) {
    const Int p = f.modulus;
    if (f.degree() == d) return {make_monic(f)};
    std::uniform_int_distribution<Int> coef(0, p - 1);
    for (;;) {
        std::vector<Int> c(f.degree());
        for (auto& x : c) x = coef(rng);
        Poly a(c, p);
        if (a.degree() < 1) continue;
        Poly b({}, p);
        if (p == 2) {
            Poly t = a;
            b = a;
            for (int i = 1; i < d; ++i) {
                t = (t * t) % f;
                b = b + t;
            }
        } else {
            BigInt e = (boost::multiprecision::pow(BigInt(p), d) - 1) / 2;
            b = powmod(a, e, f) - Poly::constant(1, p);
        }
        Poly g = gcd_field(f, b);
        if (g.degree() > 0 && g.degree() < f.degree()) {
            auto left = equal_degree_factorization(g, d, rng);
            auto right = equal_degree_factorization(divmod(f, g).first, d, rng);
            left.insert(left.end(), right.begin(), right.end());
            return left;
        }
    }
}

/// Complete factorization over F_p into monic irreducibles with multiplicity,
/// sorted by (degree, coefficients) so the output is canonical.
inline std::vector<std::pair<Poly, int>> factor_mod_prime(const Poly& f) {
    std::mt19937_64 rng(0x5eedf00dULL ^ static_cast<std::uint64_t>(f.modulus));
    std::vector<std::pair<Poly, int>> out;
    for (auto& [sf, e] : squarefree_decomposition(f))
        for (auto& [g, d] : distinct_degree_factorization(sf))
            for (auto& irr : equal_degree_factorization(g, d, rng)) out.emplace_back(irr, e);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.first.degree() != b.first.degree()) return a.first.degree() < b.first.degree();
        return a.first.coeffs < b.first.coeffs;
    });
    return out;
}

/// Lifts P = a*b mod ell (a, b monic and coprime mod ell) to P = A*B mod ell^level.
inline std::pair<Poly, Poly> hensel_lift_pair(const Poly& P, Poly a, Poly b, Int ell, int level) {
    auto [g, s, t] = xgcd_field(a.reduced(ell), b.reduced(ell));
    if (g.degree() != 0) throw Error(Errc::NotCoprime, "Hensel lifting requires coprime factors");
    Int pk = ell;
    for (int k = 1; k < level; ++k) {
        Int pk1 = pk * ell;
        Poly A = a.reduced(pk1), B = b.reduced(pk1);
        Poly err = P.reduced(pk1) - A * B;
        std::vector<Int> ec(err.coeffs.size());
        for (std::size_t i = 0; i < ec.size(); ++i) ec[i] = err.coeffs[i] / pk;  // exact
        Poly e(ec, ell);
        // e = a*(s e + Q b) + b*r with r = (t e) mod a.
        auto [quo, r] = divmod(t * e, a.reduced(ell));
        Poly db = divmod(e - b.reduced(ell) * r, a.reduced(ell)).first;
        Poly da = r;
        std::vector<Int> ac(A.coeffs), bc(B.coeffs);
        for (std::size_t i = 0; i < da.coeffs.size(); ++i) ac[i] += pk * da.coeffs[i];
        for (std::size_t i = 0; i < db.coeffs.size(); ++i) bc[i] += pk * db.coeffs[i];
        a = Poly(ac, pk1);
        b = Poly(bc, pk1);
        pk = pk1;
    }
    return {a.reduced(pk), b.reduced(pk)};
}

inline std::string poly_to_string(const Poly& f, bool balanced = true) {
    if (f.is_zero()) return "0";
    std::ostringstream os;
    bool first = true;
    for (int i = f.degree(); i >= 0; --i) {
        Int c = f.coeffs[i];
        if (c == 0) continue;
        if (balanced && c > f.modulus / 2) c -= f.modulus;
        bool neg = c < 0;
        Int a = neg ? -c : c;
        if (first)
            os << (neg ? "-" : "");
        else
            os << (neg ? "-" : "+");
        if (i == 0 || a != 1) os << a;
        if (i >= 1) os << "x";
        if (i >= 2) os << "^" << i;
        first = false;
    }
    return os.str();
}

// ---------------------------------------------------------------------------

/// One block of the local factorization: an irreducible g mod ell together
/// with the Hensel lift of g^multiplicity to level N.
struct LocalFactor {
    Poly residue_poly;  // monic irreducible mod ell
    int multiplicity = 1;
    Poly lifted;        // monic, mod ell^N, reduces to residue_poly^multiplicity
    Int residue_size = 2;

    int residue_degree() const { return residue_poly.degree(); }
    bool maximal() const { return multiplicity == 1; }
    std::string name() const { return poly_to_string(residue_poly); }
};

enum class RingKind { Monogenic, Torsion };

/// R = (Z/ell^N)[x]/(P) with its local factorization, or the single hard-coded
/// non-monogenic example Z_p[x]/(p x, x^2).
struct QuotientRing {
    RingKind kind = RingKind::Monogenic;
    PrimePower base;
    Poly modulus_poly;  // P, mod ell^N (unused for the torsion ring)
    std::vector<LocalFactor> local_factors;
    Int frobenius_scalar = 1;  // q mod ell^N

    Int ell() const { return base.ell; }
    int level() const { return base.level; }
    int degree() const { return kind == RingKind::Torsion ? 2 : modulus_poly.degree(); }

    std::vector<Int> residue_fields() const {
        std::vector<Int> r;
        for (const auto& f : local_factors) r.push_back(f.residue_size);
        return r;
    }

    bool is_maximal_order() const {
        if (kind == RingKind::Torsion) return false;
        return std::all_of(local_factors.begin(), local_factors.end(), [](const LocalFactor& f) { return f.maximal(); });
    }

    /// Polynomials in x that must vanish on every module (integer coefficients mod ell^N).
    std::vector<Poly> relations() const {
        const Int m = base.modulus();
        if (kind == RingKind::Torsion) return {Poly({0, ell()}, m), Poly({0, 0, 1}, m)};
        return {modulus_poly};
    }

    std::string describe() const {
        std::ostringstream os;
        if (kind == RingKind::Torsion) {
            os << "Z_" << ell() << "[x]/(" << ell() << "x,x^2) @ level " << level();
        } else {
            os << "(Z/" << ell() << "^" << level() << ")[x]/(" << poly_to_string(modulus_poly) << "), q=" << frobenius_scalar;
        }
        return os.str();
    }
};

/// Builds the ring and its local factorization. Errors: NotMonic,
/// ConstantTermNotUnit, CompositeEll (from PrimePower).
inline QuotientRing build_ring(Int ell, int level, const std::vector<Int>& coeffs_ascending, Int q) {
    PrimePower base(ell, level);
    const Int m = base.modulus();
    Poly P(coeffs_ascending, m);
    if (P.degree() < 1 || P.lead() != 1) throw Error(Errc::NotMonic, "P must be monic of degree >= 1");
    if (mod(P[0], ell) == 0) throw Error(Errc::ConstantTermNotUnit, "ell divides P(0)");
    if (mod(q, ell) == 0) throw Error(Errc::PreconditionViolated, "q must be prime to ell");

    QuotientRing R;
    R.kind = RingKind::Monogenic;
    R.base = base;
    R.modulus_poly = P;
    R.frobenius_scalar = mod(q, m);

    auto factors = factor_mod_prime(P.reduced(ell));
    std::vector<Poly> blocks;
    for (auto& [g, e] : factors) {
        Poly b = Poly::constant(1, ell);
        for (int i = 0; i < e; ++i) b = b * g;
        blocks.push_back(b);
    }
    // Lift P = B_0 * (B_1 ... B_k) successively.
    std::vector<Poly> lifted;
    Poly rest = P;
    for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
        Poly others = Poly::constant(1, ell);
        for (std::size_t j = i + 1; j < blocks.size(); ++j) others = others * blocks[j];
        auto [a, b] = hensel_lift_pair(rest, blocks[i], others, ell, level);
        lifted.push_back(a);
        rest = b;
    }
    lifted.push_back(rest);
    for (std::size_t i = 0; i < factors.size(); ++i) {
        LocalFactor lf;
        lf.residue_poly = factors[i].first;
        lf.multiplicity = factors[i].second;
        lf.lifted = lifted[i];
        lf.residue_size = ipow(ell, factors[i].first.degree());
        R.local_factors.push_back(std::move(lf));
    }
    return R;
}

/// The local ring Z_p[x]/(p x, x^2), truncated at the given level.
inline QuotientRing make_torsion_ring(Int p, int level) {
    QuotientRing R;
    R.kind = RingKind::Torsion;
    R.base = PrimePower(p, level);
    R.frobenius_scalar = 1;
    LocalFactor lf;
    lf.residue_poly = Poly({0, 1}, p);
    lf.multiplicity = 2;
    lf.lifted = Poly({0, 0, 1}, R.base.modulus());
    lf.residue_size = p;
    R.local_factors.push_back(lf);
    return R;
}

// ---------------------------------------------------------------------------
// Cohen-Lenstra normalizing constants.

/// prod_{i>=1} (1 - Q^{-i}), truncated once the remaining tail is below tol.
inline double c_constant(Int Q, double tol) {
    const double x = 1.0 / static_cast<double>(Q);
    double prod = 1.0, xi = 1.0;
    for (int i = 1; i < 10000; ++i) {
        xi *= x;
        prod *= (1.0 - xi);
        // Remaining factors shrink the product by at most prod * sum_{j>i} x^j.
        double tail = prod * xi * x / (1.0 - x);
        if (tail < tol) break;
    }
    return prod;
}

/// Euler pentagonal series sum_{|n| <= terms} (-1)^n Q^{-(3n^2-n)/2}.
inline double c_constant_pentagonal(Int Q, int terms) {
    const double x = 1.0 / static_cast<double>(Q);
    double sum = 1.0;
    for (int n = 1; n <= terms; ++n) {
        double sign = (n % 2) ? -1.0 : 1.0;
        sum += sign * (std::pow(x, (3.0 * n * n - n) / 2.0) + std::pow(x, (3.0 * n * n + n) / 2.0));
    }
    return sum;
}

inline double c_R_for_ring(const QuotientRing& R, double tol = 1e-14) {
    double c = 1.0;
    const double per = tol / std::max<std::size_t>(1, R.local_factors.size());
    for (Int Q : R.residue_fields()) c *= c_constant(Q, per);
    return c;
}

// ---------------------------------------------------------------------------
// "ell=3;level=4;P=-1,0,1;q=7" and "kind=torsion;ell=3;level=6".

inline QuotientRing parse_ring_spec(std::string_view spec) {
    auto fail = [&](std::size_t pos, const std::string& msg) -> Error {
        return Error(Errc::ConfigError, "ring spec \"" + std::string(spec) + "\" at position " + std::to_string(pos) + ": " + msg);
    };
    auto parse_int = [&](std::string_view s, std::size_t pos) -> Int {
        if (s.empty()) throw fail(pos, "expected integer");
        std::size_t i = 0;
        bool neg = false;
        if (s[0] == '-' || s[0] == '+') {
            neg = s[0] == '-';
            i = 1;
        }
        if (i >= s.size()) throw fail(pos, "expected integer");
        Int v = 0;
        for (; i < s.size(); ++i) {
            if (s[i] < '0' || s[i] > '9') throw fail(pos + i, std::string("unexpected character '") + s[i] + "'");
            v = v * 10 + (s[i] - '0');
            if (v > (Int{1} << 40)) throw fail(pos, "integer out of range");
        }
        return neg ? -v : v;
    };

    Int ell = 0, q = 1;
    int level = 0;
    bool have_ell = false, have_level = false, have_P = false, torsion = false;
    std::vector<Int> coeffs;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        std::size_t end = spec.find(';', pos);
        if (end == std::string_view::npos) end = spec.size();
        std::string_view item = spec.substr(pos, end - pos);
        if (item.empty()) {
            if (end == spec.size()) break;
            throw fail(pos, "empty field");
        }
        std::size_t eq = item.find('=');
        if (eq == std::string_view::npos) throw fail(pos, "expected key=value");
        std::string_view key = item.substr(0, eq), val = item.substr(eq + 1);
        std::size_t vpos = pos + eq + 1;
        if (key == "ell") {
            ell = parse_int(val, vpos);
            have_ell = true;
        } else if (key == "level") {
            level = static_cast<int>(parse_int(val, vpos));
            have_level = true;
        } else if (key == "q") {
            q = parse_int(val, vpos);
        } else if (key == "P") {
            std::size_t cp = 0;
            while (cp <= val.size()) {
                std::size_t ce = val.find(',', cp);
                if (ce == std::string_view::npos) ce = val.size();
                coeffs.push_back(parse_int(val.substr(cp, ce - cp), vpos + cp));
                cp = ce + 1;
            }
            have_P = true;
        } else if (key == "kind") {
            if (val == "torsion")
                torsion = true;
            else if (val != "monogenic")
                throw fail(vpos, "unknown ring kind");
        } else {
            throw fail(pos, "unknown key '" + std::string(key) + "'");
        }
        pos = end + 1;
    }
    if (!have_ell) throw fail(spec.size(), "missing ell");
    if (!have_level) throw fail(spec.size(), "missing level");
    if (torsion) return make_torsion_ring(ell, level);
    if (!have_P) throw fail(spec.size(), "missing P");
    return build_ring(ell, level, coeffs, q);
}

inline std::string format_ring_spec(const QuotientRing& R) {
    std::ostringstream os;
    if (R.kind == RingKind::Torsion) {
        os << "kind=torsion;ell=" << R.ell() << ";level=" << R.level();
        return os.str();
    }
    os << "ell=" << R.ell() << ";level=" << R.level() << ";P=";
    for (int i = 0; i <= R.modulus_poly.degree(); ++i) {
        Int c = R.modulus_poly.coeffs[i];
        if (c > R.base.modulus() / 2) c -= R.base.modulus();
        os << (i ? "," : "") << c;
    }
    os << ";q=" << R.frobenius_scalar;
    return os.str();
}

}  // namespace clab
