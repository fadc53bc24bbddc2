#pragma once
// Small finite fields F_{p^k} with log/exp tables, and dense polynomials over them.

#include "clab/arith.hpp"

#include <map>
#include <memory>
#include <vector>

namespace clab {

/// F_{p^k}. Elements are integers 0..size-1 whose base-p digits are the
/// coefficients in the power basis of a primitive generator.
class GaloisField {
   public:
    GaloisField(Int p, int k) : p_(p), k_(k) {
        if (!is_prime(p)) throw Error(Errc::PreconditionViolated, "field characteristic must be prime");
        if (k < 1) throw Error(Errc::PreconditionViolated, "field degree must be >= 1");
        size_ = ipow(p, k);
        if (size_ > 20'000'000) throw Error(Errc::BudgetExceeded, "field too large for table arithmetic");
        build_tables();
    }

    Int characteristic() const { return p_; }
    int degree() const { return k_; }
    Int size() const { return size_; }
    const std::vector<Int>& modulus_coeffs() const { return modulus_; }

    int add(int a, int b) const {
        if (!add_table_.empty()) return add_table_[static_cast<std::size_t>(a) * size_ + b];
        return digitwise(a, b, 1);
    }
    int sub(int a, int b) const { return digitwise(a, b, -1); }
    int neg(int a) const { return digitwise(0, a, -1); }
    int mul(int a, int b) const {
        if (a == 0 || b == 0) return 0;
        Int e = log_[a] + log_[b];
        if (e >= size_ - 1) e -= size_ - 1;
        return exp_[e];
    }
    int inv(int a) const {
        if (a == 0) throw std::domain_error("inverse of zero");
        return exp_[(size_ - 1 - log_[a]) % (size_ - 1)];
    }
    int div(int a, int b) const { return mul(a, inv(b)); }
    int pow(int a, BigInt e) const {
        if (e == 0) return 1;
        if (a == 0) return 0;
        BigInt r = (BigInt(log_[a]) * e) % (size_ - 1);
        return exp_[static_cast<std::size_t>(r)];
    }
    int from_int(Int n) const { return static_cast<int>(mod(n, p_)); }
    int generator() const { return exp_[1 % (size_ - 1)]; }
    int exp_of(Int e) const { return exp_[mod(e, size_ - 1)]; }
    Int log_of(int a) const { return log_[a]; }

    /// Quadratic character: 0, 1 or -1 (odd characteristic).
    int chi(int a) const {
        if (a == 0) return 0;
        return log_[a] % 2 == 0 ? 1 : -1;
    }
    bool is_square(int a) const { return chi(a) >= 0; }
    /// One square root of a square.
    int sqrt(int a) const {
        if (a == 0) return 0;
        if (log_[a] % 2 != 0) throw std::domain_error("not a square");
        return exp_[log_[a] / 2];
    }
    int frobenius(int a, Int q) const { return pow(a, BigInt(q)); }

   private:
    int digitwise(int a, int b, int sign) const {
        int out = 0;
        Int place = 1;
        Int x = a, y = b;
        for (int i = 0; i < k_; ++i) {
            Int d = mod(x % p_ + sign * (y % p_), p_);
            out += static_cast<int>(d * place);
            place *= p_;
            x /= p_;
            y /= p_;
        }
        return out;
    }

    void build_tables() {
        exp_.assign(size_, 0);
        log_.assign(size_, 0);
        if (k_ == 1) {
            for (Int g = 2; g <= p_ || p_ == 2; ++g) {
                Int cand = p_ == 2 ? 1 : g;
                if (try_generator_prime(cand)) return;
                if (p_ == 2) break;
            }
            throw Error(Errc::PreconditionViolated, "no primitive root found");
        }
        // Search monic f of degree k with x primitive modulo f.
        const Int count = ipow(p_, k_);
        for (Int idx = 1; idx < count; ++idx) {
            std::vector<Int> f(k_ + 1, 0);
            Int t = idx;
            for (int i = 0; i < k_; ++i) {
                f[i] = t % p_;
                t /= p_;
            }
            f[k_] = 1;
            if (f[0] == 0) continue;
            if (try_modulus(f)) {
                modulus_ = f;
                return;
            }
        }
        throw Error(Errc::PreconditionViolated, "no primitive polynomial found");
    }

    bool try_generator_prime(Int g) {
        std::vector<char> seen(size_, 0);
        Int x = 1;
        for (Int e = 0; e < size_ - 1; ++e) {
            if (seen[x]) return false;
            seen[x] = 1;
            exp_[e] = static_cast<int>(x);
            log_[x] = e;
            x = x * g % p_;
        }
        if (x != 1) return false;
        modulus_ = {mod(-g, p_), 1};
        if (size_ <= 1024) build_add_table();
        return true;
    }

    bool try_modulus(const std::vector<Int>& f) {
        std::vector<Int> cur(k_, 0);
        cur[0] = 1;
        std::vector<char> seen(size_, 0);
        for (Int e = 0; e < size_ - 1; ++e) {
            Int code = 0, place = 1;
            for (int i = 0; i < k_; ++i) {
                code += cur[i] * place;
                place *= p_;
            }
            if (seen[code]) return false;
            seen[code] = 1;
            exp_[e] = static_cast<int>(code);
            log_[code] = e;
            // cur *= x mod f
            Int top = cur[k_ - 1];
            for (int i = k_ - 1; i > 0; --i) cur[i] = mod(cur[i - 1] - top * f[i], p_);
            cur[0] = mod(-top * f[0], p_);
        }
        if (!(cur[0] == 1 && std::all_of(cur.begin() + 1, cur.end(), [](Int c) { return c == 0; }))) return false;
        if (size_ <= 1024) build_add_table();
        return true;
    }

    void build_add_table() {
        add_table_.assign(static_cast<std::size_t>(size_ * size_), 0);
        for (Int a = 0; a < size_; ++a)
            for (Int b = 0; b < size_; ++b) add_table_[a * size_ + b] = digitwise(static_cast<int>(a), static_cast<int>(b), 1);
    }

    Int p_, size_ = 0;
    int k_;
    std::vector<Int> modulus_;
    std::vector<int> exp_;
    std::vector<Int> log_;
    std::vector<int> add_table_;
};

/// Embedding F_{p^e} -> F_{p^{ek}}: sends the small field's generator to a
/// root of its minimal polynomial in the large field.
class FieldEmbedding {
   public:
    FieldEmbedding(const GaloisField& small, const GaloisField& big) {
        if (small.characteristic() != big.characteristic() || big.degree() % small.degree() != 0)
            throw Error(Errc::PreconditionViolated, "not a subfield");
        const auto& h = small.modulus_coeffs();
        int root = -1;
        if (small.degree() == 1) {
            root = big.from_int(mod(-h[0], small.characteristic()));
        } else {
            for (Int y = 0; y < big.size() && root < 0; ++y) {
                int acc = 0;
                for (int i = static_cast<int>(h.size()) - 1; i >= 0; --i) acc = big.add(big.mul(acc, static_cast<int>(y)), big.from_int(h[i]));
                if (acc == 0) root = static_cast<int>(y);
            }
        }
        if (root < 0) throw Error(Errc::PreconditionViolated, "no root of the subfield modulus");
        map_.assign(small.size(), 0);
        // The small field's power basis is 1, g, g^2, ... where g is its generator;
        // for degree 1 the digits are prime-field integers.
        for (Int a = 0; a < small.size(); ++a) {
            if (small.degree() == 1) {
                map_[a] = big.from_int(a);
                continue;
            }
            int acc = 0, pw = 1;
            Int t = a;
            for (int i = 0; i < small.degree(); ++i) {
                acc = big.add(acc, big.mul(big.from_int(t % small.characteristic()), pw));
                pw = big.mul(pw, root);
                t /= small.characteristic();
            }
            map_[a] = acc;
        }
    }
    int operator()(int a) const { return map_[a]; }

   private:
    std::vector<int> map_;
};

// ---------------------------------------------------------------------------
// Polynomials over a GaloisField, coefficients ascending, no trailing zeros.

using FPoly = std::vector<int>;

inline void fp_trim(FPoly& a) {
    while (!a.empty() && a.back() == 0) a.pop_back();
}
inline int fp_deg(const FPoly& a) { return static_cast<int>(a.size()) - 1; }

inline FPoly fp_add(const GaloisField& F, const FPoly& a, const FPoly& b) {
    FPoly r(std::max(a.size(), b.size()), 0);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = F.add(i < a.size() ? a[i] : 0, i < b.size() ? b[i] : 0);
    fp_trim(r);
    return r;
}
inline FPoly fp_sub(const GaloisField& F, const FPoly& a, const FPoly& b) {
    FPoly r(std::max(a.size(), b.size()), 0);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = F.sub(i < a.size() ? a[i] : 0, i < b.size() ? b[i] : 0);
    fp_trim(r);
    return r;
}
inline FPoly fp_neg(const GaloisField& F, const FPoly& a) { return fp_sub(F, {}, a); }
inline FPoly fp_scale(const GaloisField& F, const FPoly& a, int c) {
    FPoly r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = F.mul(a[i], c);
    fp_trim(r);
    return r;
}
inline FPoly fp_mul(const GaloisField& F, const FPoly& a, const FPoly& b) {
    if (a.empty() || b.empty()) return {};
    FPoly r(a.size() + b.size() - 1, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0) continue;
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] = F.add(r[i + j], F.mul(a[i], b[j]));
    }
    fp_trim(r);
    return r;
}
inline std::pair<FPoly, FPoly> fp_divmod(const GaloisField& F, const FPoly& a, const FPoly& b) {
    if (b.empty()) throw std::domain_error("polynomial division by zero");
    FPoly r = a, q;
    const int db = fp_deg(b);
    const int li = F.inv(b.back());
    if (fp_deg(r) >= db) q.assign(r.size() - b.size() + 1, 0);
    while (!r.empty() && fp_deg(r) >= db) {
        const int shift = fp_deg(r) - db;
        const int c = F.mul(r.back(), li);
        q[shift] = c;
        for (std::size_t j = 0; j < b.size(); ++j) r[shift + j] = F.sub(r[shift + j], F.mul(c, b[j]));
        fp_trim(r);
    }
    fp_trim(q);
    return {q, r};
}
inline FPoly fp_mod(const GaloisField& F, const FPoly& a, const FPoly& b) { return fp_divmod(F, a, b).second; }
inline FPoly fp_monic(const GaloisField& F, const FPoly& a) { return a.empty() ? a : fp_scale(F, a, F.inv(a.back())); }

/// (g, s, t) with g = s a + t b monic.
inline std::tuple<FPoly, FPoly, FPoly> fp_xgcd(const GaloisField& F, FPoly a, FPoly b) {
    FPoly s0{1}, s1{}, t0{}, t1{1};
    while (!b.empty()) {
        auto [q, r] = fp_divmod(F, a, b);
        a = std::move(b);
        b = std::move(r);
        FPoly s2 = fp_sub(F, s0, fp_mul(F, q, s1));
        FPoly t2 = fp_sub(F, t0, fp_mul(F, q, t1));
        s0 = std::move(s1);
        s1 = std::move(s2);
        t0 = std::move(t1);
        t1 = std::move(t2);
    }
    if (a.empty()) return {a, s0, t0};
    const int li = F.inv(a.back());
    return {fp_scale(F, a, li), fp_scale(F, s0, li), fp_scale(F, t0, li)};
}
inline int fp_eval(const GaloisField& F, const FPoly& a, int x) {
    int acc = 0;
    for (int i = fp_deg(a); i >= 0; --i) acc = F.add(F.mul(acc, x), a[i]);
    return acc;
}
inline FPoly fp_derivative(const GaloisField& F, const FPoly& a) {
    FPoly r;
    for (std::size_t i = 1; i < a.size(); ++i) r.push_back(F.mul(F.from_int(static_cast<Int>(i)), a[i]));
    fp_trim(r);
    return r;
}

}  // namespace clab
