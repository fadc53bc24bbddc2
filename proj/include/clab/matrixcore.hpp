#pragma once
// Matrices over Z/ell^N: Smith normal form, cokernels, finite abelian group
// linear algebra, and uniform samplers for End, Sp and the GSp coset.

#include "clab/ringcore.hpp"
#include "clab/rng.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace clab {

using Vec = std::vector<Int>;

class Mat {
   public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, PrimePower pp) : rows_(rows), cols_(cols), pp_(pp), a_(rows * cols, 0) {}
    Mat(std::size_t rows, std::size_t cols, PrimePower pp, std::vector<Int> entries)
        : rows_(rows), cols_(cols), pp_(pp), a_(std::move(entries)) {
        if (a_.size() != rows * cols) throw std::invalid_argument("Mat: entry count mismatch");
        for (auto& x : a_) x = clab::mod(x, pp_.modulus());
    }

    static Mat identity(std::size_t n, PrimePower pp) {
        Mat m(n, n, pp);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1 % pp.modulus();
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    const PrimePower& prime_power() const { return pp_; }
    Int modulus() const { return pp_.modulus(); }
    const std::vector<Int>& entries() const { return a_; }

    Int& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    Int operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    Vec column(std::size_t j) const {
        Vec v(rows_);
        for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
        return v;
    }
    void set_column(std::size_t j, const Vec& v) {
        for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = clab::mod(v[i], modulus());
    }

    /// Same integer entries reinterpreted modulo ell^k.
    Mat at_level(int k) const {
        Mat m(rows_, cols_, pp_.with_level(k));
        for (std::size_t i = 0; i < a_.size(); ++i) m.a_[i] = clab::mod(a_[i], m.modulus());
        return m;
    }

    Mat transpose() const {
        Mat t(cols_, rows_, pp_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Mat operator*(const Mat& b) const {
        if (cols_ != b.rows_) throw std::invalid_argument("Mat: dimension mismatch");
        const Int m = modulus();
        Mat c(rows_, b.cols_, pp_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const Int aik = (*this)(i, k);
                if (aik == 0) continue;
                const Int* brow = &b.a_[k * b.cols_];
                Int* crow = &c.a_[i * b.cols_];
                for (std::size_t j = 0; j < b.cols_; ++j) crow[j] = (crow[j] + aik * brow[j]) % m;
            }
        return c;
    }

    Vec operator*(const Vec& v) const {
        const Int m = modulus();
        Vec out(rows_, 0);
        for (std::size_t i = 0; i < rows_; ++i) {
            Int s = 0;
            for (std::size_t j = 0; j < cols_; ++j) s = (s + (*this)(i, j) * clab::mod(v[j], m)) % m;
            out[i] = s;
        }
        return out;
    }

    Mat operator+(const Mat& b) const {
        Mat c = *this;
        for (std::size_t i = 0; i < a_.size(); ++i) c.a_[i] = (a_[i] + b.a_[i]) % modulus();
        return c;
    }
    Mat operator-(const Mat& b) const {
        Mat c = *this;
        for (std::size_t i = 0; i < a_.size(); ++i) c.a_[i] = clab::mod(a_[i] - b.a_[i], modulus());
        return c;
    }
    Mat scaled(Int s) const {
        Mat c = *this;
        s = clab::mod(s, modulus());
        for (auto& x : c.a_) x = mulmod(x, s, modulus());
        return c;
    }

    bool is_zero() const {
        return std::all_of(a_.begin(), a_.end(), [](Int x) { return x == 0; });
    }

    friend bool operator==(const Mat& a, const Mat& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.pp_ == b.pp_ && a.a_ == b.a_;
    }

   private:
    std::size_t rows_ = 0, cols_ = 0;
    PrimePower pp_;
    std::vector<Int> a_;
};

inline nlohmann::json to_json(const Mat& m) {
    return {{"rows", m.rows()},
            {"cols", m.cols()},
            {"modulus", {{"ell", m.prime_power().ell}, {"level", m.prime_power().level}}},
            {"entries", m.entries()}};
}

inline Mat mat_from_json(const nlohmann::json& j) {
    PrimePower pp(j.at("modulus").at("ell").get<Int>(), j.at("modulus").at("level").get<int>());
    return Mat(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(), pp, j.at("entries").get<std::vector<Int>>());
}

/// Horner evaluation of P at a square matrix.
inline Mat poly_at(const Poly& P, const Mat& F) {
    const std::size_t n = F.rows();
    Mat acc(n, n, F.prime_power());
    for (int i = P.degree(); i >= 0; --i) {
        acc = acc * F;
        const Int c = clab::mod(P.coeffs[i], F.modulus());
        for (std::size_t k = 0; k < n; ++k) acc(k, k) = (acc(k, k) + c) % F.modulus();
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Smith normal form over the local principal ideal ring Z/ell^N.

struct SnfResult {
    Mat left, right, left_inv;
    /// One valuation per diagonal position (min(rows, cols) of them),
    /// nondecreasing; a value equal to the level means the divisor is 0 mod ell^N.
    std::vector<int> divisor_valuations;
    int level = 1;

    bool is_overflow(int v) const { return v >= level; }
};

namespace detail {

struct SnfWork {
    Mat d, left, left_inv, right;
    std::vector<int> vals;
};

inline SnfWork snf_impl(const Mat& m, bool transforms) {
    const PrimePower pp = m.prime_power();
    const Int mo = pp.modulus(), ell = pp.ell;
    const int N = pp.level;
    const std::size_t r = m.rows(), c = m.cols();
    SnfWork w{m, {}, {}, {}, {}};
    if (transforms) {
        w.left = Mat::identity(r, pp);
        w.left_inv = Mat::identity(r, pp);
        w.right = Mat::identity(c, pp);
    }
    Mat& D = w.d;
    const std::size_t n = std::min(r, c);
    for (std::size_t k = 0; k < n; ++k) {
        int best = N;
        std::size_t bi = k, bj = k;
        for (std::size_t i = k; i < r && best > 0; ++i)
            for (std::size_t j = k; j < c; ++j) {
                Int x = D(i, j);
                if (x == 0) continue;
                int v = valuation(x, ell, N);
                if (v < best) {
                    best = v;
                    bi = i;
                    bj = j;
                    if (v == 0) break;
                }
            }
        if (best == N) {
            for (std::size_t t = k; t < n; ++t) w.vals.push_back(N);
            break;
        }
        if (bi != k) {
            for (std::size_t j = 0; j < c; ++j) std::swap(D(k, j), D(bi, j));
            if (transforms) {
                for (std::size_t j = 0; j < r; ++j) std::swap(w.left(k, j), w.left(bi, j));
                for (std::size_t i = 0; i < r; ++i) std::swap(w.left_inv(i, k), w.left_inv(i, bi));
            }
        }
        if (bj != k) {
            for (std::size_t i = 0; i < r; ++i) std::swap(D(i, k), D(i, bj));
            if (transforms)
                for (std::size_t i = 0; i < c; ++i) std::swap(w.right(i, k), w.right(i, bj));
        }
        const Int pv = pp.power(best);
        const Int unit = D(k, k) / pv;
        const Int uinv = invmod(unit, mo);
        if (unit != 1) {
            for (std::size_t j = k; j < c; ++j) D(k, j) = mulmod(D(k, j), uinv, mo);
            if (transforms) {
                for (std::size_t j = 0; j < r; ++j) w.left(k, j) = mulmod(w.left(k, j), uinv, mo);
                for (std::size_t i = 0; i < r; ++i) w.left_inv(i, k) = mulmod(w.left_inv(i, k), unit, mo);
            }
        }
        // Every remaining entry is divisible by ell^best, so eliminate exactly.
        for (std::size_t i = k + 1; i < r; ++i) {
            Int x = D(i, k);
            if (x == 0) continue;
            Int t = x / pv;
            for (std::size_t j = k; j < c; ++j) D(i, j) = clab::mod(D(i, j) - t * D(k, j), mo);
            if (transforms) {
                for (std::size_t j = 0; j < r; ++j) w.left(i, j) = clab::mod(w.left(i, j) - t * w.left(k, j), mo);
                for (std::size_t a = 0; a < r; ++a) w.left_inv(a, k) = (w.left_inv(a, k) + t * w.left_inv(a, i)) % mo;
            }
        }
        for (std::size_t j = k + 1; j < c; ++j) {
            Int x = D(k, j);
            if (x == 0) continue;
            Int t = x / pv;
            D(k, j) = 0;
            if (transforms)
                for (std::size_t a = 0; a < c; ++a) w.right(a, j) = clab::mod(w.right(a, j) - t * w.right(a, k), mo);
        }
        w.vals.push_back(best);
    }
    return w;
}

}  // namespace detail

inline SnfResult smith_normal_form(const Mat& m) {
    auto w = detail::snf_impl(m, true);
    return SnfResult{std::move(w.left), std::move(w.right), std::move(w.left_inv), std::move(w.vals), m.prime_power().level};
}

/// Divisor valuations only (no transforms); the fast path for samplers.
inline std::vector<int> snf_valuations(const Mat& m) { return detail::snf_impl(m, false).vals; }

struct CokernelShape {
    std::vector<int> partition;  // nonincreasing nonzero exponents
    bool overflow = false;
};

inline CokernelShape shape_from_valuations(const std::vector<int>& vals, std::size_t rows, int level) {
    CokernelShape s;
    for (int v : vals) {
        if (v > 0) s.partition.push_back(v);
        if (v >= level) s.overflow = true;
    }
    for (std::size_t k = vals.size(); k < rows; ++k) {
        s.partition.push_back(level);
        s.overflow = true;
    }
    std::sort(s.partition.begin(), s.partition.end(), std::greater<>());
    return s;
}

/// Cokernel Z^rows / (column span) as a partition of ell-exponents.
inline CokernelShape cokernel_structure(const Mat& m) {
    return shape_from_valuations(snf_valuations(m), m.rows(), m.prime_power().level);
}

/// Cokernel of G together with the endomorphism induced by X (X must commute
/// with G). Components are ordered by nonincreasing exponent.
struct CokernelAction {
    std::vector<int> partition;
    Mat action;                 // entries of row i reduced mod ell^{partition[i]}
    std::vector<Vec> coordinate_rows;  // y -> coordinates: row i of the SNF left transform
    std::vector<Vec> generators;       // preimages in the ambient module of the cokernel generators
    bool overflow = false;
};

inline CokernelAction cokernel_with_action(const Mat& G, const Mat& X) {
    const PrimePower pp = G.prime_power();
    const int N = pp.level;
    auto snf = smith_normal_form(G);
    std::vector<std::pair<int, std::size_t>> comps;  // (exponent, row index)
    for (std::size_t k = 0; k < G.rows(); ++k) {
        int v = k < snf.divisor_valuations.size() ? snf.divisor_valuations[k] : N;
        if (v > 0) comps.emplace_back(v, k);
    }
    std::stable_sort(comps.begin(), comps.end(), [](auto& a, auto& b) { return a.first > b.first; });
    CokernelAction out;
    const std::size_t n = comps.size();
    Mat LXL = snf.left * X * snf.left_inv;
    out.action = Mat(n, n, pp);
    for (std::size_t a = 0; a < n; ++a) {
        out.partition.push_back(comps[a].first);
        if (comps[a].first >= N) out.overflow = true;
        const Int ma = pp.power(comps[a].first);
        for (std::size_t b = 0; b < n; ++b) out.action(a, b) = LXL(comps[a].second, comps[b].second) % ma;
        Vec row(G.rows());
        for (std::size_t j = 0; j < G.rows(); ++j) row[j] = snf.left(comps[a].second, j);
        out.coordinate_rows.push_back(std::move(row));
        out.generators.push_back(snf.left_inv.column(comps[a].second));
    }
    return out;
}

/// Cokernel of P(F) with the action of F.
inline CokernelAction induced_action_on_cokernel(const Mat& F, const Poly& P) {
    return cokernel_with_action(poly_at(P.reduced(F.modulus()), F), F);
}

// ---------------------------------------------------------------------------
// Finite abelian ell-groups  A = (+)_i Z/ell^{exps[i]}  and their linear algebra.

struct AbGroup {
    Int ell = 2;
    std::vector<int> exps;

    std::size_t rank() const { return exps.size(); }
    int exponent() const { return exps.empty() ? 0 : *std::max_element(exps.begin(), exps.end()); }
    int order_exp() const {
        int s = 0;
        for (int e : exps) s += e;
        return s;
    }
    Int power(int k) const { return ipow(ell, k); }
    Vec reduce(Vec v) const {
        for (std::size_t i = 0; i < exps.size(); ++i) v[i] = clab::mod(v[i], power(exps[i]));
        return v;
    }
    bool is_zero(const Vec& v) const {
        for (std::size_t i = 0; i < exps.size(); ++i)
            if (clab::mod(v[i], power(exps[i])) != 0) return false;
        return true;
    }
};

/// Generators of ker(T: A -> B). T holds integer entries; row i is read mod ell^{B.exps[i]}.
inline std::vector<Vec> kernel_generators(const Mat& T, const AbGroup& A, const AbGroup& B) {
    const Int ell = A.ell;
    const std::size_t n = A.rank(), m = B.rank();
    if (n == 0) return {};
    int K = std::max({A.exponent(), B.exponent(), 1});
    PrimePower pp(ell, K);
    Mat S(std::max<std::size_t>(m, 1), n, pp);
    for (std::size_t i = 0; i < m; ++i) {
        const Int scale = pp.power(K - B.exps[i]);
        for (std::size_t j = 0; j < n; ++j) S(i, j) = mulmod(clab::mod(T(i, j), pp.modulus()), scale, pp.modulus());
    }
    auto snf = smith_normal_form(S);
    std::vector<Vec> gens;
    for (std::size_t k = 0; k < n; ++k) {
        int v = k < snf.divisor_valuations.size() ? snf.divisor_valuations[k] : K;
        if (k >= m) v = K;  // padded zero row when m == 0
        const Int mult = pp.power(K - std::min(v, K));
        Vec g = snf.right.column(k);
        for (auto& x : g) x = mulmod(x, mult, pp.modulus());
        g = A.reduce(std::move(g));
        if (!A.is_zero(g)) gens.push_back(std::move(g));
    }
    return gens;
}

/// A subgroup of A presented by an independent basis b_k of orders ell^{exps[k]}
/// (nonincreasing), with exact coordinate solving.
class Subgroup {
   public:
    Subgroup() = default;

    Subgroup(const AbGroup& ambient, const std::vector<Vec>& gens) : ambient_(ambient) {
        const Int ell = ambient.ell;
        const int K = std::max(ambient.exponent(), 1);
        const std::size_t s = gens.size(), n = ambient.rank();
        if (s > 0 && n > 0) {
            Mat G(n, s, PrimePower(ell, K));
            for (std::size_t j = 0; j < s; ++j) G.set_column(j, gens[j]);
            AbGroup free_dom{ell, std::vector<int>(s, K)};
            auto rels = kernel_generators(G, free_dom, ambient);
            PrimePower pp1(ell, K + 1);
            Mat Rel(s, rels.size() + s, pp1);
            for (std::size_t c = 0; c < rels.size(); ++c) Rel.set_column(c, rels[c]);
            for (std::size_t i = 0; i < s; ++i) Rel(i, rels.size() + i) = pp1.power(K);
            auto snf = smith_normal_form(Rel);
            std::vector<std::pair<int, Vec>> items;
            for (std::size_t k = 0; k < s; ++k) {
                int v = snf.divisor_valuations[k];
                if (v == 0) continue;
                Vec b(n, 0);
                for (std::size_t i = 0; i < s; ++i) {
                    const Int c = snf.left_inv(i, k);
                    if (c == 0) continue;
                    for (std::size_t t = 0; t < n; ++t) b[t] += c % pp1.modulus() * gens[i][t] % pp1.modulus();
                }
                items.emplace_back(v, ambient.reduce(std::move(b)));
            }
            std::stable_sort(items.begin(), items.end(), [](auto& a, auto& b) { return a.first > b.first; });
            for (auto& [v, b] : items) {
                exps_.push_back(v);
                basis_.push_back(std::move(b));
            }
        }
        prepare_solver();
    }

    const AbGroup& ambient() const { return ambient_; }
    const std::vector<Vec>& basis() const { return basis_; }
    const std::vector<int>& exps() const { return exps_; }
    int order_exp() const {
        int s = 0;
        for (int e : exps_) s += e;
        return s;
    }
    int index_exp() const { return ambient_.order_exp() - order_exp(); }

    /// Coordinates of v in the basis, or nullopt when v is not in the subgroup.
    std::optional<Vec> coords(const Vec& v) const {
        const std::size_t n = ambient_.rank(), nb = basis_.size();
        if (n == 0) return Vec{};
        const Int mo = solve_left_.modulus();
        Vec w = solve_left_ * v;
        Vec z(solve_right_.rows(), 0);
        for (std::size_t k = 0; k < n; ++k) {
            const int val = k < solve_vals_.size() ? solve_vals_[k] : solve_level_;
            if (val >= solve_level_) {
                if (w[k] != 0) return std::nullopt;
                continue;
            }
            const Int pv = ipow(ambient_.ell, val);
            if (w[k] % pv != 0) return std::nullopt;
            z[k] = w[k] / pv;
        }
        Vec y = solve_right_ * z;
        Vec c(nb);
        for (std::size_t i = 0; i < nb; ++i) c[i] = clab::mod(y[i], ipow(ambient_.ell, exps_[i]));
        (void)mo;
        return c;
    }

    bool contains(const Vec& v) const { return coords(v).has_value(); }

    Vec combine(const Vec& c) const {
        Vec out(ambient_.rank(), 0);
        for (std::size_t k = 0; k < basis_.size(); ++k) {
            const Int ck = clab::mod(c[k], ipow(ambient_.ell, exps_[k]));
            for (std::size_t t = 0; t < out.size(); ++t) {
                const Int mt = ambient_.power(ambient_.exps[t]);
                out[t] = (out[t] + mulmod(ck, basis_[k][t], mt)) % mt;
            }
        }
        return out;
    }

   private:
    void prepare_solver() {
        const std::size_t n = ambient_.rank(), nb = basis_.size();
        if (n == 0) return;
        solve_level_ = std::max(ambient_.exponent(), 1) + 1;
        PrimePower pp(ambient_.ell, solve_level_);
        Mat X(n, nb + n, pp);
        for (std::size_t k = 0; k < nb; ++k) X.set_column(k, basis_[k]);
        for (std::size_t i = 0; i < n; ++i) X(i, nb + i) = pp.power(ambient_.exps[i]);
        auto snf = smith_normal_form(X);
        solve_left_ = std::move(snf.left);
        solve_right_ = std::move(snf.right);
        solve_vals_ = std::move(snf.divisor_valuations);
    }

    AbGroup ambient_;
    std::vector<Vec> basis_;
    std::vector<int> exps_;
    Mat solve_left_, solve_right_;
    std::vector<int> solve_vals_;
    int solve_level_ = 1;
};

/// Rank over F_ell of the reduction mod ell of a matrix (entries as integers).
inline int rank_mod_ell(const Mat& T, Int ell) {
    std::vector<std::vector<Int>> a(T.rows(), std::vector<Int>(T.cols()));
    for (std::size_t i = 0; i < T.rows(); ++i)
        for (std::size_t j = 0; j < T.cols(); ++j) a[i][j] = T(i, j) % ell;
    int rank = 0;
    for (std::size_t col = 0; col < T.cols() && rank < static_cast<int>(T.rows()); ++col) {
        std::size_t piv = rank;
        while (piv < T.rows() && a[piv][col] == 0) ++piv;
        if (piv == T.rows()) continue;
        std::swap(a[piv], a[rank]);
        const Int inv = invmod(a[rank][col], ell);
        for (std::size_t i = 0; i < T.rows(); ++i) {
            if (i == static_cast<std::size_t>(rank) || a[i][col] == 0) continue;
            const Int f = a[i][col] * inv % ell;
            for (std::size_t j = col; j < T.cols(); ++j) a[i][j] = clab::mod(a[i][j] - f * a[rank][j], ell);
        }
        ++rank;
    }
    return rank;
}

// ---------------------------------------------------------------------------
// Random matrices.

inline Mat random_matrix(std::size_t rows, std::size_t cols, PrimePower pp, Stream& rng) {
    Mat m(rows, cols, pp);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.below(pp.modulus());
    return m;
}

inline Mat random_matrix(std::size_t n, PrimePower pp, Stream& rng) { return random_matrix(n, n, pp, rng); }

// ---------------------------------------------------------------------------
// Symplectic space of rank 2g, basis ordering e1, f1, e2, f2, ...

struct SymplecticSpace {
    int genus = 1;
    PrimePower pp;
    Int multiplier = 1;  // q, a unit mod ell^N

    SymplecticSpace(int g, PrimePower p, Int q) : genus(g), pp(p), multiplier(clab::mod(q, p.modulus())) {
        if (g < 1) throw Error(Errc::PreconditionViolated, "genus must be >= 1");
        if (p.ell == 2) throw Error(Errc::EllEven, "the symplectic model requires an odd prime");
        if (clab::mod(q, p.ell) == 0) throw Error(Errc::PreconditionViolated, "multiplier must be a unit");
    }

    std::size_t dim() const { return 2 * static_cast<std::size_t>(genus); }

    Mat J() const {
        Mat j(dim(), dim(), pp);
        for (int i = 0; i < genus; ++i) {
            j(2 * i, 2 * i + 1) = 1;
            j(2 * i + 1, 2 * i) = pp.modulus() - 1;
        }
        return j;
    }

    /// <x, y> = x^T J y.
    Int pair(const Vec& x, const Vec& y) const {
        const Int m = pp.modulus();
        Int s = 0;
        for (int i = 0; i < genus; ++i) s += x[2 * i] * y[2 * i + 1] % m - x[2 * i + 1] * y[2 * i] % m;
        return clab::mod(s, m);
    }

    /// sigma_q: fixes each e_i, multiplies each f_i by q.
    Mat sigma() const {
        Mat s = Mat::identity(dim(), pp);
        for (int i = 0; i < genus; ++i) s(2 * i + 1, 2 * i + 1) = multiplier;
        return s;
    }
};

namespace detail {

inline bool unimodular(const Vec& v, Int ell) {
    return std::any_of(v.begin(), v.end(), [ell](Int x) { return x % ell != 0; });
}

/// Projection onto the symplectic complement of the hyperbolic pairs (v_j, w_j).
inline void project_complement(const SymplecticSpace& sp, Vec& y, const std::vector<Vec>& vs, const std::vector<Vec>& ws) {
    const Int m = sp.pp.modulus();
    for (std::size_t j = 0; j < vs.size(); ++j) {
        const Int a = sp.pair(y, ws[j]);
        const Int b = sp.pair(y, vs[j]);
        if (a == 0 && b == 0) continue;
        for (std::size_t t = 0; t < y.size(); ++t) y[t] = clab::mod(y[t] - a * vs[j][t] % m + b * ws[j][t] % m, m);
    }
}

}  // namespace detail

/// Uniform element of Sp_{2g}(Z/ell^N): a uniformly random symplectic basis,
/// built one hyperbolic pair at a time inside the current complement.
inline Mat random_symplectic(const SymplecticSpace& sp, Stream& rng) {
    const std::size_t n = sp.dim();
    const Int m = sp.pp.modulus(), ell = sp.pp.ell;
    std::vector<Vec> vs, ws;
    auto uniform_vec = [&] {
        Vec x(n);
        for (auto& t : x) t = rng.below(m);
        return x;
    };
    for (int k = 0; k < sp.genus; ++k) {
        Vec v;
        do {
            v = uniform_vec();
            detail::project_complement(sp, v, vs, ws);
        } while (!detail::unimodular(v, ell));
        // <v, b_j> = (J^T v)_j; some coordinate is a unit because v is unimodular.
        Vec w0;
        for (std::size_t j = 0; j < n; ++j) {
            Vec b(n, 0);
            b[j] = 1;
            Int c = sp.pair(v, b);
            if (c % ell == 0) continue;
            detail::project_complement(sp, b, vs, ws);
            const Int ci = invmod(c, m);
            for (auto& t : b) t = mulmod(t, ci, m);
            w0 = std::move(b);
            break;
        }
        Vec y = uniform_vec();
        detail::project_complement(sp, y, vs, ws);
        const Int s = sp.pair(v, y);
        Vec w(n);
        for (std::size_t t = 0; t < n; ++t) w[t] = clab::mod(w0[t] + y[t] - s * w0[t] % m, m);
        vs.push_back(std::move(v));
        ws.push_back(std::move(w));
    }
    Mat S(n, n, sp.pp);
    for (int k = 0; k < sp.genus; ++k) {
        S.set_column(2 * k, vs[k]);
        S.set_column(2 * k + 1, ws[k]);
    }
    return S;
}

/// Uniform element of the coset GSp^{(q)}: F = sigma_q * S.
inline Mat gsp_coset_sample(const SymplecticSpace& sp, Stream& rng) { return sp.sigma() * random_symplectic(sp, rng); }

/// Visits every element of Sp_{2g}(Z/ell^N) exactly once.
inline void for_each_symplectic(const SymplecticSpace& sp, const std::function<void(const Mat&)>& visit) {
    const std::size_t n = sp.dim();
    const Int m = sp.pp.modulus(), ell = sp.pp.ell;
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
        total *= static_cast<std::size_t>(m);
        if (total > 50'000'000) throw Error(Errc::EnumerationTooLarge, "ambient module too large to enumerate Sp");
    }
    std::vector<Vec> all(total, Vec(n));
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t r = idx;
        for (std::size_t t = 0; t < n; ++t) {
            all[idx][t] = static_cast<Int>(r % m);
            r /= m;
        }
    }
    std::vector<Vec> vs, ws;
    Mat S(n, n, sp.pp);
    std::function<void(int)> rec = [&](int k) {
        if (k == sp.genus) {
            visit(S);
            return;
        }
        auto orth = [&](const Vec& x) {
            for (std::size_t j = 0; j < vs.size(); ++j)
                if (sp.pair(x, vs[j]) != 0 || sp.pair(x, ws[j]) != 0) return false;
            return true;
        };
        std::vector<const Vec*> comp;
        for (auto& x : all)
            if (orth(x)) comp.push_back(&x);
        for (const Vec* v : comp) {
            if (!detail::unimodular(*v, ell)) continue;
            for (const Vec* w : comp) {
                if (sp.pair(*v, *w) != 1) continue;
                vs.push_back(*v);
                ws.push_back(*w);
                S.set_column(2 * k, *v);
                S.set_column(2 * k + 1, *w);
                rec(k + 1);
                vs.pop_back();
                ws.pop_back();
            }
        }
    };
    rec(0);
}

}  // namespace clab
