#pragma once
// Finite R-modules (an abelian ell-group with an action of x), their
// decorations by a bivector, and the counting machinery on top of them.

#include "clab/matrixcore.hpp"

#include <map>
#include <memory>
#include <optional>

namespace clab {

using RingPtr = std::shared_ptr<const QuotientRing>;

inline RingPtr share_ring(QuotientRing R) { return std::make_shared<const QuotientRing>(std::move(R)); }

inline int group_level(const std::vector<int>& exps) {
    int k = 1;
    for (int e : exps) k = std::max(k, e);
    return k;
}

inline void reduce_rows(Mat& m, const std::vector<int>& row_exps, Int ell) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const Int mi = ipow(ell, row_exps[i]);
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) %= mi;
    }
}

/// Product of two homomorphism matrices (integer lifts), rows reduced to the target exponents.
inline Mat compose(const Mat& a, const Mat& b, const std::vector<int>& row_exps, int level) {
    Mat p = a.at_level(level) * b.at_level(level);
    reduce_rows(p, row_exps, a.prime_power().ell);
    return p;
}

struct FiniteModule {
    RingPtr ring;
    AbGroup group;
    Mat action;

    std::size_t rank() const { return group.rank(); }
    int order_exp() const { return group.order_exp(); }
    BigInt order() const { return boost::multiprecision::pow(BigInt(group.ell), order_exp()); }
    int exponent() const { return group.exponent(); }
    Int ell() const { return group.ell; }
    int level() const { return group_level(group.exps); }
    bool is_zero() const { return group.rank() == 0; }
};

inline FiniteModule zero_module(const RingPtr& R) {
    return FiniteModule{R, AbGroup{R->ell(), {}}, Mat(0, 0, PrimePower(R->ell(), 1))};
}

/// h(F) as an endomorphism of the module's group.
inline Mat eval_on_module(const Poly& h, const AbGroup& A, const Mat& F) {
    const int K = group_level(A.exps);
    Mat out = poly_at(h.reduced(ipow(A.ell, K)), F.at_level(K));
    reduce_rows(out, A.exps, A.ell);
    return out;
}

inline Mat eval_on_module(const Poly& h, const FiniteModule& M) { return eval_on_module(h, M.group, M.action); }

namespace detail {

inline bool action_well_defined(const AbGroup& A, const Mat& F) {
    for (std::size_t i = 0; i < A.rank(); ++i)
        for (std::size_t j = 0; j < A.rank(); ++j) {
            const int need = std::max(0, A.exps[i] - A.exps[j]);
            if (F(i, j) % A.power(need) != 0) return false;
        }
    return true;
}

inline FiniteModule build_unchecked(const RingPtr& R, std::vector<int> exps, const Mat& F) {
    const int K = group_level(exps);
    Mat act = F.at_level(K);
    AbGroup A{R->ell(), std::move(exps)};
    reduce_rows(act, A.exps, A.ell);
    return FiniteModule{R, std::move(A), std::move(act)};
}

}  // namespace detail

/// Validates and packages (partition, action). The partition must be
/// nonincreasing; the action is given row-major on the standard generators.
inline FiniteModule make_module(const RingPtr& R, const std::vector<int>& partition, const std::vector<Int>& action) {
    const std::size_t r = partition.size();
    if (action.size() != r * r) throw Error(Errc::PreconditionViolated, "action must have rank^2 entries");
    for (std::size_t i = 0; i < r; ++i) {
        if (partition[i] < 1) throw Error(Errc::PreconditionViolated, "partition parts must be positive");
        if (i > 0 && partition[i] > partition[i - 1]) throw Error(Errc::PreconditionViolated, "partition must be nonincreasing");
    }
    const int K = group_level(partition);
    if (K > R->level()) throw Error(Errc::PreconditionViolated, "module exponent exceeds the ring's working level");
    PrimePower pp(R->ell(), K);
    Mat F(r, r, pp, action);
    AbGroup A{R->ell(), partition};
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
            Int raw = mod(action[i * r + j], A.power(partition[i]));
            if (raw % A.power(std::max(0, partition[i] - partition[j])) != 0)
                throw Error(Errc::ActionNotWellDefined, "entry (" + std::to_string(i) + "," + std::to_string(j) + ") does not respect the element orders");
        }
    FiniteModule M = detail::build_unchecked(R, partition, F);
    for (const Poly& rel : R->relations())
        if (!eval_on_module(rel, M).is_zero()) throw Error(Errc::ActionNotAnnihilated, "a defining relation of the ring does not vanish on the action");
    if (R->kind == RingKind::Monogenic && rank_mod_ell(M.action, M.ell()) != static_cast<int>(r))
        throw Error(Errc::ActionNotInvertible, "action is not invertible");
    return M;
}

inline FiniteModule make_module(const RingPtr& R, const std::vector<int>& partition, const Mat& action) {
    return make_module(R, partition, action.entries());
}

// ---------------------------------------------------------------------------
// Submodules, quotients and direct sums.

struct SubmoduleResult {
    FiniteModule module;
    Subgroup subgroup;  // basis vectors are the inclusion's columns
};

/// R-submodule spanned (as a group) by gens; gens must already be F-stable as a set's span.
inline SubmoduleResult submodule(const FiniteModule& M, const std::vector<Vec>& gens) {
    Subgroup S(M.group, gens);
    const std::size_t k = S.basis().size();
    PrimePower pp(M.ell(), group_level(S.exps()));
    Mat act(k, k, pp);
    for (std::size_t c = 0; c < k; ++c) {
        Vec img = M.group.reduce(M.action.at_level(M.level()) * S.basis()[c]);
        auto co = S.coords(img);
        if (!co) throw Error(Errc::PreconditionViolated, "generated subgroup is not stable under the action");
        for (std::size_t r = 0; r < k; ++r) act(r, c) = (*co)[r];
    }
    return {detail::build_unchecked(M.ring, S.exps(), act), std::move(S)};
}

inline SubmoduleResult kernel_submodule(const FiniteModule& M, const Mat& E) {
    return submodule(M, kernel_generators(E.at_level(M.level()), M.group, M.group));
}

inline SubmoduleResult image_submodule(const FiniteModule& M, const Mat& E) {
    std::vector<Vec> cols;
    for (std::size_t j = 0; j < E.cols(); ++j) cols.push_back(M.group.reduce(E.column(j)));
    return submodule(M, cols);
}

struct QuotientResult {
    std::vector<int> partition;
    Mat action;
    std::vector<Vec> coordinate_rows;  // ambient vector -> quotient coordinates
};

/// (ambient group with endomorphism X) / span(gens), with the induced action.
inline QuotientResult quotient_with_action(const AbGroup& A, const Mat& X, const std::vector<Vec>& gens) {
    const std::size_t n = A.rank();
    QuotientResult out;
    if (n == 0) {
        out.action = Mat(0, 0, PrimePower(A.ell, 1));
        return out;
    }
    const int K = group_level(A.exps);
    PrimePower pp(A.ell, K + 1);
    Mat G(n, gens.size() + n, pp);
    for (std::size_t c = 0; c < gens.size(); ++c) G.set_column(c, gens[c]);
    for (std::size_t i = 0; i < n; ++i) G(i, gens.size() + i) = pp.power(A.exps[i]);
    auto snf = smith_normal_form(G);
    std::vector<std::pair<int, std::size_t>> comps;
    for (std::size_t k = 0; k < n; ++k)
        if (snf.divisor_valuations[k] > 0) comps.emplace_back(snf.divisor_valuations[k], k);
    std::stable_sort(comps.begin(), comps.end(), [](auto& a, auto& b) { return a.first > b.first; });
    Mat LXL = snf.left * X.at_level(K + 1) * snf.left_inv;
    out.action = Mat(comps.size(), comps.size(), PrimePower(A.ell, std::max(1, comps.empty() ? 1 : comps.front().first)));
    for (std::size_t a = 0; a < comps.size(); ++a) {
        out.partition.push_back(comps[a].first);
        const Int ma = ipow(A.ell, comps[a].first);
        for (std::size_t b = 0; b < comps.size(); ++b) out.action(a, b) = LXL(comps[a].second, comps[b].second) % ma;
        Vec row(n);
        for (std::size_t j = 0; j < n; ++j) row[j] = snf.left(comps[a].second, j);
        out.coordinate_rows.push_back(std::move(row));
    }
    return out;
}

inline FiniteModule quotient_module(const FiniteModule& M, const std::vector<Vec>& gens) {
    auto q = quotient_with_action(M.group, M.action, gens);
    return detail::build_unchecked(M.ring, q.partition, q.action);
}

/// Partition of A / span(gens).
inline std::vector<int> quotient_partition(const AbGroup& A, const std::vector<Vec>& gens) {
    Mat X = Mat::identity(A.rank(), PrimePower(A.ell, 1));
    return quotient_with_action(A, X, gens).partition;
}

inline FiniteModule direct_sum(const FiniteModule& a, const FiniteModule& b) {
    const std::size_t ra = a.rank(), rb = b.rank(), n = ra + rb;
    std::vector<std::pair<int, std::size_t>> order;
    for (std::size_t i = 0; i < ra; ++i) order.emplace_back(a.group.exps[i], i);
    for (std::size_t i = 0; i < rb; ++i) order.emplace_back(b.group.exps[i], ra + i);
    std::stable_sort(order.begin(), order.end(), [](auto& x, auto& y) { return x.first > y.first; });
    std::vector<int> exps;
    for (auto& o : order) exps.push_back(o.first);
    const int K = group_level(exps);
    Mat big(n, n, PrimePower(a.ell(), K));
    auto entry = [&](std::size_t i, std::size_t j) -> Int {
        if (i < ra && j < ra) return a.action(i, j);
        if (i >= ra && j >= ra) return b.action(i - ra, j - ra);
        return 0;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) big(i, j) = entry(order[i].second, order[j].second);
    return detail::build_unchecked(a.ring, exps, big);
}

// ---------------------------------------------------------------------------
// Local structure.

/// Components M_j = ker(lifted_j(F)), one per local factor of the ring.
inline std::vector<FiniteModule> crt_split(const FiniteModule& M) {
    const auto& factors = M.ring->local_factors;
    if (factors.size() <= 1) return {M};
    std::vector<FiniteModule> out;
    for (const auto& f : factors) out.push_back(kernel_submodule(M, eval_on_module(f.lifted, M)).module);
    return out;
}

/// M[h] = kernel of h(F), for any polynomial h with coefficients mod ell^N.
inline FiniteModule torsion_part(const FiniteModule& M, const Poly& h) {
    return kernel_submodule(M, eval_on_module(h, M)).module;
}

/// For each local factor of a maximal order, the partition describing the
/// component as a module over the corresponding discrete valuation ring.
inline std::vector<std::vector<int>> local_types(const FiniteModule& M) {
    const auto& R = *M.ring;
    if (!R.is_maximal_order()) throw Error(Errc::PreconditionViolated, "local types need a maximal order");
    auto comps = crt_split(M);
    std::vector<std::vector<int>> types;
    for (std::size_t j = 0; j < comps.size(); ++j) {
        const int d = R.local_factors[j].residue_degree();
        const auto& e = comps[j].group.exps;
        if (e.size() % d != 0) throw Error(Errc::PreconditionViolated, "component rank not divisible by residue degree");
        std::vector<int> lam;
        for (std::size_t i = 0; i < e.size(); i += d) lam.push_back(e[i]);
        types.push_back(std::move(lam));
    }
    return types;
}

/// Composition length of M, summed over local factors.
inline int module_length(const FiniteModule& M) {
    const auto& R = *M.ring;
    if (R.local_factors.size() == 1) return M.order_exp() / R.local_factors[0].residue_degree();
    auto comps = crt_split(M);
    int len = 0;
    for (std::size_t j = 0; j < comps.size(); ++j) len += comps[j].order_exp() / R.local_factors[j].residue_degree();
    return len;
}

inline Mat companion_matrix(const Poly& h, PrimePower pp) {
    const int d = h.degree();
    Mat C(d, d, pp);
    for (int k = 0; k + 1 < d; ++k) C(k + 1, k) = 1;
    for (int k = 0; k < d; ++k) C(k, d - 1) = mod(-h[k], pp.modulus());
    return C;
}

/// The standard module of type lambda over local factor j of a maximal order:
/// (+)_i (Z/ell^{lambda_i})[x]/(lifted_j).
inline FiniteModule standard_component(const RingPtr& R, std::size_t j, const std::vector<int>& lambda) {
    const auto& f = R->local_factors.at(j);
    const int d = f.lifted.degree();
    std::vector<int> lam = lambda;
    std::sort(lam.begin(), lam.end(), std::greater<>());
    std::vector<int> exps;
    for (int part : lam)
        for (int k = 0; k < d; ++k) exps.push_back(part);
    const int K = group_level(exps);
    if (K > R->level()) throw Error(Errc::PreconditionViolated, "module exponent exceeds the ring's working level");
    PrimePower pp(R->ell(), K);
    Mat C = companion_matrix(f.lifted.reduced(pp.modulus()), pp);
    Mat F(exps.size(), exps.size(), pp);
    for (std::size_t b = 0; b < lam.size(); ++b)
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) F(b * d + r, b * d + c) = C(r, c);
    return detail::build_unchecked(R, exps, F);
}

inline FiniteModule module_from_types(const RingPtr& R, const std::vector<std::vector<int>>& types) {
    FiniteModule M = zero_module(R);
    for (std::size_t j = 0; j < types.size(); ++j)
        if (!types[j].empty()) M = direct_sum(M, standard_component(R, j, types[j]));
    return M;
}

// ---------------------------------------------------------------------------
// Labels.

inline std::string partition_string(const std::vector<int>& p) {
    std::string s = "(";
    for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "," : "") + std::to_string(p[i]);
    return s + ")";
}

/// Canonical label over a maximal order, e.g. "x-1:(2,1)|x+1:(1)"; "0" for the zero module.
inline std::string canonical_label_from_types(const QuotientRing& R, const std::vector<std::vector<int>>& types) {
    std::string s;
    for (std::size_t j = 0; j < types.size(); ++j) {
        if (types[j].empty()) continue;
        if (!s.empty()) s += "|";
        s += R.local_factors[j].name() + ":" + partition_string(types[j]);
    }
    return s.empty() ? "0" : s;
}

inline std::string canonical_label(const FiniteModule& M) { return canonical_label_from_types(*M.ring, local_types(M)); }

inline std::vector<int> subgroup_partition(const AbGroup& A, const std::vector<Vec>& gens) { return Subgroup(A, gens).exps(); }

/// Isomorphism invariants that are cheap to compute; equal for isomorphic modules.
inline std::string fingerprint(const FiniteModule& M) {
    std::string s = "A" + partition_string(M.group.exps);
    const auto& R = *M.ring;
    for (const auto& f : R.local_factors) {
        Poly h(f.residue_poly.coeffs, ipow(M.ell(), M.level()));
        Mat E = eval_on_module(h, M);
        std::vector<Vec> cols;
        for (std::size_t c = 0; c < E.cols(); ++c) cols.push_back(E.column(c));
        s += "/" + f.name() + "K" + partition_string(subgroup_partition(M.group, kernel_generators(E, M.group, M.group)));
        s += "I" + partition_string(subgroup_partition(M.group, cols));
        if (R.local_factors.size() > 1) {
            Mat L = eval_on_module(f.lifted, M);
            s += "C" + partition_string(subgroup_partition(M.group, kernel_generators(L, M.group, M.group)));
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Hom groups.

/// Hom_R between two (group, action) pairs: matrices T with T F1 = F2 T,
/// presented by an independent basis so that every element is enumerated once.
class HomGroup {
   public:
    HomGroup(const AbGroup& A1, const Mat& F1, const AbGroup& A2, const Mat& F2) : src_(A1), dst_(A2) {
        ell_ = A1.ell;
        const std::size_t r1 = A1.rank(), r2 = A2.rank();
        std::vector<int> all = A1.exps;
        all.insert(all.end(), A2.exps.begin(), A2.exps.end());
        level_ = group_level(all);
        pp_ = PrimePower(ell_, level_);
        if (r1 == 0 || r2 == 0) return;
        AbGroup param{ell_, {}};
        std::vector<Int> scale(r1 * r2);
        for (std::size_t i = 0; i < r2; ++i)
            for (std::size_t j = 0; j < r1; ++j) {
                param.exps.push_back(std::min(A1.exps[j], A2.exps[i]));
                scale[i * r1 + j] = ipow(ell_, std::max(0, A2.exps[i] - A1.exps[j]));
            }
        const Mat f1 = F1.at_level(level_), f2 = F2.at_level(level_);
        const Int mo = pp_.modulus();
        const std::size_t P = r1 * r2;
        Mat phi(P, P, pp_);
        for (std::size_t i = 0; i < r2; ++i)
            for (std::size_t j = 0; j < r1; ++j) {
                const std::size_t k = i * r1 + j;
                const Int s = scale[k];
                // Phi(E_ij) = E_ij F1 - F2 E_ij, scaled by s.
                Mat D(r2, r1, pp_);
                for (std::size_t jj = 0; jj < r1; ++jj) D(i, jj) = (D(i, jj) + s * f1(j, jj)) % mo;
                for (std::size_t ii = 0; ii < r2; ++ii) D(ii, j) = mod(D(ii, j) - s * f2(ii, i) % mo, mo);
                for (std::size_t ii = 0; ii < r2; ++ii) {
                    const Int mi = ipow(ell_, A2.exps[ii]);
                    for (std::size_t jj = 0; jj < r1; ++jj) {
                        const std::size_t kk = ii * r1 + jj;
                        Int v = D(ii, jj) % mi;
                        if (v % scale[kk] != 0) throw Error(Errc::ActionNotWellDefined, "homomorphism equation left the lattice of well-defined maps");
                        phi(kk, k) = (v / scale[kk]) % ipow(ell_, param.exps[kk]);
                    }
                }
            }
        Subgroup ker(param, kernel_generators(phi, param, param));
        exps_ = ker.exps();
        for (const Vec& t : ker.basis()) {
            Mat T(r2, r1, pp_);
            for (std::size_t i = 0; i < r2; ++i)
                for (std::size_t j = 0; j < r1; ++j) T(i, j) = mulmod(t[i * r1 + j], scale[i * r1 + j], ipow(ell_, A2.exps[i]));
            basis_.push_back(std::move(T));
        }
    }

    HomGroup(const FiniteModule& M1, const FiniteModule& M2) : HomGroup(M1.group, M1.action, M2.group, M2.action) {}

    int order_exp() const {
        int s = 0;
        for (int e : exps_) s += e;
        return s;
    }
    BigInt order() const { return boost::multiprecision::pow(BigInt(ell_), order_exp()); }
    const std::vector<Mat>& basis() const { return basis_; }
    const std::vector<int>& basis_exps() const { return exps_; }
    const AbGroup& source() const { return src_; }
    const AbGroup& target() const { return dst_; }
    int level() const { return level_; }

    Mat zero() const { return Mat(dst_.rank(), src_.rank(), pp_); }

    Mat element(const Vec& coeffs) const {
        Mat T = zero();
        for (std::size_t k = 0; k < basis_.size(); ++k) add_scaled(T, basis_[k], coeffs[k]);
        return T;
    }

    Mat random_element(Stream& rng) const {
        Vec c(basis_.size());
        for (std::size_t k = 0; k < c.size(); ++k) c[k] = rng.below(ipow(ell_, exps_[k]));
        return element(c);
    }

    /// Visits every element; the visitor returns false to stop early.
    template <class Fn>
    void for_each(Fn&& visit) const {
        Mat T = zero();
        std::vector<Int> digit(basis_.size(), 0), radix(basis_.size());
        for (std::size_t k = 0; k < basis_.size(); ++k) radix[k] = ipow(ell_, exps_[k]);
        while (true) {
            if (!visit(static_cast<const Mat&>(T))) return;
            std::size_t k = 0;
            for (; k < basis_.size(); ++k) {
                add_scaled(T, basis_[k], 1);
                if (++digit[k] < radix[k]) break;
                digit[k] = 0;
            }
            if (k == basis_.size()) return;
        }
    }

   private:
    void add_scaled(Mat& T, const Mat& B, Int c) const {
        for (std::size_t i = 0; i < T.rows(); ++i) {
            const Int mi = ipow(ell_, dst_.exps[i]);
            for (std::size_t j = 0; j < T.cols(); ++j) T(i, j) = (T(i, j) + mulmod(c, B(i, j), mi)) % mi;
        }
    }

    AbGroup src_, dst_;
    Int ell_ = 2;
    int level_ = 1;
    PrimePower pp_;
    std::vector<Mat> basis_;
    std::vector<int> exps_;
};

inline HomGroup hom_group(const FiniteModule& M1, const FiniteModule& M2) { return HomGroup(M1, M2); }

/// T is onto iff its reduction mod ell is onto (Nakayama).
inline bool is_surjective(const Mat& T, const AbGroup& target, Int ell) {
    return rank_mod_ell(T, ell) == static_cast<int>(target.rank());
}

// ---------------------------------------------------------------------------
// Exterior squares.

struct WedgeBasis {
    AbGroup group;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

inline WedgeBasis wedge_basis(const AbGroup& A) {
    WedgeBasis w{AbGroup{A.ell, {}}, {}};
    for (std::size_t i = 0; i < A.rank(); ++i)
        for (std::size_t j = i + 1; j < A.rank(); ++j) {
            w.pairs.emplace_back(i, j);
            w.group.exps.push_back(std::min(A.exps[i], A.exps[j]));
        }
    return w;
}

/// Matrix of wedge^2 T : wedge^2 A -> wedge^2 B.
inline Mat wedge_map(const Mat& T, const AbGroup& A, const AbGroup& B) {
    auto wa = wedge_basis(A), wb = wedge_basis(B);
    std::vector<int> all = A.exps;
    all.insert(all.end(), B.exps.begin(), B.exps.end());
    PrimePower pp(A.ell, group_level(all));
    const Int mo = pp.modulus();
    Mat t = T.at_level(pp.level);
    Mat W(wb.pairs.size(), wa.pairs.size(), pp);
    for (std::size_t c = 0; c < wa.pairs.size(); ++c) {
        auto [i, j] = wa.pairs[c];
        for (std::size_t r = 0; r < wb.pairs.size(); ++r) {
            auto [k, l] = wb.pairs[r];
            Int v = mod(mulmod(t(k, i), t(l, j), mo) - mulmod(t(l, i), t(k, j), mo), mo);
            W(r, c) = v % ipow(A.ell, wb.group.exps[r]);
        }
    }
    return W;
}

/// Pushforward of a bivector along T (coordinates in the e_i ^ e_j basis, i < j).
inline Vec pushforward_form(const Mat& T, const AbGroup& A, const AbGroup& B, const Vec& omega) {
    auto wb = wedge_basis(B);
    if (wb.pairs.empty()) return {};
    auto wa = wedge_basis(A);
    std::vector<int> all = A.exps;
    all.insert(all.end(), B.exps.begin(), B.exps.end());
    const int K = group_level(all);
    const Int mo = ipow(A.ell, K);
    Mat t = T.at_level(K);
    Vec out(wb.pairs.size(), 0);
    for (std::size_t c = 0; c < wa.pairs.size(); ++c) {
        const Int w = mod(omega[c], mo);
        if (w == 0) continue;
        auto [i, j] = wa.pairs[c];
        for (std::size_t r = 0; r < wb.pairs.size(); ++r) {
            auto [k, l] = wb.pairs[r];
            Int v = mod(mulmod(t(k, i), t(l, j), mo) - mulmod(t(l, i), t(k, j), mo), mo);
            out[r] = (out[r] + mulmod(v, w, mo)) % mo;
        }
    }
    return wb.group.reduce(std::move(out));
}

/// u ^ v for two vectors of A.
inline Vec wedge_vectors(const Vec& u, const Vec& v, const AbGroup& A) {
    auto w = wedge_basis(A);
    const Int mo = ipow(A.ell, group_level(A.exps));
    Vec out(w.pairs.size());
    for (std::size_t r = 0; r < w.pairs.size(); ++r) {
        auto [k, l] = w.pairs[r];
        out[r] = mod(mulmod(u[k], v[l], mo) - mulmod(u[l], v[k], mo), mo);
    }
    return w.group.reduce(std::move(out));
}

struct WedgeData {
    AbGroup group;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    Mat action;
    Subgroup fixed;                 // kernel of (F_wedge - q)
    std::vector<Vec> fixed_points;  // enumerated when the wedge group is small
    bool enumerated = false;
};

inline WedgeData wedge_square(const FiniteModule& M, std::size_t enumerate_limit = 1'000'000) {
    auto wb = wedge_basis(M.group);
    WedgeData w;
    w.group = wb.group;
    w.pairs = wb.pairs;
    w.action = wedge_map(M.action, M.group, M.group);
    Mat shifted = w.action;
    const Int q = M.ring->frobenius_scalar;
    for (std::size_t i = 0; i < shifted.rows(); ++i) {
        const Int mi = ipow(M.ell(), w.group.exps[i]);
        shifted(i, i) = mod(shifted(i, i) - q, mi);
    }
    w.fixed = Subgroup(w.group, kernel_generators(shifted, w.group, w.group));
    if (boost::multiprecision::pow(BigInt(M.ell()), w.fixed.order_exp()) <= enumerate_limit) {
        w.enumerated = true;
        const auto& ex = w.fixed.exps();
        Vec c(ex.size(), 0);
        while (true) {
            w.fixed_points.push_back(w.fixed.combine(c));
            std::size_t k = 0;
            for (; k < c.size(); ++k) {
                if (++c[k] < ipow(M.ell(), ex[k])) break;
                c[k] = 0;
            }
            if (k == c.size()) break;
        }
    }
    return w;
}

struct DecoratedModule {
    FiniteModule module;
    Vec omega;
};

inline bool decoration_is_twisted(const FiniteModule& M, const Vec& omega) {
    auto wb = wedge_basis(M.group);
    Mat W = wedge_map(M.action, M.group, M.group);
    Vec lhs = W * wb.group.reduce(omega);
    const Int q = M.ring->frobenius_scalar;
    for (std::size_t r = 0; r < lhs.size(); ++r) {
        const Int mr = ipow(M.ell(), wb.group.exps[r]);
        if (mod(lhs[r] - mulmod(q % mr, mod(omega[r], mr), mr), mr) != 0) return false;
    }
    return true;
}

/// Rejects omega unless F_wedge(omega) = q omega.
inline DecoratedModule make_decorated(const FiniteModule& M, Vec omega) {
    auto wb = wedge_basis(M.group);
    if (omega.size() != wb.pairs.size()) throw Error(Errc::NotDecorated, "omega has the wrong number of coordinates");
    omega = wb.group.reduce(std::move(omega));
    if (!decoration_is_twisted(M, omega)) throw Error(Errc::NotDecorated, "omega is not scaled by q under the action");
    return DecoratedModule{M, std::move(omega)};
}

// ---------------------------------------------------------------------------
// Counting.

inline constexpr std::size_t kDefaultEnumerationLimit = 10'000'000;

namespace detail {

inline void check_budget(const HomGroup& H, std::size_t limit) {
    if (H.order() > limit)
        throw Error(Errc::EnumerationTooLarge, "Hom group of order " + H.order().str() + " exceeds the enumeration limit " + std::to_string(limit));
}

inline BigInt big_pow(Int b, long long e) { return boost::multiprecision::pow(BigInt(b), static_cast<unsigned>(e)); }

}  // namespace detail

inline BigInt surj_count_enumerated(const FiniteModule& M, const FiniteModule& M0, std::size_t limit = kDefaultEnumerationLimit) {
    HomGroup H(M, M0);
    detail::check_budget(H, limit);
    BigInt n = 0;
    H.for_each([&](const Mat& T) {
        if (is_surjective(T, M0.group, M.ell())) ++n;
        return true;
    });
    return n;
}

/// Surjections over a discrete valuation ring with residue size Q between modules of types a and b.
inline BigInt surj_count_dvr(const std::vector<int>& a, const std::vector<int>& b, Int Q) {
    long long hom_exp = 0;
    for (int x : a)
        for (int y : b) hom_exp += std::min(x, y);
    std::vector<int> c;
    for (int y : b) c.push_back(static_cast<int>(std::count_if(a.begin(), a.end(), [y](int x) { return x >= y; })));
    std::sort(c.begin(), c.end());
    long long csum = 0;
    for (int x : c) csum += x;
    BigInt out = detail::big_pow(Q, hom_exp - csum);
    for (std::size_t k = 0; k < c.size(); ++k) {
        BigInt term = detail::big_pow(Q, c[k]) - detail::big_pow(Q, static_cast<long long>(k));
        if (term <= 0) return 0;
        out *= term;
    }
    return out;
}

inline BigInt surj_count_from_types(const QuotientRing& R, const std::vector<std::vector<int>>& a, const std::vector<std::vector<int>>& b) {
    BigInt n = 1;
    for (std::size_t j = 0; j < R.local_factors.size(); ++j) n *= surj_count_dvr(a[j], b[j], R.local_factors[j].residue_size);
    return n;
}

inline BigInt surj_count_formula(const FiniteModule& M, const FiniteModule& M0) {
    return surj_count_from_types(*M.ring, local_types(M), local_types(M0));
}

/// Number of R-linear surjections M -> M0; closed form over maximal orders,
/// exhaustive over the Hom group otherwise.
inline BigInt surj_count(const FiniteModule& M, const FiniteModule& M0, std::size_t limit = kDefaultEnumerationLimit) {
    if (M0.is_zero()) return 1;
    if (M.ring->is_maximal_order()) return surj_count_formula(M, M0);
    return surj_count_enumerated(M, M0, limit);
}

/// Surjections carrying omega_M to omega_M0.
inline BigInt surj_count_decorated(const DecoratedModule& M, const DecoratedModule& M0, std::size_t limit = kDefaultEnumerationLimit) {
    HomGroup H(M.module, M0.module);
    detail::check_budget(H, limit);
    BigInt n = 0;
    const Int ell = M.module.ell();
    H.for_each([&](const Mat& T) {
        if (is_surjective(T, M0.module.group, ell) && pushforward_form(T, M.module.group, M0.module.group, M.omega) == M0.omega) ++n;
        return true;
    });
    return n;
}

/// |Aut| of a module of type lambda over a DVR with residue size Q.
inline BigInt aut_count_dvr(const std::vector<int>& lambda, Int Q) {
    if (lambda.empty()) return 1;
    const int top = *std::max_element(lambda.begin(), lambda.end());
    long long sq = 0;
    for (int i = 1; i <= top; ++i) {
        long long conj = std::count_if(lambda.begin(), lambda.end(), [i](int x) { return x >= i; });
        sq += conj * conj;
    }
    Rational r = Rational(detail::big_pow(Q, sq));
    for (int i = 1; i <= top; ++i) {
        const int mult = static_cast<int>(std::count(lambda.begin(), lambda.end(), i));
        for (int k = 1; k <= mult; ++k) r *= Rational(1) - Rational(BigInt(1), detail::big_pow(Q, k));
    }
    return boost::multiprecision::numerator(r);
}

inline BigInt aut_count_formula(const FiniteModule& M) {
    auto types = local_types(M);
    BigInt n = 1;
    for (std::size_t j = 0; j < types.size(); ++j) n *= aut_count_dvr(types[j], M.ring->local_factors[j].residue_size);
    return n;
}

inline BigInt aut_count_enumerated(const FiniteModule& M, std::size_t limit = kDefaultEnumerationLimit) {
    return surj_count_enumerated(M, M, limit);
}

inline BigInt aut_count(const FiniteModule& M, std::size_t limit = kDefaultEnumerationLimit) {
    if (M.ring->is_maximal_order()) return aut_count_formula(M);
    return aut_count_enumerated(M, limit);
}

// ---------------------------------------------------------------------------
// Isomorphism.

inline bool is_isomorphic(const FiniteModule& M1, const FiniteModule& M2, std::size_t limit = kDefaultEnumerationLimit, int random_tries = 64) {
    if (M1.group.exps != M2.group.exps) return false;
    if (M1.is_zero()) return true;
    if (M1.ring->is_maximal_order()) return local_types(M1) == local_types(M2);
    if (fingerprint(M1) != fingerprint(M2)) return false;
    HomGroup H(M1, M2);
    Stream rng(0x150, 0, 0x1505);
    for (int t = 0; t < random_tries; ++t)
        if (is_surjective(H.random_element(rng), M2.group, M1.ell())) return true;
    if (H.order() > limit) throw Error(Errc::Undetermined, "isomorphism undecided: invariants agree, random search failed, Hom too large");
    bool found = false;
    H.for_each([&](const Mat& T) {
        found = is_surjective(T, M2.group, M1.ell());
        return !found;
    });
    return found;
}

// ---------------------------------------------------------------------------
// The d_M invariant.

namespace detail {

/// The local ring of a factor, truncated mod ell^E, as an abelian group with
/// multiplication-by-x and the polynomial cutting out its maximal ideal.
struct LocalRingModel {
    AbGroup group;
    Mat x_mult;
    Poly max_ideal_poly;
    int residue_degree = 1;
};

inline QuotientRing ring_at_level(const QuotientRing& R, int level) {
    if (level <= R.level()) return R;
    if (R.kind == RingKind::Torsion) return make_torsion_ring(R.ell(), level);
    std::vector<Int> coeffs;
    const Int m = R.base.modulus();
    for (Int c : R.modulus_poly.coeffs) coeffs.push_back(c > m / 2 ? c - m : c);
    return build_ring(R.ell(), level, coeffs, R.frobenius_scalar);
}

inline LocalRingModel local_ring_model(const QuotientRing& R, std::size_t j, int E) {
    LocalRingModel L;
    PrimePower pp(R.ell(), E);
    if (R.kind == RingKind::Torsion) {
        L.group = AbGroup{R.ell(), {E, 1}};
        L.x_mult = Mat(2, 2, pp);
        L.x_mult(1, 0) = 1;
        L.max_ideal_poly = Poly({0, 1}, pp.modulus());
        return L;
    }
    QuotientRing RE = ring_at_level(R, E);
    const auto& f = RE.local_factors.at(j);
    const int D = f.lifted.degree();
    L.group = AbGroup{R.ell(), std::vector<int>(D, E)};
    L.x_mult = companion_matrix(f.lifted.reduced(pp.modulus()), pp);
    L.max_ideal_poly = Poly(f.residue_poly.coeffs, pp.modulus());
    L.residue_degree = f.residue_degree();
    return L;
}

/// Block-diagonal copy of a square matrix.
inline Mat block_diag(const Mat& B, std::size_t copies) {
    const std::size_t n = B.rows();
    Mat out(n * copies, n * copies, B.prime_power());
    for (std::size_t c = 0; c < copies; ++c)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) out(c * n + i, c * n + j) = B(i, j);
    return out;
}

inline AbGroup repeat_group(const AbGroup& g, std::size_t copies) {
    AbGroup out{g.ell, {}};
    for (std::size_t c = 0; c < copies; ++c) out.exps.insert(out.exps.end(), g.exps.begin(), g.exps.end());
    return out;
}

/// Generators of the maximal-ideal multiple m*S = ell*S + h(x)*S of a submodule.
inline std::vector<Vec> max_ideal_times(const std::vector<Vec>& gens, const AbGroup& A, const Mat& h_of_x) {
    std::vector<Vec> out;
    for (const Vec& g : gens) {
        Vec l = g;
        for (auto& v : l) v *= A.ell;
        out.push_back(A.reduce(std::move(l)));
        out.push_back(A.reduce(h_of_x.at_level(group_level(A.exps)) * g));
    }
    return out;
}

/// R-span of one element inside a module, as group generators.
inline std::vector<Vec> cyclic_span(const Vec& s, const AbGroup& A, const Mat& F, int steps) {
    std::vector<Vec> out{A.reduce(s)};
    Mat f = F.at_level(group_level(A.exps));
    for (int k = 1; k < steps; ++k) out.push_back(A.reduce(f * out.back()));
    return out;
}

}  // namespace detail

/// d_M per local factor: (minimal relations) - (minimal generators).
inline std::vector<int> d_invariants(const FiniteModule& M) {
    const auto& R = *M.ring;
    auto comps = crt_split(M);
    std::vector<int> out;
    for (std::size_t j = 0; j < comps.size(); ++j) {
        const FiniteModule& C = comps[j];
        if (C.is_zero()) {
            out.push_back(0);
            continue;
        }
        const int E = C.exponent() + 1;
        auto L = detail::local_ring_model(R, j, E);
        const int fdeg = L.residue_degree;
        const int span_steps = static_cast<int>(L.group.rank());
        Mat hC = eval_on_module(Poly(L.max_ideal_poly.coeffs, ipow(C.ell(), C.level())), C);
        std::vector<Vec> std_basis;
        for (std::size_t i = 0; i < C.rank(); ++i) {
            Vec e(C.rank(), 0);
            e[i] = 1;
            std_basis.push_back(e);
        }
        std::vector<Vec> span = detail::max_ideal_times(std_basis, C.group, hC);
        Subgroup mM(C.group, span);
        const int a = (C.order_exp() - mM.order_exp()) / fdeg;
        std::vector<Vec> chosen;
        for (const Vec& e : std_basis) {
            if (static_cast<int>(chosen.size()) == a) break;
            Subgroup cur(C.group, span);
            if (cur.contains(e)) continue;
            chosen.push_back(e);
            auto more = detail::cyclic_span(e, C.group, C.action, span_steps);
            span.insert(span.end(), more.begin(), more.end());
        }
        AbGroup free_group = detail::repeat_group(L.group, chosen.size());
        Mat phi(C.rank(), free_group.rank(), PrimePower(C.ell(), std::max(E, 1)));
        for (std::size_t s = 0; s < chosen.size(); ++s) {
            auto imgs = detail::cyclic_span(chosen[s], C.group, C.action, span_steps);
            if (R.kind == RingKind::Torsion) imgs.resize(2);
            for (std::size_t k = 0; k < imgs.size(); ++k) phi.set_column(s * L.group.rank() + k, imgs[k]);
        }
        auto kgens = kernel_generators(phi, free_group, C.group);
        Subgroup K(free_group, kgens);
        Mat x_free = detail::block_diag(L.x_mult, chosen.size());
        Mat h_free = eval_on_module(L.max_ideal_poly, free_group, x_free);
        Subgroup mK(free_group, detail::max_ideal_times(K.basis(), free_group, h_free));
        const int rel = (K.order_exp() - mK.order_exp()) / fdeg;
        out.push_back(rel - a);
    }
    return out;
}

inline int d_invariant(const FiniteModule& M) {
    int s = 0;
    for (int d : d_invariants(M)) s += d;
    return s;
}

inline bool in_support(const FiniteModule& M) {
    if (M.ring->is_maximal_order()) return true;
    auto d = d_invariants(M);
    return std::all_of(d.begin(), d.end(), [](int x) { return x == 0; });
}

// ---------------------------------------------------------------------------
// Enumeration of modules.

inline void for_each_partition(int n, int max_part, std::vector<int>& cur, const std::function<void(const std::vector<int>&)>& visit) {
    if (n == 0) {
        visit(cur);
        return;
    }
    for (int p = std::min(n, max_part); p >= 1; --p) {
        cur.push_back(p);
        for_each_partition(n - p, p, cur, visit);
        cur.pop_back();
    }
}

inline std::vector<std::vector<int>> partitions_of(int n) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    for_each_partition(n, n, cur, [&](const std::vector<int>& p) { out.push_back(p); });
    return out;
}

/// Groups modules into isomorphism classes: canonical labels over maximal
/// orders, otherwise a fingerprint plus "#k" certified by is_isomorphic.
class ModuleClassifier {
   public:
    explicit ModuleClassifier(std::size_t limit = kDefaultEnumerationLimit) : limit_(limit) {}

    std::string classify(const FiniteModule& M) {
        if (M.ring->is_maximal_order()) return canonical_label(M);
        if (M.is_zero()) return "0";
        std::string fp = fingerprint(M);
        auto& bucket = reps_[fp];
        for (std::size_t k = 0; k < bucket.size(); ++k)
            if (is_isomorphic(bucket[k], M, limit_)) return fp + "#" + std::to_string(k);
        bucket.push_back(M);
        return fp + "#" + std::to_string(bucket.size() - 1);
    }

    /// The stored representative for a label produced by classify (non-maximal rings only).
    std::optional<FiniteModule> representative(const std::string& label) const {
        auto pos = label.rfind('#');
        if (pos == std::string::npos) return std::nullopt;
        auto it = reps_.find(label.substr(0, pos));
        if (it == reps_.end()) return std::nullopt;
        std::size_t k = std::stoul(label.substr(pos + 1));
        if (k >= it->second.size()) return std::nullopt;
        return it->second[k];
    }

   private:
    std::size_t limit_;
    std::map<std::string, std::vector<FiniteModule>> reps_;
};

/// All isomorphism classes of modules with |M| <= ell^max_order_exp.
inline std::vector<FiniteModule> all_modules_up_to(const RingPtr& R, int max_order_exp, std::size_t limit = kDefaultEnumerationLimit) {
    std::vector<FiniteModule> out;
    if (R->is_maximal_order()) {
        const auto& fs = R->local_factors;
        std::vector<std::vector<int>> types(fs.size());
        std::function<void(std::size_t, int)> rec = [&](std::size_t j, int budget) {
            if (j == fs.size()) {
                out.push_back(module_from_types(R, types));
                return;
            }
            const int d = fs[j].residue_degree();
            for (int len = 0; len * d <= budget; ++len)
                for (auto& lam : partitions_of(len)) {
                    types[j] = lam;
                    rec(j + 1, budget - len * d);
                }
            types[j].clear();
        };
        rec(0, max_order_exp);
        std::stable_sort(out.begin(), out.end(), [](const FiniteModule& a, const FiniteModule& b) { return a.order_exp() < b.order_exp(); });
        return out;
    }
    ModuleClassifier classifier(limit);
    std::map<std::string, bool> seen;
    out.push_back(zero_module(R));
    std::size_t spent = 0;
    const Int ell = R->ell();
    for (int n = 1; n <= max_order_exp; ++n)
        for (const auto& part : partitions_of(n)) {
            if (group_level(part) > R->level()) continue;
            const std::size_t r = part.size();
            AbGroup A{ell, part};
            std::vector<Int> step(r * r), radix(r * r);
            BigInt total = 1;
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < r; ++j) {
                    step[i * r + j] = ipow(ell, std::max(0, part[i] - part[j]));
                    radix[i * r + j] = ipow(ell, std::min(part[i], part[j]));
                    total *= radix[i * r + j];
                }
            spent += static_cast<std::size_t>(total);
            if (total > limit || spent > limit)
                throw Error(Errc::EnumerationTooLarge, "module enumeration exceeds the limit at partition " + partition_string(part));
            std::vector<Int> digit(r * r, 0);
            Mat F(r, r, PrimePower(ell, group_level(part)));
            while (true) {
                for (std::size_t k = 0; k < r * r; ++k) F(k / r, k % r) = digit[k] * step[k];
                FiniteModule M{R, A, F};
                bool ok = true;
                for (const Poly& rel : R->relations())
                    if (!eval_on_module(rel, M).is_zero()) {
                        ok = false;
                        break;
                    }
                if (ok && R->kind == RingKind::Monogenic && rank_mod_ell(F, ell) != static_cast<int>(r)) ok = false;
                if (ok) {
                    std::string label = classifier.classify(M);
                    if (!seen[label]) {
                        seen[label] = true;
                        out.push_back(M);
                    }
                }
                std::size_t k = 0;
                for (; k < r * r; ++k) {
                    if (++digit[k] < radix[k]) break;
                    digit[k] = 0;
                }
                if (k == r * r) break;
            }
        }
    return out;
}

/// Isomorphism classes B admitting a surjection onto M with kernel of length s.
inline std::vector<FiniteModule> enlargements(const FiniteModule& M, int s, std::size_t limit = kDefaultEnumerationLimit) {
    const auto& R = *M.ring;
    const int target_len = module_length(M) + s;
    int max_deg = 1;
    for (const auto& f : R.local_factors) max_deg = std::max(max_deg, f.residue_degree());
    std::vector<FiniteModule> out;
    for (auto& B : all_modules_up_to(M.ring, target_len * max_deg, limit)) {
        if (module_length(B) != target_len) continue;
        if (M.is_zero() || surj_count(B, M, limit) > 0) out.push_back(std::move(B));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Label parsing and JSON.

/// Parses "0", "(2,1)" (single-factor rings), or "x-1:(2,1)|x+1:(1)".
inline FiniteModule module_from_label(const RingPtr& R, std::string_view text) {
    auto bad = [&](const std::string& why) { return Error(Errc::ConfigError, "module label \"" + std::string(text) + "\": " + why); };
    if (!R->is_maximal_order()) throw bad("labels name modules only over maximal orders; use the explicit form");
    std::vector<std::vector<int>> types(R->local_factors.size());
    if (text == "0") return zero_module(R);
    auto parse_parts = [&](std::string_view p) {
        if (p.size() < 2 || p.front() != '(' || p.back() != ')') throw bad("expected a parenthesized partition");
        std::vector<int> parts;
        std::string_view body = p.substr(1, p.size() - 2);
        std::size_t pos = 0;
        while (pos < body.size()) {
            std::size_t e = body.find(',', pos);
            if (e == std::string_view::npos) e = body.size();
            std::string num(body.substr(pos, e - pos));
            if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos) throw bad("bad partition entry '" + num + "'");
            parts.push_back(std::stoi(num));
            if (parts.back() < 1) throw bad("partition entries must be positive");
            pos = e + 1;
        }
        std::sort(parts.begin(), parts.end(), std::greater<>());
        return parts;
    };
    if (!text.empty() && text.front() == '(') {
        if (R->local_factors.size() != 1) throw bad("bare partitions need a ring with one local factor");
        types[0] = parse_parts(text);
        return module_from_types(R, types);
    }
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t e = text.find('|', pos);
        if (e == std::string_view::npos) e = text.size();
        std::string_view item = text.substr(pos, e - pos);
        std::size_t colon = item.find(':');
        if (colon == std::string_view::npos) throw bad("expected factor:(partition)");
        std::string name(item.substr(0, colon));
        std::size_t j = 0;
        while (j < R->local_factors.size() && R->local_factors[j].name() != name) ++j;
        if (j == R->local_factors.size()) throw bad("unknown local factor '" + name + "'");
        types[j] = parse_parts(item.substr(colon + 1));
        pos = e + 1;
    }
    return module_from_types(R, types);
}

inline nlohmann::json module_to_json(const FiniteModule& M) {
    return {{"ring", format_ring_spec(*M.ring)}, {"partition", M.group.exps}, {"action", to_json(M.action)}};
}

inline FiniteModule module_from_json(const nlohmann::json& j, RingPtr R = nullptr) {
    if (!R) R = share_ring(parse_ring_spec(j.at("ring").get<std::string>()));
    return make_module(R, j.at("partition").get<std::vector<int>>(), mat_from_json(j.at("action")).entries());
}

inline nlohmann::json decorated_to_json(const DecoratedModule& D) {
    auto j = module_to_json(D.module);
    j["omega"] = D.omega;
    return j;
}

inline DecoratedModule decorated_from_json(const nlohmann::json& j, RingPtr R = nullptr) {
    return make_decorated(module_from_json(j, std::move(R)), j.at("omega").get<Vec>());
}

/// A moment target: a module, optionally decorated. Text forms:
///   "<label>"                         e.g. "(1,1)" or "x-1:(1)|x+1:(1)"
///   "<label>@omega=c1,c2,..."         omega coordinates on the label's standard generators
///   "A=(2,1);F=a,b,c,d"               explicit partition and row-major action (any ring)
struct ModuleTarget {
    std::string text;
    FiniteModule module;
    std::optional<Vec> omega;

    DecoratedModule decorated() const { return DecoratedModule{module, *omega}; }
};

inline ModuleTarget parse_target(const RingPtr& R, const std::string& text) {
    auto bad = [&](const std::string& why) { return Error(Errc::ConfigError, "target \"" + text + "\": " + why); };
    auto parse_ints = [&](std::string_view s) {
        std::vector<Int> v;
        std::size_t pos = 0;
        while (pos <= s.size()) {
            std::size_t e = s.find(',', pos);
            if (e == std::string_view::npos) e = s.size();
            std::string num(s.substr(pos, e - pos));
            try {
                std::size_t used = 0;
                v.push_back(std::stoll(num, &used));
                if (used != num.size()) throw bad("bad integer '" + num + "'");
            } catch (const std::logic_error&) {
                throw bad("bad integer '" + num + "'");
            }
            pos = e + 1;
        }
        return v;
    };
    std::string body = text, omega_text;
    if (auto at = text.find("@omega="); at != std::string::npos) {
        body = text.substr(0, at);
        omega_text = text.substr(at + 7);
    }
    ModuleTarget t{text, zero_module(R), std::nullopt};
    if (body.rfind("A=", 0) == 0) {
        auto semi = body.find(";F=");
        if (semi == std::string::npos) throw bad("explicit form needs ';F='");
        std::string part = body.substr(2, semi - 2);
        if (part.size() < 2 || part.front() != '(' || part.back() != ')') throw bad("partition must be parenthesized");
        std::vector<int> parts;
        if (part.size() > 2)
            for (Int x : parse_ints(std::string_view(part).substr(1, part.size() - 2))) parts.push_back(static_cast<int>(x));
        std::vector<Int> act = parts.empty() ? std::vector<Int>{} : parse_ints(std::string_view(body).substr(semi + 3));
        t.module = make_module(R, parts, act);
    } else {
        t.module = module_from_label(R, body);
    }
    if (!omega_text.empty()) t.omega = make_decorated(t.module, parse_ints(omega_text)).omega;
    return t;
}

}  // namespace clab
