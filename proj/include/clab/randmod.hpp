#pragma once
// Random module models, exact small-case oracles, moment estimation and the
// deterministic block-parallel runner that drives them.

#include "clab/modcat.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace clab {

// ---------------------------------------------------------------------------
// Samples.

struct SampleOutcome {
    FiniteModule module;
    bool overflow = false;
    std::optional<Vec> omega;
};

namespace detail {

inline bool has_overflow(const std::vector<int>& partition, int level) {
    return std::any_of(partition.begin(), partition.end(), [level](int e) { return e >= level; });
}

/// Multiplication-by-x on R = (Z/ell^N)[x]/(P) in the basis 1, x, ..., x^{D-1}.
inline std::vector<Mat> power_basis_mults(const QuotientRing& R) {
    PrimePower pp = R.base;
    Mat C = companion_matrix(R.modulus_poly, pp);
    std::vector<Mat> pw{Mat::identity(C.rows(), pp)};
    for (int k = 1; k < R.degree(); ++k) pw.push_back(pw.back() * C);
    return pw;
}

/// Z-matrix of the R-linear map given by an (rows x cols) matrix of ring elements,
/// each drawn uniformly; entries live in blocks of size D.
inline Mat random_ring_matrix(const QuotientRing& R, const std::vector<Mat>& pw, std::size_t rows, std::size_t cols, Stream& rng) {
    const std::size_t D = static_cast<std::size_t>(R.degree());
    const PrimePower pp = R.base;
    const Int mo = pp.modulus();
    Mat G(rows * D, cols * D, pp);
    std::vector<Int> c(D);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            for (auto& x : c) x = rng.below(mo);
            for (std::size_t k = 0; k < D; ++k) {
                if (c[k] == 0) continue;
                for (std::size_t r = 0; r < D; ++r)
                    for (std::size_t s = 0; s < D; ++s) G(i * D + r, j * D + s) = (G(i * D + r, j * D + s) + c[k] * pw[k](r, s)) % mo;
            }
        }
    return G;
}

inline Mat x_action_free(const QuotientRing& R, std::size_t copies) {
    return block_diag(companion_matrix(R.modulus_poly, R.base), copies);
}

inline SampleOutcome from_cokernel(const RingPtr& R, const CokernelAction& ca) {
    SampleOutcome s{detail::build_unchecked(R, ca.partition, ca.action), ca.overflow, std::nullopt};
    return s;
}

/// Cokernel of an (rows x cols) random matrix over the torsion ring Z_p[x]/(px, x^2).
inline SampleOutcome torsion_ring_cokernel(const RingPtr& R, std::size_t rows, std::size_t cols, Stream& rng) {
    const Int p = R->ell(), mo = R->base.modulus();
    const int N = R->level();
    AbGroup A{p, {}};
    for (std::size_t i = 0; i < rows; ++i) {
        A.exps.push_back(N);
        A.exps.push_back(1);
    }
    Mat X(2 * rows, 2 * rows, R->base);
    for (std::size_t i = 0; i < rows; ++i) X(2 * i + 1, 2 * i) = 1;
    std::vector<Vec> gens;
    for (std::size_t j = 0; j < cols; ++j) {
        Vec col(2 * rows, 0), colx(2 * rows, 0);
        for (std::size_t i = 0; i < rows; ++i) {
            const Int a = rng.below(mo), b = rng.below(p);
            col[2 * i] = a;
            col[2 * i + 1] = b;
            colx[2 * i + 1] = a % p;
        }
        gens.push_back(std::move(col));
        gens.push_back(std::move(colx));
    }
    auto q = quotient_with_action(A, X, gens);
    SampleOutcome s{detail::build_unchecked(R, q.partition, q.action), has_overflow(q.partition, N), std::nullopt};
    return s;
}

}  // namespace detail

/// Cokernel of a Haar-random (Ndim x (Ndim + d)) matrix over R, with F = x.
inline SampleOutcome sample_rectangular(const RingPtr& R, std::size_t ndim, std::size_t d, Stream& rng) {
    if (R->kind == RingKind::Torsion) return detail::torsion_ring_cokernel(R, ndim, ndim + d, rng);
    const QuotientRing& ring = *R;
    if (ring.degree() == 1) {
        Mat G = random_matrix(ndim, ndim + d, ring.base, rng);
        auto shape = cokernel_structure(G);
        const Int a = mod(-ring.modulus_poly[0], ring.base.modulus());
        Mat act(shape.partition.size(), shape.partition.size(), PrimePower(ring.ell(), group_level(shape.partition)));
        for (std::size_t i = 0; i < act.rows(); ++i) act(i, i) = a;
        return SampleOutcome{detail::build_unchecked(R, shape.partition, act), shape.overflow, std::nullopt};
    }
    auto pw = detail::power_basis_mults(ring);
    Mat G = detail::random_ring_matrix(ring, pw, ndim, ndim + d, rng);
    return detail::from_cokernel(R, cokernel_with_action(G, detail::x_action_free(ring, ndim)));
}

inline SampleOutcome sample_linear(const RingPtr& R, std::size_t ndim, Stream& rng) { return sample_rectangular(R, ndim, 0, rng); }

/// Coker P(A) for a uniform A in End((Z/ell^N)^d), with F acting as A.
inline SampleOutcome sample_matrix_model(const RingPtr& R, std::size_t d, Stream& rng, Mat* drawn = nullptr) {
    if (R->kind != RingKind::Monogenic) throw Error(Errc::PreconditionViolated, "the matrix model needs a monogenic ring");
    Mat A = random_matrix(d, R->base, rng);
    if (drawn) *drawn = A;
    return detail::from_cokernel(R, induced_action_on_cokernel(A, R->modulus_poly));
}

/// R^d / (x - A) as an R-module, the other side of the matrix-model identity.
inline SampleOutcome module_from_matrix_presentation(const RingPtr& R, const Mat& A) {
    const std::size_t d = A.rows(), D = static_cast<std::size_t>(R->degree());
    const Int mo = R->base.modulus();
    Mat X = detail::x_action_free(*R, d);
    Mat G = X;  // column (j, k) is x * x^k e_j - A (x^k e_j)
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < D; ++k)
            for (std::size_t i = 0; i < d; ++i) G(i * D + k, j * D + k) = mod(G(i * D + k, j * D + k) - A(i, j), mo);
    return detail::from_cokernel(R, cokernel_with_action(G, X));
}

/// Coker P(F) for F uniform on the GSp^(q) coset, decorated by the image of
/// the standard bivector.
inline SampleOutcome sample_symplectic(const RingPtr& R, const SymplecticSpace& sp, Stream& rng) {
    if (R->kind != RingKind::Monogenic) throw Error(Errc::PreconditionViolated, "the symplectic model needs a monogenic ring");
    Mat F = gsp_coset_sample(sp, rng);
    auto ca = induced_action_on_cokernel(F, R->modulus_poly);
    SampleOutcome s = detail::from_cokernel(R, ca);
    const AbGroup& B = s.module.group;
    const std::size_t r = B.rank();
    Vec omega(wedge_basis(B).pairs.size(), 0);
    if (r >= 2) {
        for (int i = 0; i < sp.genus; ++i) {
            Vec u(r), v(r);
            for (std::size_t a = 0; a < r; ++a) {
                u[a] = ca.coordinate_rows[a][2 * i];
                v[a] = ca.coordinate_rows[a][2 * i + 1];
            }
            Vec w = wedge_vectors(B.reduce(u), B.reduce(v), B);
            for (std::size_t t = 0; t < w.size(); ++t) omega[t] += w[t];
        }
        omega = wedge_basis(B).group.reduce(std::move(omega));
    }
    if (!decoration_is_twisted(s.module, omega)) throw Error(Errc::NotDecorated, "sampled bivector is not scaled by q");
    s.omega = std::move(omega);
    return s;
}

// ---------------------------------------------------------------------------
// Predictions and exact values.

/// Minimal number of generators of each local component, dim M_j / m M_j.
inline std::vector<int> generator_counts(const FiniteModule& M) {
    const auto& R = *M.ring;
    if (R.is_maximal_order()) {
        std::vector<int> out;
        for (auto& t : local_types(M)) out.push_back(static_cast<int>(t.size()));
        return out;
    }
    auto comps = crt_split(M);
    std::vector<int> out;
    for (std::size_t j = 0; j < comps.size(); ++j) {
        const FiniteModule& C = comps[j];
        if (C.is_zero()) {
            out.push_back(0);
            continue;
        }
        Poly h = R.kind == RingKind::Torsion ? Poly({0, 1}, ipow(C.ell(), C.level())) : Poly(R.local_factors[j].residue_poly.coeffs, ipow(C.ell(), C.level()));
        Mat hC = eval_on_module(h, C);
        std::vector<Vec> gens;
        for (std::size_t i = 0; i < C.rank(); ++i) {
            Vec e(C.rank(), 0);
            e[i] = 1;
            gens.push_back(e);
        }
        Subgroup mM(C.group, detail::max_ideal_times(gens, C.group, hC));
        out.push_back((C.order_exp() - mM.order_exp()) / R.local_factors[j].residue_degree());
    }
    return out;
}

inline double predicted_mass(const FiniteModule& M) {
    if (!in_support(M)) return 0.0;
    return c_R_for_ring(*M.ring) / aut_count(M).convert_to<double>();
}

/// E #Surj(Coker, M0) for the rectangular model with d extra columns:
/// #Surj(R^Ndim, M0) / |M0|^{Ndim + d}; d = 0 is the linear model.
inline Rational exact_moment_finite_N(const QuotientRing& R, int ndim, const FiniteModule& M0, int d = 0) {
    if (M0.is_zero()) return 1;
    auto r = generator_counts(M0);
    Rational val = 1;
    for (std::size_t j = 0; j < r.size(); ++j) {
        const Int Q = R.local_factors[j].residue_size;
        for (int i = 0; i < r[j]; ++i) val *= Rational(1) - rational_pow(Rational(Q), i - ndim);
    }
    if (d > 0) val /= rational_pow(Rational(M0.order()), d);
    return val;
}

// ---------------------------------------------------------------------------
// Distributions, moments and the block runner.

struct EmpiricalDistribution {
    std::string ring;
    std::string model;
    std::map<std::string, std::uint64_t> bins;
    std::uint64_t overflow_count = 0;
    std::uint64_t total = 0;
    std::uint64_t seed = 0;

    void merge(const EmpiricalDistribution& o) {
        for (auto& [k, v] : o.bins) bins[k] += v;
        overflow_count += o.overflow_count;
        total += o.total;
    }
    double mass(const std::string& label) const {
        auto it = bins.find(label);
        return total == 0 || it == bins.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
    }
    double mass_stderr(const std::string& label) const {
        if (total == 0) return 0.0;
        const double p = mass(label);
        return std::sqrt(p * (1 - p) / static_cast<double>(total));
    }
    double overflow_rate() const { return total == 0 ? 0.0 : static_cast<double>(overflow_count) / static_cast<double>(total); }
};

struct MomentAccumulator {
    BigInt sum = 0, sum_sq = 0;
    std::uint64_t n = 0, overflow_included = 0;

    void add(const BigInt& x, bool overflow) {
        sum += x;
        sum_sq += x * x;
        ++n;
        if (overflow) ++overflow_included;
    }
    void merge(const MomentAccumulator& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        n += o.n;
        overflow_included += o.overflow_included;
    }
};

struct MomentReport {
    std::string target;
    bool decorated = false;
    double estimate = 0, stderr_ = 0;
    std::optional<Rational> exact;
    std::uint64_t trials = 0, overflow_included = 0;

    bool within(double sigmas) const {
        if (!exact) return true;
        const double diff = std::abs(estimate - to_double(*exact));
        return diff <= sigmas * stderr_ + 1e-12;
    }
};

inline MomentReport summarize_moment(const std::string& target, bool decorated, const MomentAccumulator& acc) {
    MomentReport r;
    r.target = target;
    r.decorated = decorated;
    r.trials = acc.n;
    r.overflow_included = acc.overflow_included;
    if (acc.n == 0) return r;
    Rational mean(acc.sum, BigInt(acc.n));
    Rational var = Rational(acc.sum_sq, BigInt(acc.n)) - mean * mean;
    r.estimate = to_double(mean);
    const double v = std::max(0.0, to_double(var));
    r.stderr_ = acc.n > 1 ? std::sqrt(v * static_cast<double>(acc.n) / static_cast<double>(acc.n - 1) / static_cast<double>(acc.n)) : 0.0;
    return r;
}

inline constexpr std::uint64_t kBlockSize = 1024;

/// Runs fn(block_index) for every block on a fixed pool and returns the
/// results in block order, so merges never depend on the worker count.
template <class Result, class Fn>
std::vector<Result> run_blocks(std::uint64_t blocks, unsigned workers, Fn&& fn) {
    std::vector<Result> out(blocks);
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::uint64_t>(blocks, 1))));
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (true) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= blocks) return;
            try {
                out[b] = fn(b);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = blocks;
                return;
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

using Sampler = std::function<SampleOutcome(Stream&)>;

struct RunOptions {
    std::uint64_t trials = 1000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::uint64_t salt = 0;  // distinguishes independent runs under one seed
    std::size_t enumeration_limit = kDefaultEnumerationLimit;
};

struct RunResult {
    EmpiricalDistribution dist;
    std::vector<MomentAccumulator> moments;  // one per target, in order
    std::map<std::string, FiniteModule> representatives;
};

namespace detail {

struct BlockResult {
    std::map<std::string, std::uint64_t> counts;
    std::map<std::string, FiniteModule> reps;
    std::uint64_t overflow = 0, total = 0;
    std::vector<MomentAccumulator> moments;
};

}  // namespace detail

/// Draws `trials` samples in blocks of kBlockSize; block b uses the stream
/// (seed, b, salt). Overflow samples go to the overflow bin, and still count
/// towards moments: a target killed by ell^N sees the truncated cokernel exactly.
inline RunResult run_sampler(const RingPtr& R, const Sampler& sampler, const std::vector<ModuleTarget>& targets, const RunOptions& opt, const std::string& model) {
    const std::uint64_t blocks = (opt.trials + kBlockSize - 1) / kBlockSize;
    const bool canonical = R->is_maximal_order();
    for (const auto& t : targets)
        if (t.module.exponent() > R->level()) throw Error(Errc::PreconditionViolated, "target exponent exceeds the working level");
    auto results = run_blocks<detail::BlockResult>(blocks, opt.workers, [&](std::uint64_t b) {
        detail::BlockResult br;
        br.moments.resize(targets.size());
        Stream rng(opt.seed, b, opt.salt);
        ModuleClassifier local(opt.enumeration_limit);
        std::map<std::string, std::vector<BigInt>> surj_cache;
        const std::uint64_t begin = b * kBlockSize, end = std::min(opt.trials, begin + kBlockSize);
        for (std::uint64_t t = begin; t < end; ++t) {
            SampleOutcome s = sampler(rng);
            ++br.total;
            std::string label;
            if (s.overflow) {
                ++br.overflow;
            } else {
                label = local.classify(s.module);
                ++br.counts[label];
                if (!br.reps.count(label)) br.reps.emplace(label, s.module);
            }
            if (targets.empty()) continue;
            std::vector<BigInt>* cached = nullptr;
            if (canonical) {
                const std::string key = s.overflow ? canonical_label(s.module) : label;
                auto it = surj_cache.find(key);
                if (it == surj_cache.end()) {
                    std::vector<BigInt> v;
                    for (const auto& tg : targets) v.push_back(tg.omega ? BigInt(-1) : surj_count(s.module, tg.module, opt.enumeration_limit));
                    it = surj_cache.emplace(key, std::move(v)).first;
                }
                cached = &it->second;
            }
            for (std::size_t k = 0; k < targets.size(); ++k) {
                const auto& tg = targets[k];
                BigInt c;
                if (tg.omega) {
                    if (!s.omega) throw Error(Errc::PreconditionViolated, "decorated target needs a decorated model");
                    c = surj_count_decorated(DecoratedModule{s.module, *s.omega}, tg.decorated(), opt.enumeration_limit);
                } else {
                    c = cached ? (*cached)[k] : surj_count(s.module, tg.module, opt.enumeration_limit);
                }
                br.moments[k].add(c, s.overflow);
            }
        }
        return br;
    });
    RunResult out;
    out.dist.ring = format_ring_spec(*R);
    out.dist.model = model;
    out.dist.seed = opt.seed;
    out.moments.resize(targets.size());
    ModuleClassifier global(opt.enumeration_limit);
    for (auto& br : results) {
        for (auto& [label, count] : br.counts) {
            std::string g = canonical ? label : global.classify(br.reps.at(label));
            out.dist.bins[g] += count;
            if (!out.representatives.count(g)) out.representatives.emplace(g, br.reps.at(label));
        }
        out.dist.overflow_count += br.overflow;
        out.dist.total += br.total;
        for (std::size_t k = 0; k < targets.size(); ++k) out.moments[k].merge(br.moments[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exact enumeration oracles.

struct ExactDistribution {
    std::map<std::string, BigInt> bins;
    BigInt overflow = 0, total = 0;

    Rational mass(const std::string& label) const {
        auto it = bins.find(label);
        return it == bins.end() ? Rational(0) : Rational(it->second, total);
    }
};

/// Exact pushforward of Haar measure on End_R(R^Ndim) at the ring's working level.
inline ExactDistribution enumerate_exact(const RingPtr& R, std::size_t ndim, std::size_t limit = kDefaultEnumerationLimit) {
    ExactDistribution out;
    ModuleClassifier classifier(limit);
    if (ndim == 0) {
        out.bins["0"] = 1;
        out.total = 1;
        return out;
    }
    if (R->kind != RingKind::Monogenic) throw Error(Errc::PreconditionViolated, "exact enumeration needs a monogenic ring");
    const std::size_t D = static_cast<std::size_t>(R->degree()), slots = ndim * ndim * D;
    const Int mo = R->base.modulus();
    BigInt count = boost::multiprecision::pow(BigInt(mo), static_cast<unsigned>(slots));
    if (count > limit) throw Error(Errc::EnumerationTooLarge, "End_R(R^Ndim) has " + count.str() + " elements");
    auto pw = detail::power_basis_mults(*R);
    Mat X = detail::x_action_free(*R, ndim);
    std::vector<Int> digit(slots, 0);
    while (true) {
        Mat G(ndim * D, ndim * D, R->base);
        for (std::size_t i = 0; i < ndim; ++i)
            for (std::size_t j = 0; j < ndim; ++j)
                for (std::size_t k = 0; k < D; ++k) {
                    const Int c = digit[(i * ndim + j) * D + k];
                    if (c == 0) continue;
                    for (std::size_t r = 0; r < D; ++r)
                        for (std::size_t s = 0; s < D; ++s) G(i * D + r, j * D + s) = (G(i * D + r, j * D + s) + c * pw[k](r, s)) % mo;
                }
        auto ca = cokernel_with_action(G, X);
        ++out.total;
        if (ca.overflow)
            ++out.overflow;
        else
            ++out.bins[classifier.classify(detail::build_unchecked(R, ca.partition, ca.action))];
        std::size_t k = 0;
        for (; k < slots; ++k) {
            if (++digit[k] < mo) break;
            digit[k] = 0;
        }
        if (k == slots) break;
    }
    return out;
}

struct GspExactResult {
    Rational moment;
    BigInt coset_size = 0;
    BigInt weighted_count = 0;
};

/// Exact E #{T : T F = F_H T, T omega = omega_H, T onto} over the whole coset
/// GSp^(q)_{2g}(Z/ell^n), n = exponent of H.
inline GspExactResult enumerate_gsp_exact(const RingPtr& R, int genus, const DecoratedModule& H, std::size_t limit = 100'000'000) {
    const int n = std::max(1, H.module.exponent());
    SymplecticSpace sp(genus, PrimePower(R->ell(), n), R->frobenius_scalar);
    const std::size_t dim = sp.dim();
    AbGroup free{R->ell(), std::vector<int>(dim, n)};
    Vec omega_std(wedge_basis(free).pairs.size(), 0);
    {
        auto wb = wedge_basis(free);
        for (std::size_t k = 0; k < wb.pairs.size(); ++k) {
            auto [i, j] = wb.pairs[k];
            if (i % 2 == 0 && j == i + 1) omega_std[k] = 1;
        }
    }
    const Mat sigma = sp.sigma();
    GspExactResult res;
    std::size_t visited_homs = 0;
    for_each_symplectic(sp, [&](const Mat& S) {
        Mat F = sigma * S;
        HomGroup Hm(free, F, H.module.group, H.module.action);
        visited_homs += static_cast<std::size_t>(Hm.order());
        if (visited_homs > limit) throw Error(Errc::EnumerationTooLarge, "coset enumeration exceeded the Hom budget");
        Hm.for_each([&](const Mat& T) {
            if (is_surjective(T, H.module.group, R->ell()) && pushforward_form(T, free, H.module.group, omega_std) == H.omega) ++res.weighted_count;
            return true;
        });
        ++res.coset_size;
    });
    res.moment = Rational(res.weighted_count, res.coset_size);
    return res;
}

// ---------------------------------------------------------------------------
// Identities.

struct RectIdentityRow {
    std::string label;
    double empirical = 0, predicted = 0, stderr_ = 0;
    int d_M = 0;
};

struct RectIdentityReport {
    std::string reading = "i=j";
    int d = 0;
    std::size_t ndim = 0;
    std::vector<RectIdentityRow> rows;
    double partial_sum = 0;  // sum over enumerated modules of the identity's left side
    double target = 0;       // 1 / c_R
    double max_z = 0;
    double overflow_rate = 0;
};

/// Predicted mass under the i = j reading:
/// c_R * prod_{j=1}^{d-d_M} (1 - Q^{-j})^{-1} / (|M|^d |Aut M|), zero when d_M > d.
inline double rect_predicted_mass(const FiniteModule& M, int d) {
    const auto& R = *M.ring;
    if (R.local_factors.size() != 1) throw Error(Errc::PreconditionViolated, "the rectangular identity needs a local ring");
    const int dM = d_invariant(M);
    if (dM > d) return 0.0;
    const double Q = static_cast<double>(R.local_factors[0].residue_size);
    double w = 1.0;
    for (int j = 1; j <= d - dM; ++j) w /= (1.0 - std::pow(Q, -j));
    const double size = M.order().convert_to<double>();
    return c_R_for_ring(R) * w / (std::pow(size, d) * aut_count(M).convert_to<double>());
}

inline RectIdentityReport verify_rect_identity(const RingPtr& R, int d, std::size_t ndim, const RunOptions& opt, int enumerate_order_exp = 4) {
    if (R->local_factors.size() != 1) throw Error(Errc::PreconditionViolated, "the rectangular identity needs a local ring");
    RectIdentityReport rep;
    rep.d = d;
    rep.ndim = ndim;
    auto run = run_sampler(R, [&](Stream& rng) { return sample_rectangular(R, ndim, static_cast<std::size_t>(d), rng); }, {}, opt, "rect");
    rep.overflow_rate = run.dist.overflow_rate();
    ModuleClassifier cls(opt.enumeration_limit);
    for (const auto& M : all_modules_up_to(R, enumerate_order_exp, opt.enumeration_limit)) {
        RectIdentityRow row;
        row.label = cls.classify(M);
        if (!R->is_maximal_order()) {
            for (auto& [lab, rep_mod] : run.representatives)
                if (is_isomorphic(rep_mod, M, opt.enumeration_limit)) row.label = lab;
        }
        row.d_M = d_invariant(M);
        row.predicted = rect_predicted_mass(M, d);
        row.empirical = run.dist.mass(row.label);
        row.stderr_ = run.dist.mass_stderr(row.label);
        rep.partial_sum += row.predicted / c_R_for_ring(*R);
        const double sd = std::max(row.stderr_, 1.0 / static_cast<double>(std::max<std::uint64_t>(run.dist.total, 1)));
        rep.max_z = std::max(rep.max_z, std::abs(row.empirical - row.predicted) / sd);
        rep.rows.push_back(row);
    }
    rep.target = 1.0 / c_R_for_ring(*R);
    return rep;
}

struct TorsionIdentityClass {
    FiniteModule module;
    std::string description;
    BigInt aut = 0;
};

struct TorsionIdentityReport {
    Int p = 3;
    std::vector<int> A;
    int order_bound_exp = 0;
    std::vector<TorsionIdentityClass> classes;
    Rational sum = 0, target = 0;
};

inline std::string describe_module(const FiniteModule& M) {
    std::string s = "A=" + partition_string(M.group.exps) + ";F=";
    for (std::size_t i = 0; i < M.action.entries().size(); ++i) s += (i ? "," : "") + std::to_string(M.action.entries()[i]);
    return s;
}

/// Sum of 1/#Aut(M) over modules of the torsion ring with d_M = 0 and M/xM = A.
inline TorsionIdentityReport torsion_ring_identity(Int p, const std::vector<int>& A, int order_bound_exp, std::size_t limit = kDefaultEnumerationLimit) {
    TorsionIdentityReport rep;
    rep.p = p;
    rep.A = A;
    std::sort(rep.A.begin(), rep.A.end(), std::greater<>());
    rep.order_bound_exp = order_bound_exp;
    auto R = share_ring(make_torsion_ring(p, order_bound_exp + 1));
    for (const auto& M : all_modules_up_to(R, order_bound_exp, limit)) {
        Mat X = eval_on_module(Poly({0, 1}, ipow(p, M.level())), M);
        std::vector<Vec> cols;
        for (std::size_t c = 0; c < X.cols(); ++c) cols.push_back(X.column(c));
        if (quotient_partition(M.group, cols) != rep.A) continue;
        if (!in_support(M)) continue;
        TorsionIdentityClass c{M, describe_module(M), aut_count(M, limit)};
        rep.sum += Rational(BigInt(1), c.aut);
        rep.classes.push_back(std::move(c));
    }
    rep.target = Rational(BigInt(1), aut_count_dvr(rep.A, p));
    return rep;
}

struct InversionReport {
    std::vector<std::string> labels;
    std::vector<Rational> exact_masses;     // solution of the truncated system
    std::vector<double> neumann_masses;     // partial Neumann sums, V_M / #Aut M
    std::vector<double> predicted;          // c_R / #Aut M
    double residual = 0;                    // sup |U^T V - m| on the retained set
    int neumann_terms = 0;
    double sup_error_bottom4 = 0;
};

/// Inverts the truncated moment operator U_{M,M'} = #Surj(M,M') / #Aut(M)
/// on modules of order <= ell^order_bound_exp by its Neumann series.
inline InversionReport invert_moment_operator(const RingPtr& R, int order_bound_exp, const std::map<std::string, Rational>& moments, std::size_t limit = kDefaultEnumerationLimit) {
    for (const auto& f : R->local_factors)
        if (f.residue_size == 2) throw Error(Errc::ResidueFieldTooSmall, "the moment operator is not invertible this way when a residue field is F_2");
    auto mods = all_modules_up_to(R, order_bound_exp, limit);
    const std::size_t n = mods.size();
    InversionReport rep;
    ModuleClassifier cls(limit);
    std::vector<BigInt> aut(n);
    for (std::size_t i = 0; i < n; ++i) {
        rep.labels.push_back(cls.classify(mods[i]));
        aut[i] = aut_count(mods[i], limit);
    }
    // Ut[b][a] = U_{a,b}: row b is the moment equation for target b.
    std::vector<std::vector<Rational>> Ut(n, std::vector<Rational>(n, 0));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            if (mods[b].order_exp() > mods[a].order_exp()) continue;
            BigInt s = surj_count(mods[a], mods[b], limit);
            if (s != 0) Ut[b][a] = Rational(s, aut[a]);
        }
    std::vector<Rational> m(n, 0);
    for (std::size_t b = 0; b < n; ++b) {
        auto it = moments.find(rep.labels[b]);
        if (it == moments.end()) throw Error(Errc::ConfigError, "missing moment for " + rep.labels[b]);
        m[b] = it->second;
    }
    // Neumann series V = sum_j (I - Ut)^j m; nilpotent on the truncated poset.
    std::vector<Rational> V = m, term = m;
    for (rep.neumann_terms = 1; rep.neumann_terms <= static_cast<int>(n) + 1; ++rep.neumann_terms) {
        std::vector<Rational> next(n, 0);
        bool nonzero = false;
        for (std::size_t b = 0; b < n; ++b) {
            Rational s = term[b];
            for (std::size_t a = 0; a < n; ++a)
                if (Ut[b][a] != 0) s -= Ut[b][a] * term[a];
            next[b] = s;
            if (s != 0) nonzero = true;
        }
        if (!nonzero) break;
        for (std::size_t b = 0; b < n; ++b) V[b] += next[b];
        term = std::move(next);
    }
    const double c = c_R_for_ring(*R);
    for (std::size_t b = 0; b < n; ++b) {
        Rational lhs = 0;
        for (std::size_t a = 0; a < n; ++a)
            if (Ut[b][a] != 0) lhs += Ut[b][a] * V[a];
        rep.residual = std::max(rep.residual, std::abs(to_double(lhs - m[b])));
        rep.exact_masses.push_back(V[b] / Rational(aut[b]));
        rep.neumann_masses.push_back(to_double(rep.exact_masses.back()));
        rep.predicted.push_back(c / aut[b].convert_to<double>());
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
        if (mods[x].order_exp() != mods[y].order_exp()) return mods[x].order_exp() < mods[y].order_exp();
        return aut[x] < aut[y];
    });
    for (std::size_t k = 0; k < std::min<std::size_t>(4, n); ++k) {
        const std::size_t i = idx[k];
        rep.sup_error_bottom4 = std::max(rep.sup_error_bottom4, std::abs(rep.neumann_masses[i] - rep.predicted[i]));
    }
    return rep;
}

inline std::map<std::string, Rational> all_ones_moments(const RingPtr& R, int order_bound_exp, std::size_t limit = kDefaultEnumerationLimit) {
    std::map<std::string, Rational> m;
    ModuleClassifier cls(limit);
    for (const auto& M : all_modules_up_to(R, order_bound_exp, limit)) m[cls.classify(M)] = 1;
    return m;
}

// ---------------------------------------------------------------------------
// Convergence ladder.

struct LadderRung {
    int parameter = 0;  // Ndim or genus
    EmpiricalDistribution dist;
    std::vector<MomentReport> moments;
    std::map<std::string, double> predicted;
    double sup_discrepancy = 0;
};

enum class ModelKind { Linear, Rectangular, Matrix, Symplectic };

inline ModelKind parse_model(const std::string& s) {
    if (s == "linear") return ModelKind::Linear;
    if (s == "rect") return ModelKind::Rectangular;
    if (s == "matrix") return ModelKind::Matrix;
    if (s == "symplectic") return ModelKind::Symplectic;
    throw Error(Errc::ConfigError, "unknown model '" + s + "'");
}

inline std::string model_name(ModelKind k) {
    switch (k) {
        case ModelKind::Linear: return "linear";
        case ModelKind::Rectangular: return "rect";
        case ModelKind::Matrix: return "matrix";
        case ModelKind::Symplectic: return "symplectic";
    }
    return "?";
}

/// A sampler for the model at rung `parameter` (Ndim, d, or genus), with `extra` the
/// rectangular excess d.
inline Sampler make_sampler(const RingPtr& R, ModelKind kind, int parameter, int extra = 0) {
    switch (kind) {
        case ModelKind::Linear:
            return [R, parameter](Stream& rng) { return sample_linear(R, static_cast<std::size_t>(parameter), rng); };
        case ModelKind::Rectangular:
            return [R, parameter, extra](Stream& rng) { return sample_rectangular(R, static_cast<std::size_t>(parameter), static_cast<std::size_t>(extra), rng); };
        case ModelKind::Matrix:
            return [R, parameter](Stream& rng) { return sample_matrix_model(R, static_cast<std::size_t>(parameter), rng); };
        case ModelKind::Symplectic: {
            auto sp = std::make_shared<SymplecticSpace>(parameter, R->base, R->frobenius_scalar);
            return [R, sp](Stream& rng) { return sample_symplectic(R, *sp, rng); };
        }
    }
    throw Error(Errc::ConfigError, "unknown model");
}

inline std::vector<LadderRung> convergence_experiment(const RingPtr& R, ModelKind kind, const std::vector<int>& ladder, const std::vector<ModuleTarget>& targets, RunOptions opt) {
    if (kind == ModelKind::Symplectic && R->kind == RingKind::Monogenic) {
        const bool ell_divides = mod(R->modulus_poly.eval(R->frobenius_scalar), R->ell()) == 0;
        for (const auto& t : targets)
            if (t.omega && !ell_divides) throw Error(Errc::PreconditionViolated, "decorated targets need ell | P(q)");
    }
    std::vector<LadderRung> out;
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        opt.salt = k;
        LadderRung rung;
        rung.parameter = ladder[k];
        auto run = run_sampler(R, make_sampler(R, kind, ladder[k]), targets, opt, model_name(kind));
        rung.dist = run.dist;
        for (std::size_t t = 0; t < targets.size(); ++t) rung.moments.push_back(summarize_moment(targets[t].text, targets[t].omega.has_value(), run.moments[t]));
        for (auto& [label, M] : run.representatives) {
            const double p = predicted_mass(M);
            rung.predicted[label] = p;
            rung.sup_discrepancy = std::max(rung.sup_discrepancy, std::abs(run.dist.mass(label) - p));
        }
        out.push_back(std::move(rung));
    }
    return out;
}

}  // namespace clab
