#pragma once
// Hyperelliptic curves y^2 = f(x) over small finite fields: point counts,
// Jacobian orders from the zeta function, Cantor arithmetic, Sylow subgroups
// with their Frobenius action, and census statistics over full panels.

#include "clab/galois.hpp"
#include "clab/randmod.hpp"

#include <unordered_map>

namespace clab {

inline std::pair<Int, int> prime_power_decompose(Int q) {
    for (Int p = 2; p * p <= q; ++p)
        if (q % p == 0) {
            int e = 0;
            Int t = q;
            while (t % p == 0) {
                t /= p;
                ++e;
            }
            if (t != 1) throw Error(Errc::PreconditionViolated, "q must be a prime power");
            return {p, e};
        }
    if (q < 2) throw Error(Errc::PreconditionViolated, "q must be a prime power");
    return {q, 1};
}

/// Fields F_{q^k} with embeddings from F_q, built on demand.
class FieldTower {
   public:
    explicit FieldTower(Int q) : q_(q) {
        auto [p, e] = prime_power_decompose(q);
        p_ = p;
        e_ = e;
        base_ = std::make_shared<GaloisField>(p, e);
    }
    Int q() const { return q_; }
    Int characteristic() const { return p_; }
    const GaloisField& base() const { return *base_; }

    const GaloisField& field(int k) {
        ensure(k);
        return *levels_.at(k).first;
    }
    const FieldEmbedding& embedding(int k) {
        ensure(k);
        return *levels_.at(k).second;
    }

   private:
    void ensure(int k) {
        if (levels_.count(k)) return;
        std::shared_ptr<GaloisField> F = k == 1 ? base_ : std::make_shared<GaloisField>(p_, e_ * k);
        levels_[k] = {F, std::make_shared<FieldEmbedding>(*base_, *F)};
    }

    Int q_, p_ = 2;
    int e_ = 1;
    std::shared_ptr<GaloisField> base_;
    std::map<int, std::pair<std::shared_ptr<GaloisField>, std::shared_ptr<FieldEmbedding>>> levels_;
};

struct CurveRecord {
    Int q = 3;
    int genus = 1;
    FPoly f;  // monic squarefree, degree 2g+1, coefficients in F_q
};

/// All monic squarefree f of degree n over F_q, in lexicographic coefficient order.
inline std::vector<CurveRecord> enumerate_conf(const GaloisField& Fq, int n, Int q) {
    if (n < 1) throw Error(Errc::PreconditionViolated, "degree must be positive");
    std::vector<CurveRecord> out;
    const Int count = ipow(Fq.size(), n);
    if (count > 50'000'000) throw Error(Errc::BudgetExceeded, "configuration space too large");
    FPoly f(n + 1, 0);
    f[n] = 1;
    for (Int idx = 0; idx < count; ++idx) {
        Int t = idx;
        for (int i = 0; i < n; ++i) {
            f[i] = static_cast<int>(t % Fq.size());
            t /= Fq.size();
        }
        FPoly d = fp_derivative(Fq, f);
        if (d.empty()) continue;
        auto [g, s, tt] = fp_xgcd(Fq, f, d);
        if (fp_deg(g) == 0) out.push_back(CurveRecord{q, (n - 1) / 2, f});
    }
    return out;
}

/// #C(F_{q^k}) for the odd-degree model, including the point at infinity.
inline Int point_count(const CurveRecord& C, FieldTower& tower, int k) {
    if (std::pow(static_cast<double>(C.q), k) > 1e7) throw Error(Errc::BudgetExceeded, "point count beyond the brute-force budget");
    const GaloisField& F = tower.field(k);
    const FieldEmbedding& emb = tower.embedding(k);
    FPoly f;
    for (int c : C.f) f.push_back(emb(c));
    Int n = 1;
    for (Int x = 0; x < F.size(); ++x) n += 1 + F.chi(fp_eval(F, f, static_cast<int>(x)));
    return n;
}

/// L-polynomial coefficients a_0..a_{2g} from point counts over F_{q^k}, k <= g.
inline std::vector<BigInt> l_polynomial(const CurveRecord& C, FieldTower& tower) {
    const int g = C.genus;
    std::vector<BigInt> S(g + 1, 0);
    for (int k = 1; k <= g; ++k) S[k] = boost::multiprecision::pow(BigInt(C.q), k) + 1 - point_count(C, tower, k);
    // Elementary symmetric functions of the 2g roots, up to degree g.
    std::vector<BigInt> e(2 * g + 1, 0);
    e[0] = 1;
    for (int i = 1; i <= g; ++i) {
        BigInt acc = 0;
        for (int j = 1; j <= i; ++j) acc += ((j % 2) ? 1 : -1) * e[i - j] * S[j];
        e[i] = acc / i;
    }
    for (int i = g + 1; i <= 2 * g; ++i) e[i] = e[2 * g - i] * boost::multiprecision::pow(BigInt(C.q), i - g);
    std::vector<BigInt> a(2 * g + 1);
    for (int i = 0; i <= 2 * g; ++i) a[i] = (i % 2 ? -1 : 1) * e[i];
    return a;
}

/// #Jac(F_{q^m}) = prod (1 - alpha_i^m), in exact integer arithmetic.
inline BigInt jacobian_order(const CurveRecord& C, FieldTower& tower, int m = 1) {
    auto a = l_polynomial(C, tower);
    const int n = 2 * C.genus;
    std::vector<BigInt> e(n + 1);
    for (int i = 0; i <= n; ++i) e[i] = (i % 2 ? -1 : 1) * a[i];
    // Power sums S_1..S_{n m} of the alpha_i via Newton's identities.
    std::vector<BigInt> S(n * m + 1, 0);
    for (int k = 1; k <= n * m; ++k) {
        BigInt acc = 0;
        for (int j = 1; j <= std::min(k - 1, n); ++j) acc += ((j % 2) ? 1 : -1) * e[j] * S[k - j];
        if (k <= n) acc += ((k % 2) ? 1 : -1) * BigInt(k) * e[k];
        S[k] = acc;
    }
    // Elementary symmetric functions of beta_i = alpha_i^m.
    std::vector<BigInt> eb(n + 1, 0);
    eb[0] = 1;
    for (int i = 1; i <= n; ++i) {
        BigInt acc = 0;
        for (int j = 1; j <= i; ++j) acc += ((j % 2) ? 1 : -1) * eb[i - j] * S[j * m];
        eb[i] = acc / i;
    }
    BigInt total = 0;
    for (int i = 0; i <= n; ++i) total += (i % 2 ? -1 : 1) * eb[i];
    return total;
}

// ---------------------------------------------------------------------------
// Jacobian arithmetic in Mumford form.

struct MumfordDivisor {
    FPoly u{1};
    FPoly v{};
    friend bool operator==(const MumfordDivisor& a, const MumfordDivisor& b) { return a.u == b.u && a.v == b.v; }
    friend bool operator<(const MumfordDivisor& a, const MumfordDivisor& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); }
    bool is_neutral() const { return u.size() == 1; }
};

struct DivisorHash {
    std::size_t operator()(const MumfordDivisor& d) const {
        std::size_t h = 1469598103934665603ull;
        for (int c : d.u) h = (h ^ static_cast<std::size_t>(c + 1)) * 1099511628211ull;
        h = (h ^ 0xabcdu) * 1099511628211ull;
        for (int c : d.v) h = (h ^ static_cast<std::size_t>(c + 1)) * 1099511628211ull;
        return h;
    }
};

/// A genus-g curve y^2 = f(x) over a concrete field F (usually F_{q^m}).
class JacobianContext {
   public:
    JacobianContext(const GaloisField& F, FPoly f, int genus) : F_(F), f_(std::move(f)), g_(genus) {}

    const GaloisField& field() const { return F_; }
    int genus() const { return g_; }
    const FPoly& f() const { return f_; }

    MumfordDivisor neutral() const { return {}; }
    MumfordDivisor negate(const MumfordDivisor& D) const { return {D.u, fp_neg(F_, D.v)}; }

    MumfordDivisor add(const MumfordDivisor& D1, const MumfordDivisor& D2) const {
        auto [d0, e1, e2] = fp_xgcd(F_, D1.u, D2.u);
        auto [d, c1, c2] = fp_xgcd(F_, d0, fp_add(F_, D1.v, D2.v));
        FPoly s1 = fp_mul(F_, c1, e1), s2 = fp_mul(F_, c1, e2), s3 = c2;
        FPoly u = fp_divmod(F_, fp_mul(F_, D1.u, D2.u), fp_mul(F_, d, d)).first;
        FPoly num = fp_add(F_, fp_add(F_, fp_mul(F_, fp_mul(F_, s1, D1.u), D2.v), fp_mul(F_, fp_mul(F_, s2, D2.u), D1.v)),
                           fp_mul(F_, s3, fp_add(F_, fp_mul(F_, D1.v, D2.v), f_)));
        FPoly v = fp_divmod(F_, num, d).first;
        u = fp_monic(F_, u);
        v = fp_mod(F_, v, u);
        while (fp_deg(u) > g_) {
            FPoly u2 = fp_divmod(F_, fp_sub(F_, f_, fp_mul(F_, v, v)), u).first;
            u2 = fp_monic(F_, u2);
            v = fp_mod(F_, fp_neg(F_, v), u2);
            u = std::move(u2);
        }
        return {u, v};
    }

    MumfordDivisor multiply(MumfordDivisor D, BigInt n) const {
        if (n < 0) {
            D = negate(D);
            n = -n;
        }
        MumfordDivisor acc = neutral();
        while (n > 0) {
            if (n & 1) acc = add(acc, D);
            D = add(D, D);
            n >>= 1;
        }
        return acc;
    }

    /// All v with deg v < deg u and u | f - v^2, for monic u of degree <= 2.
    std::vector<FPoly> solve_v(const FPoly& u) const {
        std::vector<FPoly> out;
        const int du = fp_deg(u);
        if (du == 0) return {FPoly{}};
        FPoly r = fp_mod(F_, f_, u);
        r.resize(2, 0);
        if (du == 1) {
            const int val = r[0];
            if (!F_.is_square(val)) return out;
            const int s = F_.sqrt(val);
            out.push_back(s == 0 ? FPoly{} : FPoly{s});
            if (s != 0) out.push_back(FPoly{F_.neg(s)});
            return out;
        }
        if (du != 2) throw Error(Errc::PreconditionViolated, "divisor solver supports deg u <= 2");
        const int u0 = u[0], u1 = u.size() > 1 ? u[1] : 0;
        const int r0 = r[0], r1 = r[1];
        if (r1 == 0 && F_.is_square(r0)) {
            const int s = F_.sqrt(r0);
            out.push_back(s == 0 ? FPoly{} : FPoly{s});
            if (s != 0) out.push_back(FPoly{F_.neg(s)});
        }
        const int two = F_.from_int(2);
        for (Int t = 1; t < F_.size(); ++t) {
            const int v1 = static_cast<int>(t);
            const int v1sq = F_.mul(v1, v1);
            const int v0 = F_.div(F_.add(r1, F_.mul(u1, v1sq)), F_.mul(two, v1));
            if (F_.sub(F_.mul(v0, v0), F_.mul(u0, v1sq)) == r0) out.push_back(FPoly{v0, v1});
        }
        return out;
    }

    /// Every reduced divisor class, by exhaustive search over Mumford pairs.
    std::vector<MumfordDivisor> all_divisors() const {
        if (std::pow(static_cast<double>(F_.size()), g_) > 1e6) throw Error(Errc::BudgetExceeded, "exhaustive divisor enumeration too large");
        std::vector<MumfordDivisor> out{neutral()};
        for (int du = 1; du <= g_; ++du) {
            const Int count = ipow(F_.size(), du);
            FPoly u(du + 1, 0);
            u[du] = 1;
            for (Int idx = 0; idx < count; ++idx) {
                Int t = idx;
                for (int i = 0; i < du; ++i) {
                    u[i] = static_cast<int>(t % F_.size());
                    t /= F_.size();
                }
                for (auto& v : solve_v(u)) out.push_back({u, v});
            }
        }
        return out;
    }

    /// A random reduced divisor whose u has degree exactly g (retrying until solvable).
    MumfordDivisor random_divisor(Stream& rng) const {
        for (int attempt = 0; attempt < 10000; ++attempt) {
            FPoly u(g_ + 1, 0);
            u[g_] = 1;
            for (int i = 0; i < g_; ++i) u[i] = static_cast<int>(rng.below(F_.size()));
            auto vs = solve_v(u);
            if (vs.empty()) continue;
            return {u, vs[rng.below(static_cast<Int>(vs.size()))]};
        }
        throw Error(Errc::GenerationStalled, "no random divisor found");
    }

    /// Frobenius x -> x^q applied to the coefficients.
    MumfordDivisor frobenius(const MumfordDivisor& D, Int q) const {
        MumfordDivisor out;
        out.u.clear();
        for (int c : D.u) out.u.push_back(F_.frobenius(c, q));
        for (int c : D.v) out.v.push_back(F_.frobenius(c, q));
        fp_trim(out.u);
        fp_trim(out.v);
        return out;
    }

   private:
    const GaloisField& F_;
    FPoly f_;
    int g_;
};

inline JacobianContext curve_over(const CurveRecord& C, FieldTower& tower, int m) {
    const FieldEmbedding& emb = tower.embedding(m);
    FPoly f;
    for (int c : C.f) f.push_back(emb(c));
    return JacobianContext(tower.field(m), f, C.genus);
}

// ---------------------------------------------------------------------------
// Sylow subgroups.

struct JacobianSample {
    int m = 1;
    BigInt order = 0;
    Int ell = 3;
    std::vector<int> partition;  // nonincreasing
    std::vector<MumfordDivisor> generators;
    Mat frobenius;               // action of the q-power Frobenius on the generators
    bool exhaustive = false;
};

namespace detail {

/// Incrementally grown subgroup with every element tabulated by its coordinates
/// in a (not yet independent) generating list.
struct SylowBuilder {
    const JacobianContext& J;
    Int ell;
    std::unordered_map<MumfordDivisor, Vec, DivisorHash> table;
    std::vector<MumfordDivisor> gens;
    std::vector<int> steps;           // generator i contributes ell^{steps[i]} cosets
    std::vector<Vec> relations;       // ell^{steps[i]} e_i - coords
    std::size_t size() const { return table.size(); }

    SylowBuilder(const JacobianContext& j, Int l) : J(j), ell(l) { table.emplace(J.neutral(), Vec{}); }

    /// Adds x if it enlarges the subgroup; returns true on growth.
    bool offer(const MumfordDivisor& x) {
        if (table.count(x)) return false;
        MumfordDivisor y = x;
        int t = 0;
        while (!table.count(y)) {
            y = J.multiply(y, ell);
            ++t;
            if (t > 64) throw Error(Errc::GenerationStalled, "element outside the ell-Sylow subgroup");
        }
        const Vec base = table.at(y);
        const std::size_t r = gens.size();
        Vec rel(r + 1, 0);
        for (std::size_t i = 0; i < r; ++i) rel[i] = i < base.size() ? -base[i] : 0;
        rel[r] = ipow(ell, t);
        relations.push_back(rel);
        gens.push_back(x);
        steps.push_back(t);
        std::vector<std::pair<MumfordDivisor, Vec>> old(table.begin(), table.end());
        const Int reps = ipow(ell, t);
        MumfordDivisor kx = x;
        for (Int k = 1; k < reps; ++k) {
            for (const auto& [d, c] : old) {
                Vec cc = c;
                cc.resize(r + 1, 0);
                cc[r] = k;
                table.emplace(J.add(d, kx), std::move(cc));
            }
            kx = J.add(kx, x);
        }
        return true;
    }
};

}  // namespace detail

/// The ell-part of Jac(F_{q^m}) with an independent basis and the Frobenius matrix.
inline JacobianSample sylow_structure(const CurveRecord& C, FieldTower& tower, Int ell, int m, Stream& rng, int stall_limit = 400) {
    if (ell % 2 == 0 || !is_prime(ell)) throw Error(Errc::PreconditionViolated, "ell must be an odd prime");
    if (C.q % ell == 0) throw Error(Errc::PreconditionViolated, "ell must not divide q");
    JacobianSample out;
    out.m = m;
    out.ell = ell;
    out.order = jacobian_order(C, tower, m);
    int v = 0;
    BigInt cof = out.order;
    while (cof % ell == 0) {
        cof /= ell;
        ++v;
    }
    out.frobenius = Mat(0, 0, PrimePower(ell, 1));
    if (v == 0) return out;
    JacobianContext J = curve_over(C, tower, m);
    detail::SylowBuilder B(J, ell);
    const BigInt target = boost::multiprecision::pow(BigInt(ell), v);
    int stalls = 0;
    while (BigInt(B.size()) < target && stalls < stall_limit) {
        MumfordDivisor x = J.multiply(J.random_divisor(rng), cof);
        if (B.offer(x))
            stalls = 0;
        else
            ++stalls;
    }
    if (BigInt(B.size()) < target) {
        std::vector<MumfordDivisor> all;
        try {
            all = J.all_divisors();
        } catch (const Error&) {
            throw Error(Errc::GenerationStalled, "Sylow generation stalled and exhaustive fallback is infeasible");
        }
        out.exhaustive = true;
        for (const auto& d : all) {
            if (BigInt(B.size()) >= target) break;
            B.offer(J.multiply(d, cof));
        }
        if (BigInt(B.size()) != target) throw Error(Errc::GenerationStalled, "Sylow subgroup order mismatch");
    }
    // Independent basis from the relation lattice.
    const std::size_t r = B.gens.size();
    PrimePower pp(ell, v + 1);
    Mat Rel(r, r, pp);
    for (std::size_t c = 0; c < r; ++c) {
        Vec rel = B.relations[c];
        rel.resize(r, 0);
        Rel.set_column(c, rel);
    }
    auto snf = smith_normal_form(Rel);
    std::vector<std::pair<int, std::size_t>> comps;
    for (std::size_t k = 0; k < r; ++k)
        if (snf.divisor_valuations[k] > 0) comps.emplace_back(snf.divisor_valuations[k], k);
    std::stable_sort(comps.begin(), comps.end(), [](auto& a, auto& b) { return a.first > b.first; });
    auto new_coords = [&](const Vec& old) {
        Vec full(r, 0);
        for (std::size_t i = 0; i < old.size(); ++i) full[i] = old[i];
        Vec z = snf.left * full;
        Vec c(comps.size());
        for (std::size_t a = 0; a < comps.size(); ++a) c[a] = z[comps[a].second] % ipow(ell, comps[a].first);
        return c;
    };
    for (auto& [e, k] : comps) {
        out.partition.push_back(e);
        MumfordDivisor b = J.neutral();
        for (std::size_t i = 0; i < r; ++i) b = J.add(b, J.multiply(B.gens[i], BigInt(snf.left_inv(i, k))));
        out.generators.push_back(b);
    }
    const std::size_t n = comps.size();
    out.frobenius = Mat(n, n, PrimePower(ell, group_level(out.partition)));
    for (std::size_t c = 0; c < n; ++c) {
        auto it = B.table.find(J.frobenius(out.generators[c], C.q));
        if (it == B.table.end()) throw Error(Errc::GenerationStalled, "Frobenius image outside the tabulated subgroup");
        out.frobenius.set_column(c, new_coords(it->second));
    }
    reduce_rows(out.frobenius, out.partition, ell);
    return out;
}

/// y^2 = c f(x) in monic odd-degree form: coefficients a_k c^{n-k}, c a fixed non-square.
inline CurveRecord quadratic_twist(const CurveRecord& C, const GaloisField& Fq) {
    int c = -1;
    for (Int t = 1; t < Fq.size() && c < 0; ++t)
        if (!Fq.is_square(static_cast<int>(t))) c = static_cast<int>(t);
    if (c < 0) throw Error(Errc::PreconditionViolated, "no non-square available");
    const int n = fp_deg(C.f);
    CurveRecord T = C;
    for (int k = 0; k <= n; ++k) T.f[k] = Fq.mul(C.f[k], Fq.pow(c, n - k));
    return T;
}

// ---------------------------------------------------------------------------
// Census.

enum class CensusMode { Plain, Twist, Module, SurjAvg };

inline CensusMode parse_census_mode(const std::string& s) {
    if (s == "plain") return CensusMode::Plain;
    if (s == "twist") return CensusMode::Twist;
    if (s == "module") return CensusMode::Module;
    if (s == "surjavg") return CensusMode::SurjAvg;
    throw Error(Errc::ConfigError, "unknown census mode '" + s + "'");
}

inline std::string census_mode_name(CensusMode m) {
    switch (m) {
        case CensusMode::Plain: return "plain";
        case CensusMode::Twist: return "twist";
        case CensusMode::Module: return "module";
        case CensusMode::SurjAvg: return "surjavg";
    }
    return "?";
}

struct CensusConfig {
    Int q = 5;
    int genus = 1;
    Int ell = 3;
    CensusMode mode = CensusMode::Plain;
    int m = 2;
    std::vector<std::string> targets;
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

struct CensusRow {
    std::string label;
    std::uint64_t count = 0;
    double mass = 0, predicted = 0, abs_error = 0;
};

struct CensusReport {
    CensusConfig config;
    std::uint64_t curves = 0;
    std::vector<CensusRow> rows;
    bool cl_regime = false;        // ell does not divide P(q), so Cohen-Lenstra masses are the reference
    std::string agreement = "qualitative agreement";
    std::uint64_t exhaustive_fallbacks = 0;
    double sup_error = 0;
};

/// Ring over which mode outputs are modules.
inline RingPtr census_ring(const CensusConfig& cfg) {
    int level = 1;
    while (ipow(cfg.ell, level + 1) < (Int{1} << 30) && level < 12) ++level;
    switch (cfg.mode) {
        case CensusMode::Twist: return share_ring(build_ring(cfg.ell, level, {-1, 0, 1}, cfg.q));
        case CensusMode::Module: {
            std::vector<Int> c(cfg.m + 1, 0);
            c[0] = -1;
            c[cfg.m] = 1;
            return share_ring(build_ring(cfg.ell, level, c, cfg.q));
        }
        default: return share_ring(build_ring(cfg.ell, level, {-1, 1}, cfg.q));
    }
}

inline FiniteModule trivial_action_module(const RingPtr& R, const std::vector<int>& partition) {
    std::vector<Int> act(partition.size() * partition.size(), 0);
    for (std::size_t i = 0; i < partition.size(); ++i) act[i * partition.size() + i] = 1;
    return make_module(R, partition, act);
}

/// Number of elements of wedge^2 B killed by (q - 1).
inline BigInt wedge_killed_by(const std::vector<int>& B, Int ell, Int q) {
    int vq = 0;
    Int t = q - 1;
    while (t != 0 && t % ell == 0) {
        t /= ell;
        ++vq;
    }
    BigInt n = 1;
    for (std::size_t i = 0; i < B.size(); ++i)
        for (std::size_t j = i + 1; j < B.size(); ++j) n *= boost::multiprecision::pow(BigInt(ell), std::min({B[i], B[j], vq}));
    return n;
}

namespace detail {

struct CensusBlock {
    std::vector<std::pair<FiniteModule, std::string>> samples;  // (module, local label)
    std::vector<BigInt> surj_sums;
    std::uint64_t curves = 0, fallbacks = 0;
};

inline std::vector<int> parse_group_partition(const std::string& text) {
    if (text == "0") return {};
    if (text.size() < 2 || text.front() != '(' || text.back() != ')') throw Error(Errc::ConfigError, "target '" + text + "' must be a partition like (1,1)");
    std::vector<int> parts;
    std::string body = text.substr(1, text.size() - 2);
    std::size_t pos = 0;
    while (pos < body.size()) {
        std::size_t e = body.find(',', pos);
        if (e == std::string::npos) e = body.size();
        std::string num = body.substr(pos, e - pos);
        if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos) throw Error(Errc::ConfigError, "bad partition entry in '" + text + "'");
        parts.push_back(std::stoi(num));
        pos = e + 1;
    }
    std::sort(parts.begin(), parts.end(), std::greater<>());
    return parts;
}

}  // namespace detail

inline CensusReport census_statistics(const CensusConfig& cfg) {
    auto [p, e] = prime_power_decompose(cfg.q);
    (void)e;
    if (p == 2) throw Error(Errc::PreconditionViolated, "q must be odd");
    if (cfg.genus < 1 || cfg.genus > 2) throw Error(Errc::PreconditionViolated, "genus must be 1 or 2");
    if (cfg.ell % 2 == 0 || !is_prime(cfg.ell) || cfg.q % cfg.ell == 0) throw Error(Errc::PreconditionViolated, "ell must be an odd prime not dividing q");
    const int n = 2 * cfg.genus + 1;
    if (std::pow(static_cast<double>(cfg.q), n) > 2e5) throw Error(Errc::BudgetExceeded, "curve panel larger than the configured cap");
    if (cfg.mode == CensusMode::Twist && mod(cfg.q * cfg.q - 1, cfg.ell) == 0) throw Error(Errc::PreconditionViolated, "joint twist statistics need ell not dividing q^2 - 1");
    if (cfg.mode == CensusMode::Module && cfg.m < 1) throw Error(Errc::PreconditionViolated, "extension degree must be >= 1");

    RingPtr R = census_ring(cfg);
    std::vector<std::vector<int>> surj_targets;
    if (cfg.mode == CensusMode::SurjAvg)
        for (const auto& t : cfg.targets) surj_targets.push_back(detail::parse_group_partition(t));

    FieldTower probe(cfg.q);
    const auto panel = enumerate_conf(probe.base(), n, cfg.q);
    const std::uint64_t per_block = 256;
    const std::uint64_t blocks = (panel.size() + per_block - 1) / per_block;
    auto results = run_blocks<detail::CensusBlock>(blocks, cfg.workers, [&](std::uint64_t b) {
        detail::CensusBlock out;
        out.surj_sums.assign(surj_targets.size(), 0);
        FieldTower tower(cfg.q);
        ModuleClassifier local;
        const std::uint64_t begin = b * per_block, end = std::min<std::uint64_t>(panel.size(), begin + per_block);
        for (std::uint64_t i = begin; i < end; ++i) {
            const CurveRecord& C = panel[i];
            Stream rng(cfg.seed, i, 0xc0ffee);
            ++out.curves;
            FiniteModule M = zero_module(R);
            switch (cfg.mode) {
                case CensusMode::Plain:
                case CensusMode::SurjAvg: {
                    auto S = sylow_structure(C, tower, cfg.ell, 1, rng);
                    out.fallbacks += S.exhaustive;
                    M = trivial_action_module(R, S.partition);
                    for (std::size_t k = 0; k < surj_targets.size(); ++k) out.surj_sums[k] += surj_count_dvr(S.partition, surj_targets[k], cfg.ell);
                    break;
                }
                case CensusMode::Twist: {
                    auto A = sylow_structure(C, tower, cfg.ell, 1, rng);
                    auto Bs = sylow_structure(quadratic_twist(C, tower.base()), tower, cfg.ell, 1, rng);
                    out.fallbacks += A.exhaustive + Bs.exhaustive;
                    M = module_from_types(R, {});
                    std::vector<std::vector<int>> types(R->local_factors.size());
                    for (std::size_t j = 0; j < types.size(); ++j) types[j] = R->local_factors[j].name() == "x-1" ? A.partition : Bs.partition;
                    M = module_from_types(R, types);
                    break;
                }
                case CensusMode::Module: {
                    auto S = sylow_structure(C, tower, cfg.ell, cfg.m, rng);
                    out.fallbacks += S.exhaustive;
                    M = make_module(R, S.partition, S.frobenius);
                    break;
                }
            }
            out.samples.emplace_back(M, "");
        }
        return out;
    });

    CensusReport rep;
    rep.config = cfg;
    ModuleClassifier global;
    std::map<std::string, std::uint64_t> bins;
    std::map<std::string, FiniteModule> reps;
    std::vector<BigInt> sums(surj_targets.size(), 0);
    for (auto& blk : results) {
        rep.curves += blk.curves;
        rep.exhaustive_fallbacks += blk.fallbacks;
        for (std::size_t k = 0; k < sums.size(); ++k) sums[k] += blk.surj_sums[k];
        for (auto& [M, unused] : blk.samples) {
            std::string label = global.classify(M);
            ++bins[label];
            if (!reps.count(label)) reps.emplace(label, M);
        }
    }
    Poly P = R->modulus_poly;
    rep.cl_regime = mod(P.eval(mod(cfg.q, R->base.modulus())), cfg.ell) != 0;
    if (cfg.mode == CensusMode::SurjAvg) {
        for (std::size_t k = 0; k < surj_targets.size(); ++k) {
            CensusRow row;
            row.label = cfg.targets[k];
            row.count = rep.curves;
            row.mass = to_double(Rational(sums[k], BigInt(rep.curves)));
            row.predicted = wedge_killed_by(surj_targets[k], cfg.ell, cfg.q).convert_to<double>();
            row.abs_error = std::abs(row.mass - row.predicted);
            rep.sup_error = std::max(rep.sup_error, row.abs_error);
            rep.rows.push_back(row);
        }
        return rep;
    }
    for (auto& [label, count] : bins) {
        CensusRow row;
        row.label = label;
        row.count = count;
        row.mass = static_cast<double>(count) / static_cast<double>(rep.curves);
        row.predicted = predicted_mass(reps.at(label));
        row.abs_error = std::abs(row.mass - row.predicted);
        rep.sup_error = std::max(rep.sup_error, row.abs_error);
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace clab
