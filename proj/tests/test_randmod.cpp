#include "clab/randmod.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace clab;

namespace {

RingPtr ring(const std::string& spec) { return share_ring(parse_ring_spec(spec)); }

// E #{nonzero phi in F_3^n : phi G = 0 mod 3} over all G in M_n(F_3).
Rational brute_moment_z3(int n) {
    const int entries = n * n;
    const Int total = ipow(3, entries);
    BigInt sum = 0;
    for (Int idx = 0; idx < total; ++idx) {
        std::vector<Int> g(entries);
        Int t = idx;
        for (auto& x : g) {
            x = t % 3;
            t /= 3;
        }
        for (Int ph = 1; ph < ipow(3, n); ++ph) {
            std::vector<Int> phi(n);
            Int u = ph;
            for (auto& x : phi) {
                x = u % 3;
                u /= 3;
            }
            bool kills = true;
            for (int j = 0; j < n && kills; ++j) {
                Int s = 0;
                for (int i = 0; i < n; ++i) s += phi[i] * g[i * n + j];
                kills = s % 3 == 0;
            }
            if (kills) ++sum;
        }
    }
    return Rational(sum, BigInt(total));
}

}  // namespace

TEST(ExactMoments, MatchBruteForce) {
    auto R = ring("ell=3;level=3;P=-1,1;q=2");
    auto Z3 = module_from_label(R, "(1)");
    EXPECT_EQ(exact_moment_finite_N(*R, 2, Z3), Rational(8, 9));
    EXPECT_EQ(exact_moment_finite_N(*R, 2, Z3), brute_moment_z3(2));
    EXPECT_EQ(exact_moment_finite_N(*R, 3, Z3), brute_moment_z3(3));
}

TEST(ExactMoments, MatchFullEnumerationIncludingOverflow) {
    // Z_3 with Ndim = 2 at level 2: every 2x2 matrix over Z/9.
    {
        auto R = ring("ell=3;level=2;P=-1,1;q=2");
        const Mat X = Mat::identity(2, R->base);
        for (const auto& target : all_modules_up_to(R, 2)) {
            if (target.exponent() > 1) continue;
            BigInt sum = 0;
            for (Int idx = 0; idx < 6561; ++idx) {
                Mat G(2, 2, R->base, {idx % 9, idx / 9 % 9, idx / 81 % 9, idx / 729});
                auto ca = cokernel_with_action(G, X);
                sum += surj_count(make_module(R, ca.partition, ca.action), target);
            }
            EXPECT_EQ(Rational(sum, 6561), exact_moment_finite_N(*R, 2, target)) << canonical_label(target);
        }
    }
    // Z_3[x]/(x^2-1) with Ndim = 1 at level 2: G = c0 + c1 x acting on R = Z/9 + Z/9 x.
    {
        auto R = ring("ell=3;level=2;P=-1,0,1;q=2");
        const Mat C(2, 2, R->base, {0, 1, 1, 0});
        for (const auto& target : all_modules_up_to(R, 2)) {
            if (target.exponent() > 1) continue;
            BigInt sum = 0;
            for (Int c0 = 0; c0 < 9; ++c0)
                for (Int c1 = 0; c1 < 9; ++c1) {
                    Mat G = Mat::identity(2, R->base).scaled(c0) + C.scaled(c1);
                    auto ca = cokernel_with_action(G, C);
                    sum += surj_count(make_module(R, ca.partition, ca.action), target);
                }
            EXPECT_EQ(Rational(sum, 81), exact_moment_finite_N(*R, 1, target)) << canonical_label(target);
        }
    }
}

TEST(ExactEnumeration, OneByOneOverZ9) {
    auto R = ring("ell=3;level=2;P=-1,1;q=2");
    auto ex = enumerate_exact(R, 1);
    EXPECT_EQ(ex.total, 9);
    EXPECT_EQ(ex.bins.at("0"), 6);
    EXPECT_EQ(ex.bins.at("x-1:(1)"), 2);
    EXPECT_EQ(ex.overflow, 1);
}

TEST(LinearModel, SamplesFollowExactLaw) {
    auto R = ring("ell=3;level=2;P=-1,1;q=2");
    auto ex = enumerate_exact(R, 2);
    RunOptions opt;
    opt.trials = 20000;
    opt.seed = 5;
    auto run = run_sampler(R, make_sampler(R, ModelKind::Linear, 2), {}, opt, "linear");
    for (const auto& [label, count] : ex.bins) {
        const double p = to_double(ex.mass(label));
        const double sd = std::sqrt(p * (1 - p) / 20000.0);
        EXPECT_NEAR(run.dist.mass(label), p, 5 * sd + 1e-9) << label;
    }
    EXPECT_NEAR(run.dist.overflow_rate(), to_double(Rational(ex.overflow, ex.total)), 0.01);
}

TEST(LinearModel, SplitRingSamplesFollowExactLaw) {
    auto R = ring("ell=3;level=2;P=-1,0,1;q=2");
    auto ex = enumerate_exact(R, 1);
    RunOptions opt;
    opt.trials = 20000;
    opt.seed = 6;
    auto run = run_sampler(R, make_sampler(R, ModelKind::Linear, 1), {}, opt, "linear");
    for (const auto& [label, count] : ex.bins) {
        const double p = to_double(ex.mass(label));
        EXPECT_NEAR(run.dist.mass(label), p, 5 * std::sqrt(p * (1 - p) / 20000.0) + 1e-9) << label;
    }
}

TEST(RectangularModel, MassesMatchPrediction) {
    auto R = ring("ell=3;level=6;P=-1,1;q=2");
    RunOptions opt;
    opt.trials = 20000;
    opt.seed = 9;
    auto run = run_sampler(R, make_sampler(R, ModelKind::Rectangular, 6, 1), {}, opt, "rect");
    for (const std::string label : {"0", "x-1:(1)", "x-1:(2)", "x-1:(1,1)"}) {
        const double p = rect_predicted_mass(run.representatives.at(label), 1);
        EXPECT_NEAR(run.dist.mass(label), p, std::max(5 * run.dist.mass_stderr(label), 0.005)) << label;
    }
}

TEST(MatrixModel, PresentationIsIsomorphicToCokernel) {
    auto R = ring("ell=3;level=5;P=-1,0,1;q=2");
    Stream rng(4);
    for (int t = 0; t < 150; ++t) {
        Mat A(1, 1, R->base);
        auto s = sample_matrix_model(R, 2, rng, &A);
        if (s.overflow) continue;
        auto direct = module_from_matrix_presentation(R, A);
        EXPECT_TRUE(is_isomorphic(s.module, direct.module));
    }
}

TEST(SymplecticModel, OmegaIsATwistedDecoration) {
    for (Int q : {4, 7}) {
        auto R = share_ring(build_ring(3, 4, {-1, 1}, q));
        SymplecticSpace sp(3, R->base, q);
        Stream rng(10, static_cast<std::uint64_t>(q));
        for (int t = 0; t < 200; ++t) {
            auto s = sample_symplectic(R, sp, rng);
            ASSERT_TRUE(s.omega.has_value());
            if (s.overflow) continue;
            EXPECT_NO_THROW(make_decorated(s.module, *s.omega));
        }
    }
}

TEST(GspExact, GenusOneValues) {
    for (Int q : {4, 2}) {
        auto R = share_ring(build_ring(3, 3, {-1, 1}, q));
        auto Z3 = module_from_label(R, "(1)");
        EXPECT_EQ(enumerate_gsp_exact(R, 1, make_decorated(Z3, {})).moment, 1) << q;
    }
    auto R = share_ring(build_ring(3, 3, {-1, 1}, 4));
    auto V = module_from_label(R, "(1,1)");
    EXPECT_EQ(enumerate_gsp_exact(R, 1, make_decorated(V, {1})).moment, 1);
    EXPECT_EQ(enumerate_gsp_exact(R, 1, make_decorated(V, {0})).moment, 0);
}

TEST(TorsionIdentity, ThreeClassesSumToHalf) {
    auto rep = torsion_ring_identity(3, {1}, 3);
    ASSERT_EQ(rep.classes.size(), 3u);
    for (const auto& c : rep.classes) EXPECT_EQ(c.aut, 6);
    EXPECT_EQ(rep.sum, Rational(1, 2));
    EXPECT_EQ(rep.target, Rational(1, 2));
}

TEST(Support, DZeroModulesAreExactlyTheCokernels) {
    auto R = share_ring(make_torsion_ring(3, 4));
    auto mods = all_modules_up_to(R, 2);
    ModuleClassifier cls;
    std::map<std::string, bool> support;
    for (const auto& M : mods) support[cls.classify(M)] = in_support(M);
    std::set<std::string> produced;
    Stream rng(17);
    for (int t = 0; t < 20000; ++t) {
        auto s = sample_rectangular(R, 1 + static_cast<std::size_t>(rng.below(2)), 0, rng);
        if (s.overflow || s.module.order_exp() > 2) continue;
        produced.insert(cls.classify(s.module));
    }
    for (const auto& [label, in] : support) EXPECT_EQ(produced.count(label) == 1, in) << label;
}

TEST(Inversion, RecoversCohenLenstraMasses) {
    auto R = ring("ell=5;level=4;P=-1,1;q=2");
    auto rep = invert_moment_operator(R, 3, all_ones_moments(R, 3));
    EXPECT_LT(rep.residual, 1e-9);
    EXPECT_LT(rep.sup_error_bottom4, 2e-3);
    try {
        invert_moment_operator(ring("ell=2;level=3;P=-1,1;q=3"), 2, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ResidueFieldTooSmall);
    }
}

TEST(Runner, WorkerCountDoesNotChangeResults) {
    auto R = ring("ell=3;level=4;P=-1,0,1;q=2");
    std::vector<ModuleTarget> targets{parse_target(R, "x-1:(1)")};
    RunOptions a;
    a.trials = 5000;
    a.seed = 3;
    RunOptions b = a;
    b.workers = 3;
    auto ra = run_sampler(R, make_sampler(R, ModelKind::Linear, 3), targets, a, "linear");
    auto rb = run_sampler(R, make_sampler(R, ModelKind::Linear, 3), targets, b, "linear");
    EXPECT_EQ(ra.dist.bins, rb.dist.bins);
    EXPECT_EQ(ra.dist.overflow_count, rb.dist.overflow_count);
    EXPECT_EQ(ra.moments[0].sum, rb.moments[0].sum);
    EXPECT_EQ(ra.moments[0].sum_sq, rb.moments[0].sum_sq);
}

TEST(Runner, MomentsIncludeOverflowSamples) {
    auto R = ring("ell=3;level=1;P=-1,1;q=2");
    std::vector<ModuleTarget> targets{parse_target(R, "(1)")};
    RunOptions opt;
    opt.trials = 3000;
    opt.seed = 2;
    auto run = run_sampler(R, make_sampler(R, ModelKind::Linear, 2), targets, opt, "linear");
    EXPECT_EQ(run.moments[0].n, 3000u);
    EXPECT_EQ(run.moments[0].overflow_included, run.dist.overflow_count);
    auto m = summarize_moment("(1)", false, run.moments[0]);
    m.exact = exact_moment_finite_N(*R, 2, targets[0].module);
    EXPECT_TRUE(m.within(5));
}
