#include "clab/modcat.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace clab;

namespace {

RingPtr zl(Int ell = 3, int level = 4, Int q = 2) { return share_ring(build_ring(ell, level, {-1, 1}, q)); }
RingPtr split(Int q = 2, int level = 4) { return share_ring(build_ring(3, level, {-1, 0, 1}, q)); }
RingPtr inert() { return share_ring(build_ring(3, 3, {1, 0, 1}, 2)); }
RingPtr torsion(int level = 4) { return share_ring(make_torsion_ring(3, level)); }

FiniteModule mk(const RingPtr& R, std::vector<int> part, std::vector<Int> act) { return make_module(R, part, act); }

Errc error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::MismatchDetected;
}

std::vector<FiniteModule> panel(const RingPtr& R, int bound) { return all_modules_up_to(R, bound); }

}  // namespace

TEST(MakeModule, ValidatesAction) {
    auto R = zl();
    EXPECT_EQ(mk(R, {1}, {1}).order(), 3);
    EXPECT_EQ(mk(split(), {1}, {2}).order(), 3);
    EXPECT_EQ(error_of([&] { mk(R, {1}, {2}); }), Errc::ActionNotAnnihilated);
    EXPECT_EQ(error_of([&] { mk(split(), {2, 1}, {1, 1, 0, 1}); }), Errc::ActionNotWellDefined);
    EXPECT_EQ(error_of([&] { mk(zl(3, 2), {3}, {1}); }), Errc::PreconditionViolated);
}

TEST(HomGroup, SmallExamples) {
    EXPECT_EQ(HomGroup(mk(zl(), {1}, {1}), mk(zl(), {1}, {1})).order(), 3);
    EXPECT_EQ(HomGroup(mk(split(), {1}, {1}), mk(split(), {1}, {2})).order(), 1);
    auto M = mk(zl(), {2, 1}, {1, 0, 0, 1});
    EXPECT_EQ(HomGroup(M, M).order(), 243);
}

TEST(HomGroup, OrderAndSurjectionsMatchBruteForce) {
    int checked = 0;
    for (const auto& R : {zl(), split(), inert(), torsion()}) {
        auto mods = panel(R, R->degree() == 2 && R->kind == RingKind::Monogenic && R->local_factors.size() == 1 ? 2 : 3);
        for (std::size_t a = 0; a < mods.size(); ++a)
            for (std::size_t b = 0; b < mods.size(); ++b) {
                if (mods[a].order_exp() + mods[b].order_exp() > 5) continue;
                auto oc = oracle::count_homs(mods[a], mods[b]);
                EXPECT_EQ(HomGroup(mods[a], mods[b]).order(), oc.hom);
                EXPECT_EQ(surj_count(mods[a], mods[b]), oc.surj) << canonical_label(mods[a]) << " -> " << canonical_label(mods[b]);
                EXPECT_EQ(surj_count_enumerated(mods[a], mods[b]), oc.surj);
                ++checked;
            }
    }
    EXPECT_GE(checked, 50);
}

TEST(Counting, SpecExamples) {
    auto R = zl();
    EXPECT_EQ(surj_count(mk(R, {1, 1}, {1, 0, 0, 1}), mk(R, {1}, {1})), 8);
    EXPECT_EQ(surj_count(mk(R, {1}, {1}), mk(R, {2}, {1})), 0);
    EXPECT_EQ(aut_count(mk(R, {2}, {1})), 6);
    EXPECT_EQ(aut_count(mk(R, {1, 1}, {1, 0, 0, 1})), 48);
    EXPECT_EQ(aut_count(mk(R, {2, 1}, {1, 0, 0, 1})), 108);
}

TEST(Counting, AutFormulaAgreesWithEnumeration) {
    int checked = 0;
    for (const auto& R : {zl(3, 5), split(2, 5), inert(), zl(5, 3)}) {
        for (const auto& M : panel(R, R->ell() == 5 ? 3 : 4)) {
            if (HomGroup(M, M).order() > 100000) continue;
            EXPECT_EQ(aut_count_formula(M), aut_count_enumerated(M)) << canonical_label(M);
            ++checked;
        }
    }
    EXPECT_GE(checked, 40);
}

TEST(Counting, SurjFormulaAgreesWithEnumeration) {
    Stream rng(8);
    int checked = 0;
    for (const auto& R : {zl(3, 5), split(2, 5)}) {
        auto mods = panel(R, 4);
        for (int t = 0; t < 120; ++t) {
            const auto& M = mods[rng.below(static_cast<Int>(mods.size()))];
            const auto& N = mods[rng.below(static_cast<Int>(mods.size()))];
            if (HomGroup(M, N).order() > 200000) continue;
            EXPECT_EQ(surj_count_formula(M, N), surj_count_enumerated(M, N));
            ++checked;
        }
    }
    EXPECT_GE(checked, 200);
}

TEST(Counting, EnumerationBudgetIsEnforced) {
    auto R = zl(3, 6);
    auto M = mk(R, {5, 5, 5}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    EXPECT_EQ(error_of([&] { surj_count_enumerated(M, M, 1000); }), Errc::EnumerationTooLarge);
}

TEST(DecoratedCounting, MatchesExhaustiveOracle) {
    auto R = zl(3, 3, 7);
    std::vector<Int> id4(16, 0), id2 = {1, 0, 0, 1};
    for (int i = 0; i < 4; ++i) id4[i * 5] = 1;
    auto M = mk(R, {1, 1, 1, 1}, id4);
    auto M0 = mk(R, {1, 1}, id2);
    auto wb = wedge_basis(M.group);
    Vec omega(wb.pairs.size(), 0);
    for (std::size_t k = 0; k < wb.pairs.size(); ++k)
        if ((wb.pairs[k] == std::pair<std::size_t, std::size_t>{0, 1}) || (wb.pairs[k] == std::pair<std::size_t, std::size_t>{2, 3})) omega[k] = 1;
    auto D = make_decorated(M, omega);
    auto D0 = make_decorated(M0, Vec{0});
    // Oracle: all 3^8 matrices, rank two, with a∧b coefficient sum over the two pairs zero.
    Int oracle_count = 0;
    for (Int idx = 0; idx < 6561; ++idx) {
        Int t = idx;
        Int T[2][4];
        for (auto& row : T)
            for (auto& x : row) {
                x = t % 3;
                t /= 3;
            }
        const Int det01 = T[0][0] * T[1][1] - T[0][1] * T[1][0];
        const Int det23 = T[0][2] * T[1][3] - T[0][3] * T[1][2];
        bool rank2 = false;
        for (int i = 0; i < 4 && !rank2; ++i)
            for (int j = i + 1; j < 4 && !rank2; ++j) rank2 = mod(T[0][i] * T[1][j] - T[0][j] * T[1][i], 3) != 0;
        if (rank2 && mod(det01 + det23, 3) == 0) ++oracle_count;
    }
    EXPECT_EQ(surj_count_decorated(D, D0), oracle_count);
    EXPECT_EQ(oracle_count, 1920);
}

TEST(Isomorphism, Examples) {
    EXPECT_FALSE(is_isomorphic(mk(split(), {1}, {1}), mk(split(), {1}, {2})));
    EXPECT_TRUE(is_isomorphic(mk(split(), {1, 1}, {1, 0, 0, 2}), mk(split(), {1, 1}, {2, 0, 0, 1})));
    auto T = torsion();
    EXPECT_FALSE(is_isomorphic(mk(T, {2}, {3}), mk(T, {2}, {6})));
    EXPECT_TRUE(is_isomorphic(mk(T, {2}, {3}), mk(T, {2}, {3})));
}

TEST(Isomorphism, AgreesWithAutomorphismSearch) {
    auto mods = panel(torsion(), 3);
    for (std::size_t a = 0; a < mods.size(); ++a)
        for (std::size_t b = 0; b < mods.size(); ++b) {
            if (mods[a].group.exps != mods[b].group.exps) {
                EXPECT_FALSE(is_isomorphic(mods[a], mods[b]));
                continue;
            }
            bool found = false;
            for (const auto& T : oracle::all_group_homs(mods[a].group, mods[b].group))
                if (oracle::equivariant(T, mods[a], mods[b]) && static_cast<Int>(oracle::image_size(T, mods[a].group, mods[b].group)) == oracle::group_order(mods[b].group)) {
                    found = true;
                    break;
                }
            EXPECT_EQ(is_isomorphic(mods[a], mods[b]), found) << a << " " << b;
        }
}

TEST(Wedge, StructureAndTwistFixedPoints) {
    EXPECT_TRUE(wedge_square(mk(zl(), {1}, {1})).group.exps.empty());
    EXPECT_EQ(wedge_square(mk(zl(), {2, 1}, {1, 0, 0, 1})).group.exps, std::vector<int>{1});
    for (Int q : {4, 7, 2, 5}) {
        auto w = wedge_square(mk(zl(3, 3, q), {1, 1}, {1, 0, 0, 1}));
        EXPECT_EQ(w.fixed_points.size(), mod(q, 3) == 1 ? 3u : 1u) << q;
    }
}

TEST(Wedge, Functoriality) {
    Stream rng(31);
    AbGroup A{3, {2, 1, 1}}, B{3, {2, 2, 1}}, C{3, {1, 2, 1}};
    auto random_hom = [&](const AbGroup& X, const AbGroup& Y) {
        auto homs = oracle::all_group_homs(X, Y);
        return homs[rng.below(static_cast<Int>(homs.size()))];
    };
    for (int t = 0; t < 60; ++t) {
        Mat S = random_hom(A, B), T = random_hom(B, C);
        Mat TS = oracle::apply_rows(oracle::lift(T, 3) * oracle::lift(S, 3), C);
        Mat lhs = wedge_map(TS, A, C);
        auto wc = wedge_basis(C);
        Mat rhs = oracle::apply_rows(oracle::lift(wedge_map(T, B, C), 3) * oracle::lift(wedge_map(S, A, B), 3), wc.group);
        EXPECT_EQ(oracle::apply_rows(oracle::lift(lhs, 3), wc.group), rhs);
    }
}

TEST(Wedge, PushforwardExamples) {
    AbGroup A{3, {1, 1, 1, 1}}, B{3, {1, 1}};
    auto wa = wedge_basis(A);
    Vec omega(wa.pairs.size(), 0);
    for (std::size_t k = 0; k < wa.pairs.size(); ++k)
        if (wa.pairs[k] == std::pair<std::size_t, std::size_t>{0, 1} || wa.pairs[k] == std::pair<std::size_t, std::size_t>{2, 3}) omega[k] = 1;
    Mat id = Mat::identity(4, PrimePower(3, 1));
    EXPECT_EQ(pushforward_form(id, A, A, omega), omega);
    Mat T(2, 4, PrimePower(3, 1), {1, 0, 0, 0, 0, 1, 0, 0});
    EXPECT_EQ(pushforward_form(T, A, B, omega), Vec{1});
    Mat cyc(2, 4, PrimePower(3, 1), {1, 2, 1, 0, 0, 0, 0, 0});
    EXPECT_EQ(pushforward_form(cyc, A, B, omega), Vec{0});
}

TEST(Decorated, RejectsUntwistedForms) {
    auto M = mk(zl(3, 3, 2), {1, 1}, {1, 0, 0, 1});
    EXPECT_EQ(error_of([&] { make_decorated(M, Vec{1}); }), Errc::NotDecorated);
    EXPECT_NO_THROW(make_decorated(M, Vec{0}));
    EXPECT_NO_THROW(make_decorated(mk(zl(3, 3, 4), {1, 1}, {1, 0, 0, 1}), Vec{1}));
}

TEST(DInvariant, Examples) {
    auto T = torsion();
    auto free_quot = mk(T, {1, 1}, {0, 0, 1, 0});  // R/3R = Z/3 + Z/3 x
    EXPECT_EQ(d_invariant(free_quot), 0);
    EXPECT_EQ(d_invariant(mk(T, {1}, {0})), 1);
    EXPECT_FALSE(in_support(mk(T, {1}, {0})));
    EXPECT_TRUE(in_support(mk(T, {2}, {3})));
    EXPECT_EQ(d_invariant(mk(zl(), {1}, {1})), 0);
    EXPECT_TRUE(in_support(mk(zl(), {1}, {1})));
}

TEST(Crt, SplitsEigenspaces) {
    auto R = split();
    auto parts = crt_split(mk(R, {1, 1}, {1, 0, 0, 2}));
    ASSERT_EQ(parts.size(), 2u);
    EXPECT_EQ(parts[0].order(), 3);
    EXPECT_EQ(parts[1].order(), 3);
    auto p2 = crt_split(mk(R, {2}, {1}));
    std::vector<BigInt> orders;
    for (auto& p : p2) orders.push_back(p.order());
    std::sort(orders.begin(), orders.end());
    EXPECT_EQ(orders, (std::vector<BigInt>{1, 9}));
    auto kernel = torsion_part(mk(share_ring(build_ring(3, 3, {1, -2, 1}, 2)), {1, 1}, {1, 1, 0, 1}), Poly({-1, 1}, 27));
    EXPECT_EQ(kernel.order(), 3);
}

TEST(Crt, RoundTripIsIsomorphic) {
    for (const auto& R : {split(), share_ring(build_ring(3, 3, {-1, 0, 0, 1}, 2)), share_ring(build_ring(5, 3, {-1, 0, 0, 0, 1}, 2))})
        for (const auto& M : panel(R, 3)) {
            auto parts = crt_split(M);
            FiniteModule sum = zero_module(R);
            for (auto& p : parts) sum = direct_sum(sum, p);
            EXPECT_TRUE(is_isomorphic(sum, M)) << canonical_label(M);
        }
}

TEST(Enlargements, Examples) {
    auto labels = [](const std::vector<FiniteModule>& v) {
        std::set<std::string> s;
        for (auto& m : v) s.insert(canonical_label(m));
        return s;
    };
    EXPECT_EQ(labels(enlargements(zero_module(zl()), 1)), std::set<std::string>{"x-1:(1)"});
    EXPECT_EQ(labels(enlargements(mk(zl(), {1}, {1}), 1)), (std::set<std::string>{"x-1:(2)", "x-1:(1,1)"}));
    EXPECT_EQ(labels(enlargements(zero_module(split()), 1)), (std::set<std::string>{"x-1:(1)", "x+1:(1)"}));
}

TEST(Labels, CanonicalAndParsed) {
    auto R = split();
    auto M = module_from_types(R, {{1}, {2, 1}});
    const std::string label = canonical_label(M);
    EXPECT_TRUE(is_isomorphic(module_from_label(R, label), M));
    EXPECT_EQ(canonical_label(module_from_label(R, label)), label);
    EXPECT_EQ(canonical_label(zero_module(R)), "0");
    auto j = module_to_json(M);
    EXPECT_TRUE(j.contains("partition"));
    EXPECT_TRUE(is_isomorphic(module_from_json(j), M));
    auto t = parse_target(zl(3, 3, 4), "(1,1)@omega=1");
    ASSERT_TRUE(t.omega.has_value());
    auto dj = decorated_to_json(t.decorated());
    EXPECT_EQ(dj["omega"], nlohmann::json::array({1}));
    EXPECT_EQ(error_of([] { parse_target(zl(), "(1,x)"); }), Errc::ConfigError);
}
