#include <catch_amalgamated.hpp>

#include <cmath>

#include "excouple/io.hpp"
#include "excouple/solver.hpp"

using namespace excouple;

namespace {

ExactMeasure lit(const Group& g, const char* text) { return io::parse_measure(g, text); }

const Group Z = Group::integers();
const Group F2 = Group::free(2);

std::vector<Element> ints(std::initializer_list<std::int64_t> v) {
    std::vector<Element> out;
    for (auto k : v) out.push_back(Element{k});
    return out;
}

} // namespace

TEST_CASE("difference_generators examples") {
    CHECK(difference_generators(Z, ints({0, 2})) == ints({-2, 0, 2}));
    CHECK(difference_generators(F2, {F2.parse("a")}) == std::vector<Element>{F2.identity()});
    auto c3 = Group::cyclic(3);
    CHECK(difference_generators(c3, ints({0, 1})) == ints({0, 1, 2}));
    CHECK_THROWS_AS(difference_generators(Z, {}), DomainError);

    // Non-Abelian: both a b^{-1} and a^{-1} b appear.
    auto d = difference_generators(F2, {F2.parse("a"), F2.parse("b")});
    for (const char* w : {"e", "aB", "bA", "Ab", "Ba"}) CHECK(std::binary_search(d.begin(), d.end(), F2.parse(w)));
    CHECK(d.size() == 5);
}

TEST_CASE("generate_subgroup examples") {
    auto evens = generate_subgroup(Z, ints({-2, 0, 2}), 10);
    std::vector<Element> expected;
    for (std::int64_t k = -20; k <= 20; k += 2) expected.push_back(Element{k});
    CHECK(evens.elements == expected);
    CHECK_FALSE(evens.complete);
    CHECK(evens.contains(Element{8}));
    CHECK_FALSE(evens.contains(Element{7}));

    auto trivial = generate_subgroup(Z, ints({0}), 3);
    CHECK(trivial.elements == ints({0}));
    CHECK(trivial.complete);

    auto c4 = Group::cyclic(4);
    auto all = generate_subgroup(c4, ints({1}), 8);
    CHECK(all.elements == ints({0, 1, 2, 3}));
    CHECK(all.complete);

    // Stabilizes exactly at the radius: the next round would add nothing.
    CHECK(generate_subgroup(c4, ints({1}), 2).complete);
    CHECK_FALSE(generate_subgroup(c4, ints({1}), 1).complete);

    CHECK_THROWS_AS(generate_subgroup(Z, ints({1}), 0), DomainError);
    CHECK_THROWS_AS(generate_subgroup(F2, {F2.parse("a"), F2.parse("b")}, 20, 1000), ResourceError);
}

TEST_CASE("closures contain e, are inverse closed, and product closed when complete") {
    struct Case {
        Group g;
        std::vector<const char*> gens;
        std::uint64_t radius;
    };
    std::vector<Case> cases{{Group::cyclic(12), {"4", "6"}, 10},
                            {Group::product({Group::cyclic(4), Group::cyclic(6)}), {"[2;3]", "[1;0]"}, 20},
                            {Z, {"3", "-6"}, 5},
                            {F2, {"ab"}, 4},
                            {Group::free(1), {"aa"}, 6}};
    for (const auto& c : cases) {
        INFO(c.g.describe());
        std::vector<Element> gens;
        for (auto s : c.gens) gens.push_back(c.g.parse(s));
        auto cl = generate_subgroup(c.g, gens, c.radius);
        CHECK(cl.contains(c.g.identity()));
        for (const auto& e : cl.elements)
            if (cl.complete) CHECK(cl.contains(c.g.inv(e)));
        if (cl.complete)
            for (const auto& a : cl.elements)
                for (const auto& b : cl.elements) CHECK(cl.contains(c.g.mul(a, b)));
    }
    // Finite groups stabilize.
    CHECK(generate_subgroup(Group::cyclic(12), ints({4, 6}), 10).elements == ints({0, 2, 4, 6, 8, 10}));
}

TEST_CASE("membership verdict examples") {
    auto mu = lit(Z, "0:1/2; 2:1/2");
    auto yes = gs_membership(mu, Element{4}, 20);
    CHECK(yes.in_gp());
    CHECK(yes.in_gs());
    CHECK(yes.gp_n0 == std::optional<std::uint64_t>(2));

    auto no = gs_membership(mu, Element{3}, 20);
    CHECK_FALSE(no.in_gp());
    CHECK(no.gs == GsStatus::NoUpTo);
    CHECK(no.n_max == 20);

    auto f = gs_membership(lit(F2, "a;A;b;B"), F2.parse("ab"), 6);
    CHECK(f.gp_n0 == std::optional<std::uint64_t>(1));
    CHECK(f.gs == GsStatus::Unknown);
    CHECK_FALSE(f.commutation_holds);

    // Commuting non-Abelian case: x = a with mu on powers of a.
    auto pa = gs_membership(lit(F2, "e;a"), F2.parse("a"), 4);
    CHECK(pa.in_gs());
    CHECK(pa.commutation_holds);

    CHECK(std::string(to_string(GsStatus::Yes)) == "Yes");
    CHECK(std::string(to_string(GsStatus::NoUpTo)) == "NoUpTo");
    CHECK(std::string(to_string(GsStatus::Unknown)) == "Unknown");
}

TEST_CASE("G_s for mu on {0, 2} is the even integers") {
    auto mu = lit(Z, "0:1/2; 2:1/2");
    for (std::int64_t x = -20; x <= 20; ++x) {
        INFO("x = " << x);
        auto v = gs_membership(mu, Element{x}, 20);
        CHECK(v.in_gs() == (x % 2 == 0));
        if (v.in_gs()) CHECK(v.in_gp());
    }

    auto c6 = Group::cyclic(6);
    auto nu = lit(c6, "0;2");
    std::vector<Element> yes;
    for (std::int64_t x = 0; x < 6; ++x)
        if (gs_membership(nu, Element{x}, 12).in_gs()) yes.push_back(Element{x});
    CHECK(yes == ints({0, 2, 4}));
    CHECK(generate_subgroup(c6, difference_generators(c6, nu.support()), 6).elements == yes);
}

TEST_CASE("atomic case: verdict Yes iff x lies in the subgroup generated by A - A") {
    struct Case {
        Group g;
        const char* mu;
        std::vector<const char*> xs;
    };
    const Group Z2 = Group::lattice(2);
    const Group p = Group::product({Group::cyclic(4), Z});
    std::vector<Case> cases{
        {Z, "1;4", {"-9", "-7", "-3", "0", "1", "3", "6", "12", "13", "18"}},
        {Z, "0:1/3; 5:1/6; 15:1/2", {"5", "10", "-15", "7", "20", "25", "3"}},
        {Group::cyclic(12), "1;5;9", {"0", "1", "2", "4", "6", "8", "11"}},
        {Z2, "(0,0);(1,0);(0,1)", {"(1,-1)", "(2,3)", "(-2,1)", "(0,0)"}},
        {Z2, "(0,0);(2,0);(0,2)", {"(1,0)", "(2,-2)", "(4,2)", "(1,1)"}},
        {p, "[0;0];[2;1]", {"[2;1]", "[0;2]", "[1;0]", "[2;0]", "[0;3]"}},
    };
    for (const auto& c : cases) {
        auto mu = lit(c.g, c.mu);
        auto closure = generate_subgroup(c.g, difference_generators(c.g, mu.support()), 40);
        for (auto xt : c.xs) {
            INFO(c.g.describe() << " mu=" << c.mu << " x=" << xt);
            Element x = c.g.parse(xt);
            CHECK(gs_membership(mu, x, 12).in_gs() == closure.contains(x));
        }
    }
}

TEST_CASE("overlap persists from n0 up to n_max") {
    struct Case {
        Group g;
        const char* mu;
        const char* x;
    };
    std::vector<Case> cases{{Z, "0:1/2; 2:1/2", "4"},
                            {Z, "0;1;2;3", "7"},
                            {Group::cyclic(7), "0;3", "1"},
                            {F2, "a;A;b;B", "ab"},
                            {F2, "a;A;b;B", "aabb"}};
    for (const auto& c : cases) {
        INFO(c.g.describe() << " x=" << c.x);
        auto mu = lit(c.g, c.mu);
        Element x = c.g.parse(c.x);
        auto v = gs_membership(mu, x, 6);
        REQUIRE(v.in_gp());
        for (std::uint64_t n = *v.gp_n0; n <= 6; ++n) {
            auto p = power(mu, n);
            CHECK_FALSE(meet(p, shift(c.g.inv(x), p)).is_zero());
        }
    }
}

TEST_CASE("G_s is closed under x^{-1} y") {
    auto mu = lit(Z, "0:1/2; 2:1/2");
    CHECK(gs_membership(mu, Z.mul(Z.inv(Element{2}), Element{4}), 20).in_gs());
    CHECK(gs_membership(mu, Z.mul(Z.inv(Element{6}), Element{6}), 1).in_gs());

    std::vector<Element> candidates;
    for (std::int64_t x = -20; x <= 20; ++x) candidates.push_back(Element{x});
    Rng rng(17);
    auto pairs = sample_yes_pairs(mu, candidates, 100, 20, rng);
    REQUIRE(pairs.size() == 100);
    for (const auto& [x, y] : pairs) {
        CHECK(x.code()[0] % 2 == 0);
        CHECK(y.code()[0] % 2 == 0);
    }
    auto rep = gs_group_property_check(mu, pairs, 20);
    CHECK(rep.checked == 100);
    CHECK(rep.violations.empty());

    auto c6 = Group::cyclic(6);
    auto nu = lit(c6, "0;2");
    std::vector<std::pair<Element, Element>> all;
    for (std::int64_t a = 0; a < 6; ++a)
        for (std::int64_t b = 0; b < 6; ++b) all.emplace_back(Element{a}, Element{b});
    auto crep = gs_group_property_check(nu, all, 12);
    CHECK(crep.checked == 9);
    CHECK(crep.violations.empty());

    CHECK_THROWS_AS(gs_group_property_check(lit(F2, "a;A"), {}, 4), DomainError);
    CHECK_THROWS_AS(sample_yes_pairs(mu, ints({1, 3}), 5, 10, rng), DomainError);
}

TEST_CASE("gambler's ruin against the closed form") {
    CHECK(std::abs(gamblers_ruin_hit_probability(1, 0.75) - 1.0 / 3) <= 1e-12);
    CHECK(std::abs(gamblers_ruin_hit_probability(2, 0.75) - 1.0 / 9) <= 1e-12);
    for (double p : {0.6, 0.7, 0.9})
        for (std::uint64_t k = 1; k <= 5; ++k) {
            INFO("p = " << p << " k = " << k);
            CHECK(std::abs(gamblers_ruin_hit_probability(k, p) - std::pow((1 - p) / p, double(k))) <= 1e-10);
        }
    CHECK(gamblers_ruin_hit_probability(0, 0.75) == 1.0);
    CHECK(gamblers_ruin_hit_probability(3, 0.3) == Catch::Approx(1.0).margin(1e-9));
    CHECK_THROWS_AS(gamblers_ruin_hit_probability(1, 1.0), DomainError);
    CHECK_THROWS_AS(gamblers_ruin_hit_probability(90, 0.75), DomainError);
}

TEST_CASE("free-group first-letter separation") {
    const std::size_t runs = 20'000;
    auto rep = free_group_tail_separation(200, runs, 123, 1);
    CHECK(rep.hit_from_1 == Catch::Approx(1.0 / 3).margin(1e-12));
    CHECK(rep.target_S == 0.25);
    CHECK(rep.target_Sab == Catch::Approx(1.0 / 36).margin(1e-12));
    CHECK_FALSE(rep.pre_asymptotic);
    const double se_s = std::sqrt(0.25 * 0.75 / runs), se_x = std::sqrt((1.0 / 36) * (35.0 / 36) / runs);
    CHECK(std::abs(rep.p_first_b_S - 0.25) <= 4 * se_s);
    CHECK(std::abs(rep.p_first_b_Sab - 1.0 / 36) <= 4 * se_x);
    CHECK(rep.ci_S.first <= rep.p_first_b_S);
    CHECK(rep.ci_S.second >= rep.p_first_b_S);

    auto threaded = free_group_tail_separation(200, runs, 123, 4);
    CHECK(threaded.p_first_b_S == rep.p_first_b_S);
    CHECK(threaded.p_first_b_Sab == rep.p_first_b_Sab);

    CHECK(free_group_tail_separation(10, 100, 1).pre_asymptotic);
    CHECK_THROWS_AS(free_group_tail_separation(10, 0, 1), DomainError);
}
