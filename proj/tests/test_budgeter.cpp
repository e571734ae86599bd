#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lia/budgeter.hpp"
#include "test_support.hpp"

using namespace lia;

namespace {

struct fixture {
    sentence_arena arena;
    atom_table atoms;
    sent_id a, b;
    fixture() {
        a = arena.atom(atoms.declare("a"));
        b = arena.atom(atoms.declare("b"));
    }
};

// random strategy sequences over two atoms, constant or price-reading coeffs
std::vector<trading_strategy> random_trader(testutil::prng& rng, fixture& f, int horizon) {
    std::vector<trading_strategy> out;
    for (int day = 1; day <= horizon; ++day) {
        trading_strategy t(day);
        if (rng.below(3) != 0) {
            sent_id s = rng.below(2) ? f.a : f.b;
            expr_ptr c;
            switch (rng.below(4)) {
            case 0: c = fe::konst(rng.rational(3, 2)); break;
            case 1: c = fe::sub(fe::konst(rng.rational(1, 1)), fe::price(s, day)); break;
            case 2:
                c = fe::product(fe::konst(rng.rational(2, 1)),
                                fe::price(rng.below(2) ? f.a : f.b, rng.range(1, day)));
                break;
            default: c = fe::konst(rng.rational(2, 3)); break;
            }
            t.add(s, c);
            if (rng.below(3) == 0) t.add(rng.below(2) ? f.a : f.b, fe::konst(rng.rational(1, 2)));
        }
        out.push_back(t);
    }
    return out;
}

history random_history(testutil::prng& rng, fixture& f, int days) {
    history h(static_cast<std::size_t>(days));
    for (auto& p : h) {
        p.set(f.a, rng.price(8));
        p.set(f.b, rng.price(8));
    }
    return h;
}

// executed trades of the budgeted trader, built day by day
std::vector<affine_combination> run_budgeted(fixture& f, int b,
                                             const std::vector<trading_strategy>& raw,
                                             const history& h, deductive_process& d) {
    std::vector<affine_combination> out;
    for (int n = 1; n <= static_cast<int>(raw.size()); ++n) {
        std::vector<trading_strategy> prefix(raw.begin(), raw.begin() + n);
        trading_strategy bn = budget(f.arena, b, prefix, h, d);
        out.push_back(execute(bn, h));
    }
    return out;
}

} // namespace

TEST_CASE("plausible_value_range spec examples") {
    fixture f;
    scripted_process d_empty("", f.arena, f.atoms);
    scripted_process d_a("1: a\n", f.arena, f.atoms);
    SUBCASE("zero trader") {
        std::vector<trading_strategy> t{trading_strategy(1)};
        history h(1);
        auto r = plausible_value_range(f.arena, t, h, d_empty, 1);
        REQUIRE(r.has_value());
        CHECK(r->first == rat(0));
        CHECK(r->second == rat(0));
    }
    SUBCASE("buy 1 at 1/2 with empty D spans [-1/2, 1/2]") {
        std::vector<trading_strategy> t(1, trading_strategy(1));
        t[0].add(f.a, fe::konst(rat(1)));
        history h(1);
        h[0].set(f.a, rat(1, 2));
        auto r = plausible_value_range(f.arena, t, h, d_empty, 1);
        REQUIRE(r.has_value());
        CHECK(r->first == rat(-1, 2));
        CHECK(r->second == rat(1, 2));
    }
    SUBCASE("same trade with a in D collapses to 1/2") {
        std::vector<trading_strategy> t(1, trading_strategy(1));
        t[0].add(f.a, fe::konst(rat(1)));
        history h(1);
        h[0].set(f.a, rat(1, 2));
        auto r = plausible_value_range(f.arena, t, h, d_a, 1);
        REQUIRE(r.has_value());
        CHECK(r->first == rat(1, 2));
        CHECK(r->second == rat(1, 2));
    }
    SUBCASE("inconsistent D returns the empty marker") {
        scripted_process bad("1: a; ~a\n", f.arena, f.atoms);
        std::vector<trading_strategy> t{trading_strategy(1)};
        history h(1);
        CHECK(!plausible_value_range(f.arena, t, h, bad, 1).has_value());
    }
}

TEST_CASE("budget passes through a trader that never nears -b") {
    fixture f;
    scripted_process d("", f.arena, f.atoms);
    // tiny trades: cumulative value can never reach -1
    std::vector<trading_strategy> raw;
    for (int day = 1; day <= 4; ++day) {
        trading_strategy t(day);
        t.add(f.a, fe::konst(rat(1, 10)));
        raw.push_back(t);
    }
    history h = history(4);
    for (auto& p : h) p.set(f.a, rat(1, 2));
    for (int n = 1; n <= 4; ++n) {
        std::vector<trading_strategy> prefix(raw.begin(), raw.begin() + n);
        trading_strategy bn = budget(f.arena, 1, prefix, h, d);
        affine_combination got = execute(bn, h);
        affine_combination want = execute(raw[static_cast<std::size_t>(n) - 1], h);
        CHECK(got.constant == want.constant);
        CHECK(*got.find(f.a) == *want.find(f.a));
    }
}

TEST_CASE("a realized breach zeroes the trader from the next day on") {
    fixture f;
    scripted_process d("", f.arena, f.atoms);
    // day 1: buy one share of a at price 1; in the a=false world the value is -1
    std::vector<trading_strategy> raw;
    trading_strategy t1(1);
    t1.add(f.a, fe::konst(rat(1)));
    raw.push_back(t1);
    trading_strategy t2(2);
    t2.add(f.a, fe::konst(rat(1)));
    raw.push_back(t2);
    history h(2);
    h[0].set(f.a, rat(1));
    h[1].set(f.a, rat(1, 2));
    trading_strategy b2 = budget(f.arena, 1, raw, h, d);
    CHECK(b2.is_zero());
    // with the roomier budget b=2 the same trader is untouched
    trading_strategy b2_roomy = budget(f.arena, 2, raw, h, d);
    CHECK(!b2_roomy.is_zero());
}

TEST_CASE("scaling caps a deep sell to lose at most b in every plausible world") {
    fixture f;
    scripted_process d("", f.arena, f.atoms);
    // day-1 strategy sells 3 shares of a
    std::vector<trading_strategy> raw(1, trading_strategy(1));
    raw[0].add(f.a, fe::konst(rat(-3)));
    // brute force over the <= 2 worlds and a grid of day-1 prices
    for (int num = 0; num <= 8; ++num) {
        history h(1);
        h[0].set(f.a, rat(num, 8));
        trading_strategy b1 = budget(f.arena, 1, raw, h, d);
        auto r = plausible_value_range(f.arena, {b1}, h, d, 1);
        REQUIRE(r.has_value());
        CHECK(r->first >= rat(-1));
    }
}

TEST_CASE("budget lemma properties on random instances") {
    fixture f;
    testutil::prng rng(909);
    const char* scripts[] = {"", "1: a\n", "2: a|b\n", "1: a\n3: b\n"};
    int identity_cases = 0;
    for (int iter = 0; iter < 60; ++iter) {
        int horizon = rng.range(2, 5);
        int b = rng.range(1, 3);
        scripted_process d(scripts[rng.below(4)], f.arena, f.atoms);
        auto raw = random_trader(rng, f, horizon);
        history h = random_history(rng, f, horizon);
        auto budgeted = run_budgeted(f, b, raw, h, d);

        // Lemma part 2: min plausible value of the budgeted trader >= -b at
        // every day, exactly
        affine_combination cum;
        std::vector<atom_id> scope;
        bool identity_applies = true;
        affine_combination raw_cum;
        for (int m = 1; m <= horizon; ++m) {
            cum += budgeted[static_cast<std::size_t>(m) - 1];
            for (sent_id s : raw[static_cast<std::size_t>(m) - 1].support())
                for (atom_id x : f.arena.atoms_of(s)) scope.push_back(x);
            auto r = plausible_value_range(f.arena, cum, d.day(m), scope);
            if (r) CHECK(r->first >= rat(-b));

            raw_cum += execute(raw[static_cast<std::size_t>(m) - 1], h);
            auto rr = plausible_value_range(f.arena, raw_cum, d.day(m), scope);
            if (rr && rr->first <= rat(-b)) identity_applies = false;
        }
        // Lemma part 1: if the raw trader never hits -b, budgeted == raw
        if (identity_applies) {
            ++identity_cases;
            for (int m = 1; m <= horizon; ++m) {
                affine_combination want = execute(raw[static_cast<std::size_t>(m) - 1], h);
                const affine_combination& got = budgeted[static_cast<std::size_t>(m) - 1];
                CHECK(got.constant == want.constant);
                CHECK(got.shares.size() == want.shares.size());
                for (const auto& [s, q] : want.shares) {
                    REQUIRE(got.find(s) != nullptr);
                    CHECK(*got.find(s) == q);
                }
            }
        }
    }
    CHECK(identity_cases > 5); // the identity branch is actually exercised
}

TEST_CASE("budget of the zero trader is zero for all b") {
    fixture f;
    scripted_process d("1: a\n", f.arena, f.atoms);
    std::vector<trading_strategy> raw{trading_strategy(1), trading_strategy(2)};
    history h(2);
    for (int b = 1; b <= 3; ++b) CHECK(budget(f.arena, b, raw, h, d).is_zero());
}

TEST_CASE("scale factor stays in [0,1] on every history") {
    fixture f;
    scripted_process d("", f.arena, f.atoms);
    testutil::prng rng(111);
    for (int iter = 0; iter < 40; ++iter) {
        int horizon = rng.range(1, 4);
        auto raw = random_trader(rng, f, horizon);
        history h = random_history(rng, f, horizon);
        trading_strategy bn = budget(f.arena, rng.range(1, 3), raw, h, d);
        if (bn.is_zero() || raw.back().is_zero()) continue;
        affine_combination got = execute(bn, h);
        affine_combination want = execute(raw.back(), h);
        for (const auto& [s, q] : want.shares) {
            if (q.is_zero()) continue;
            const rat* g = got.find(s);
            rat scale = g ? *g / q : rat(0);
            CHECK(scale >= rat(0));
            CHECK(scale <= rat(1));
        }
    }
}

TEST_CASE("budget argument validation") {
    fixture f;
    scripted_process d("", f.arena, f.atoms);
    std::vector<trading_strategy> raw{trading_strategy(1)};
    history h(1);
    CHECK_THROWS_AS(budget(f.arena, 0, raw, h, d), config_error);
    CHECK_THROWS_AS(budget(f.arena, 1, {}, h, d), eval_error);
}
