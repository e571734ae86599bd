#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lia/feature.hpp"
#include "lia/feature_parse.hpp"
#include "test_support.hpp"

#include <functional>

using namespace lia;

namespace {

struct fixture {
    sentence_arena arena;
    atom_table atoms;
    sent_id phi1, phi2, phi, psi;
    fixture() {
        phi1 = arena.atom(atoms.declare("phi1"));
        phi2 = arena.atom(atoms.declare("phi2"));
        phi = arena.atom(atoms.declare("phi"));
        psi = arena.atom(atoms.declare("psi"));
    }
    expr_ptr parse(const std::string& text) {
        return parse_feature_program(text, arena, atoms);
    }
    history hist(int days) { return history(static_cast<std::size_t>(days)); }
};

// random core-grammar expression generator for property tests
expr_ptr random_expr(testutil::prng& rng, fixture& f, int depth, int max_day) {
    if (depth == 0) {
        switch (rng.below(3)) {
        case 0: return fe::konst(rng.rational(4, 4));
        default:
            return fe::price(rng.below(2) ? f.phi : f.psi, rng.range(1, max_day));
        }
    }
    switch (rng.below(5)) {
    case 0: return fe::sum(random_expr(rng, f, depth - 1, max_day), random_expr(rng, f, depth - 1, max_day));
    case 1: return fe::product(random_expr(rng, f, depth - 1, max_day), random_expr(rng, f, depth - 1, max_day));
    case 2: return fe::maximum(random_expr(rng, f, depth - 1, max_day), random_expr(rng, f, depth - 1, max_day));
    case 3: return fe::safe_recip(random_expr(rng, f, depth - 1, max_day));
    default: return random_expr(rng, f, depth - 1, max_day);
    }
}

history random_history(testutil::prng& rng, fixture& f, int days) {
    history h(static_cast<std::size_t>(days));
    for (auto& p : h) {
        if (rng.below(4)) p.set(f.phi, rng.price());
        if (rng.below(4)) p.set(f.psi, rng.price());
    }
    return h;
}

} // namespace

TEST_CASE("worked example program evaluates to 12/5 and has rank 7") {
    fixture f;
    expr_ptr p = f.parse("v1 := P[phi1]@7 + P[phi2]@4\n"
                         "v2 := v1 + (-1)\n"
                         "return 3 * max(v1, v2)");
    CHECK(rank(p) == 7);
    history h = f.hist(7);
    h[6].set(f.phi1, rat(4, 5)); // day 7
    // phi2 absent on day 4: finite support reads 0
    CHECK(eval_feature(p, h) == rat(12, 5));
}

TEST_CASE("price-gap feature evaluates to 3/10 and has rank 7") {
    fixture f;
    expr_ptr p = f.parse("return max(0, P[phi]@6 - P[psi]@7)");
    CHECK(rank(p) == 7);
    history h = f.hist(7);
    h[5].set(f.phi, rat(1, 2));
    h[6].set(f.psi, rat(1, 5));
    CHECK(eval_feature(p, h) == rat(3, 10));
}

TEST_CASE("safe reciprocation of a price is 1") {
    fixture f;
    expr_ptr p = f.parse("return saferecip(P[phi]@3)");
    history h = f.hist(3);
    h[2].set(f.phi, rat(2, 3));
    CHECK(eval_feature(p, h) == rat(1));
    CHECK(bound(p) == rat(1));
}

TEST_CASE("constant program") {
    fixture f;
    expr_ptr p = f.parse("return 1/2");
    CHECK(rank(p) == 0);
    history empty;
    CHECK(eval_feature(p, empty) == rat(1, 2));
}

TEST_CASE("parse errors") {
    fixture f;
    CHECK_THROWS_AS(f.parse("return v9"), parse_error);               // undefined variable
    CHECK_THROWS_AS(f.parse("v1 := P[phi]@0\nreturn v1"), parse_error); // day must be positive
    CHECK_THROWS_AS(f.parse("v1 := 1"), parse_error);                 // no return
    CHECK_THROWS_AS(f.parse("return 1 +"), parse_error);
    CHECK_THROWS_AS(f.parse("return P[zebra]@1"), parse_error);       // undeclared atom
    CHECK_THROWS_AS(f.parse("return ind(0; P[phi]@1 > 1/2)"), parse_error);
    CHECK_THROWS_AS(f.parse("v1 := 1\nv1 := 2\nreturn v1"), parse_error);
    CHECK_THROWS_AS(f.parse("return P[phi]@n"), parse_error);         // template syntax outside template
}

TEST_CASE("rank counts only reachable price symbols") {
    fixture f;
    expr_ptr p = f.parse("v1 := P[phi]@9\n"
                         "v2 := P[psi]@2\n"
                         "return v2 + 1");
    CHECK(rank(p) == 2);
    // reachability oracle: histories differing only at day 9 evaluate equally
    history h1 = f.hist(9), h2 = f.hist(9);
    h1[1].set(f.psi, rat(1, 3));
    h2[1].set(f.psi, rat(1, 3));
    h1[8].set(f.phi, rat(1));
    h2[8].set(f.phi, rat(1, 7));
    CHECK(eval_feature(p, h1) == eval_feature(p, h2));
}

TEST_CASE("rank exceeding history is an error") {
    fixture f;
    expr_ptr p = f.parse("return P[phi]@5");
    history h = f.hist(4);
    CHECK_THROWS_AS(eval_feature(p, h), eval_error);
}

TEST_CASE("bound spec examples") {
    fixture f;
    CHECK(bound(f.parse("return P[phi]@3")) == rat(1));
    // grid-sample oracle for 2*P[phi]@1 - 3: |value| <= 5 at all sampled prices
    expr_ptr p = f.parse("return 2*P[phi]@1 + (-3)");
    CHECK(bound(p) == rat(5));
    for (int i = 0; i <= 4; ++i) {
        history h = f.hist(1);
        h[0].set(f.phi, rat(i, 4));
        CHECK(eval_feature(p, h).abs() <= rat(5));
    }
}

TEST_CASE("|eval| <= bound property") {
    fixture f;
    testutil::prng rng(123);
    for (int iter = 0; iter < 200; ++iter) {
        expr_ptr e = random_expr(rng, f, rng.range(1, 4), 5);
        history h = random_history(rng, f, 5);
        CHECK(eval_feature(e, h).abs() <= bound(e));
    }
}

TEST_CASE("interval analysis brackets eval and refines bound on clamps") {
    fixture f;
    testutil::prng rng(321);
    for (int iter = 0; iter < 200; ++iter) {
        expr_ptr e = random_expr(rng, f, rng.range(1, 4), 4);
        if (rng.below(2)) e = fe::clamp01(e);
        history h = random_history(rng, f, 4);
        interval_analyzer ia;
        auto r = ia.range(e);
        rat v = eval_feature(e, h);
        CHECK(r.lo <= v);
        CHECK(v <= r.hi);
    }
    // clamp01 has interval exactly [0,1] regardless of the inside
    interval_analyzer ia;
    auto r = ia.range(fe::clamp01(f.parse("return 1000 * P[phi]@1 + (-500)")));
    CHECK(r.lo == rat(0));
    CHECK(r.hi == rat(1));
}

TEST_CASE("eval is invariant beyond the rank") {
    fixture f;
    testutil::prng rng(55);
    for (int iter = 0; iter < 100; ++iter) {
        expr_ptr e = random_expr(rng, f, 3, 4);
        history h1 = random_history(rng, f, 6);
        history h2 = h1;
        h2[4] = pricing();
        h2[5] = pricing();
        h2[4].set(f.phi, rng.price());
        h2[5].set(f.psi, rng.price());
        CHECK(eval_feature(e, h1) == eval_feature(e, h2));
    }
}

TEST_CASE("desugared min and abs match their definitions pointwise") {
    fixture f;
    testutil::prng rng(77);
    for (int iter = 0; iter < 100; ++iter) {
        expr_ptr a = random_expr(rng, f, 2, 3);
        expr_ptr b = random_expr(rng, f, 2, 3);
        history h = random_history(rng, f, 3);
        rat va = eval_feature(a, h), vb = eval_feature(b, h);
        CHECK(eval_feature(fe::minimum(a, b), h) == rmin(va, vb));
        CHECK(eval_feature(fe::absval(a), h) == va.abs());
        CHECK(eval_feature(fe::minimum(a, b), h) ==
              -eval_feature(fe::maximum(fe::neg(a), fe::neg(b)), h));
    }
}

TEST_CASE("continuous threshold indicator matches the piecewise definition") {
    fixture f;
    rat delta(1, 10);
    auto ind_at = [&](const rat& x, const rat& y) {
        expr_ptr e = ind_threshold(delta, fe::konst(x), fe::konst(y));
        history empty;
        return eval_feature(e, empty);
    };
    SUBCASE("spec examples at delta=1/10") {
        CHECK(ind_at(rat(1, 2), rat(1, 2)) == rat(0));              // x == y
        CHECK(ind_at(rat(1, 2) + rat(1, 20), rat(1, 2)) == rat(1, 2)); // ramp midpoint
        CHECK(ind_at(rat(1, 2) + rat(1, 5), rat(1, 2)) == rat(1));  // past the band
    }
    SUBCASE("piecewise formula on a rational grid, exact") {
        for (int i = -30; i <= 30; ++i) {
            rat x(i, 20), y(0);
            rat expect = x <= y           ? rat(0)
                         : x <= y + delta ? (x - y) / delta
                                          : rat(1);
            CHECK(ind_at(x, y) == expect);
            CHECK(ind_at(x, y) >= rat(0));
            CHECK(ind_at(x, y) <= rat(1));
        }
    }
    SUBCASE("mirrored direction and the two-sided band") {
        expr_ptr px = fe::price(f.phi, 1);
        expr_ptr lt = ind_threshold(delta, px, fe::konst(rat(1, 2)), ind_dir::less);
        expr_ptr band = ind_between(delta, px, rat(1, 4), rat(3, 4));
        for (int i = 0; i <= 20; ++i) {
            history h = f.hist(1);
            rat x(i, 20);
            h[0].set(f.phi, x);
            rat lt_expect = x >= rat(1, 2)           ? rat(0)
                            : x >= rat(1, 2) - delta ? (rat(1, 2) - x) / delta
                                                     : rat(1);
            CHECK(eval_feature(lt, h) == lt_expect);
            rat b = eval_feature(band, h);
            CHECK(b >= rat(0));
            CHECK(b <= rat(1));
            if (x > rat(1, 4) + delta && x < rat(3, 4) - delta) CHECK(b == rat(1));
            if (x <= rat(1, 4) || x >= rat(3, 4)) CHECK(b == rat(0));
        }
    }
    CHECK_THROWS(ind_threshold(rat(0), fe::konst(rat(0)), fe::konst(rat(0))));
}

TEST_CASE("ind parses from program text") {
    fixture f;
    expr_ptr p = f.parse("return ind(1/10; P[phi]@1 > 1/2)");
    history h = f.hist(1);
    h[0].set(f.phi, rat(11, 20));
    CHECK(eval_feature(p, h) == rat(1, 2));
    expr_ptr q = f.parse("return ind(1/10; 1/4 < P[phi]@1 < 3/4)");
    CHECK(eval_feature(q, h) == rat(1));
}

TEST_CASE("guarded division") {
    fixture f;
    // phi price / psi price with psi >= 1/4
    expr_ptr e = fe::guarded_div(fe::price(f.phi, 1), fe::price(f.psi, 1), rat(1, 4));
    history h = f.hist(1);
    h[0].set(f.phi, rat(1, 3));
    h[0].set(f.psi, rat(1, 2));
    CHECK(eval_feature(e, h) == rat(2, 3));
    CHECK_THROWS(fe::guarded_div(fe::konst(rat(1)), fe::konst(rat(1)), rat(0)));
}

TEST_CASE("slope is a Lipschitz constant on perturbed histories") {
    fixture f;
    testutil::prng rng(202);
    for (int iter = 0; iter < 120; ++iter) {
        expr_ptr e = random_expr(rng, f, rng.range(1, 3), 3);
        history h1 = random_history(rng, f, 3);
        history h2 = h1;
        rat inf_dist(0);
        for (auto& p : h2) {
            pricing np;
            for (const auto& [s, v] : p.items()) {
                rat delta = rng.rational(1, 10) * rat(1, 4);
                rat nv = rmax(rat(0), rmin(rat(1), v + delta));
                inf_dist = rmax(inf_dist, (nv - v).abs());
                np.set(s, nv);
            }
            p = np;
        }
        slope_analyzer sa;
        rat lhs = (eval_feature(e, h1) - eval_feature(e, h2)).abs();
        CHECK(lhs <= sa.slope(e) * inf_dist);
    }
}

TEST_CASE("bindings are shared subgraphs, evaluated once") {
    fixture f;
    // evaluation count is observable through the step meter
    expr_ptr p = f.parse("v1 := P[phi]@1 + P[psi]@1\n"
                         "v2 := v1 * v1\n"
                         "return v2 + v1");
    history h = f.hist(1);
    h[0].set(f.phi, rat(1, 3));
    step_meter m(1000000);
    std::uint64_t before, after;
    {
        metered_scope sc(m);
        before = m.used;
        eval_feature(p, h);
        after = m.used;
    }
    // v1 has 3 nodes; evaluating it twice more would add >= 6 ticks
    CHECK(after - before <= 8);
}
