// Acceptance suite: runs every criterion at its stated tolerance, exact
// arithmetic throughout, and prints one PASS/FAIL line per criterion.

#include "lia/cli_impl.hpp"

#include <chrono>
#include <functional>
#include <iostream>
#include <sstream>

using namespace lia;

namespace {

// splitmix64, fixed seeds
struct prng {
    std::uint64_t state;
    explicit prng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    std::uint64_t below(std::uint64_t n) { return next() % n; }
    int range(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
    rat rational(long nmax, long dmax) {
        long n = static_cast<long>(below(static_cast<std::uint64_t>(2 * nmax + 1))) - nmax;
        long d = 1 + static_cast<long>(below(static_cast<std::uint64_t>(dmax)));
        return rat(n, d);
    }
    rat price(long dmax = 16) {
        long d = 1 + static_cast<long>(below(static_cast<std::uint64_t>(dmax)));
        long n = static_cast<long>(below(static_cast<std::uint64_t>(d + 1)));
        return rat(n, d);
    }
};

int g_failures = 0;

void criterion(int k, const std::string& what, double budget_seconds,
               const std::function<void()>& body) {
    auto start = std::chrono::steady_clock::now();
    std::string verdict = "PASS";
    std::string detail;
    try {
        body();
    } catch (const std::exception& e) {
        verdict = "FAIL";
        detail = e.what();
        ++g_failures;
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (verdict == "PASS" && budget_seconds > 0 && elapsed > budget_seconds) {
        verdict = "FAIL";
        detail = "over time budget";
        ++g_failures;
    }
    std::ostringstream line;
    line << "CRITERION " << k << ": " << verdict << " - " << what << " ["
         << static_cast<int>(elapsed * 1000) << " ms]";
    if (!detail.empty()) line << " :: " << detail;
    std::cout << line.str() << std::endl;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

// --- shared random builders ---------------------------------------------------

expr_ptr random_coeff(prng& rng, const std::vector<sent_id>& sents, int depth, int max_day) {
    if (depth == 0) {
        if (rng.below(3) == 0) return fe::konst(rng.rational(2, 3));
        return fe::price(sents[rng.below(sents.size())], rng.range(1, max_day));
    }
    switch (rng.below(4)) {
    case 0:
        return fe::sum(random_coeff(rng, sents, depth - 1, max_day),
                       random_coeff(rng, sents, depth - 1, max_day));
    case 1:
        return fe::product(random_coeff(rng, sents, depth - 1, max_day),
                           random_coeff(rng, sents, depth - 1, max_day));
    case 2:
        return fe::maximum(random_coeff(rng, sents, depth - 1, max_day),
                           random_coeff(rng, sents, depth - 1, max_day));
    default: return fe::safe_recip(random_coeff(rng, sents, depth - 1, max_day));
    }
}

std::string demo_config_path() { return std::string(LIA_SOURCE_DIR) + "/configs/demo.cfg"; }
std::string demo_base_dir() { return std::string(LIA_SOURCE_DIR) + "/configs"; }

// the shared horizon-60 demo run (criteria 5, 8, 9)
session& demo_run() {
    static std::unique_ptr<session> s = [] {
        auto out = std::make_unique<session>(config::parse_file(demo_config_path()),
                                             demo_base_dir());
        out->run_to(60);
        return out;
    }();
    return *s;
}

} // namespace

// --- criteria -------------------------------------------------------------------

static void criterion_1() {
    sentence_arena arena;
    atom_table atoms;
    std::vector<sent_id> sents{arena.atom(atoms.declare("s1")), arena.atom(atoms.declare("s2")),
                               arena.atom(atoms.declare("s3"))};
    prng rng(20260808);
    for (int iter = 0; iter < 200; ++iter) {
        int n = rng.range(1, 8);
        trading_strategy t(n);
        int support = rng.range(0, 3);
        for (int i = 0; i < support; ++i)
            t.add(sents[static_cast<std::size_t>(i)], random_coeff(rng, sents, rng.range(1, 4), n));
        history h_prev(static_cast<std::size_t>(n) - 1);
        for (auto& p : h_prev)
            for (sent_id s : sents)
                if (rng.below(3)) p.set(s, rng.price());
        pricing p = find_fixed_point(t, h_prev, n);
        require(verify_fixed_point(t, h_prev, n, p),
                "fixed point failed verification on iteration " + std::to_string(iter));
    }
}

namespace {
std::vector<trading_strategy> random_budget_trader(prng& rng, sentence_arena& arena,
                                                   const std::vector<sent_id>& sents,
                                                   int horizon) {
    std::vector<trading_strategy> out;
    for (int day = 1; day <= horizon; ++day) {
        trading_strategy t(day);
        if (rng.below(4) != 0) {
            sent_id s = sents[rng.below(sents.size())];
            switch (rng.below(4)) {
            case 0: t.add(s, fe::konst(rng.rational(3, 2))); break;
            case 1: t.add(s, fe::sub(fe::konst(rat(1)), fe::price(s, day))); break;
            case 2:
                t.add(s, fe::product(fe::konst(rng.rational(2, 1)),
                                     fe::price(sents[rng.below(sents.size())],
                                               rng.range(1, day))));
                break;
            default:
                t.add(s, fe::konst(rng.rational(2, 3)));
                t.add(sents[rng.below(sents.size())], fe::konst(rng.rational(1, 2)));
                break;
            }
        }
        out.push_back(t);
    }
    (void)arena;
    return out;
}

struct budget_instance {
    sentence_arena arena;
    atom_table atoms;
    std::vector<sent_id> sents;
    std::unique_ptr<scripted_process> proc;
    std::vector<trading_strategy> raw;
    history h;
    int horizon, b;
};

std::unique_ptr<budget_instance> make_budget_instance(prng& rng, int idx) {
    auto inst = std::make_unique<budget_instance>();
    for (const char* name : {"a", "b", "c"})
        inst->sents.push_back(inst->arena.atom(inst->atoms.declare(name)));
    const char* scripts[] = {"", "1: a\n", "2: a|b\n", "1: a\n3: b\n", "1: ~c\n2: a\n"};
    inst->proc = std::make_unique<scripted_process>(scripts[idx % 5], inst->arena, inst->atoms);
    inst->horizon = rng.range(2, 6);
    inst->b = rng.range(1, 3);
    inst->raw = random_budget_trader(rng, inst->arena, inst->sents, inst->horizon);
    inst->h = history(static_cast<std::size_t>(inst->horizon));
    for (auto& p : inst->h)
        for (sent_id s : inst->sents)
            if (rng.below(2)) p.set(s, rng.price(8));
    return inst;
}
} // namespace

static void criteria_2_and_3() {
    prng rng(3141592);
    int identity_cases = 0;
    for (int iter = 0; iter < 100; ++iter) {
        auto inst = make_budget_instance(rng, iter);
        // budgeted executed trades day by day
        std::vector<affine_combination> budgeted;
        for (int n = 1; n <= inst->horizon; ++n) {
            std::vector<trading_strategy> prefix(inst->raw.begin(), inst->raw.begin() + n);
            budgeted.push_back(execute(budget(inst->arena, inst->b, prefix, inst->h, *inst->proc),
                                       inst->h));
        }
        affine_combination cum, raw_cum;
        std::vector<atom_id> scope;
        bool identity = true;
        for (int m = 1; m <= inst->horizon; ++m) {
            cum += budgeted[static_cast<std::size_t>(m) - 1];
            for (sent_id s : inst->raw[static_cast<std::size_t>(m) - 1].support())
                for (atom_id x : inst->arena.atoms_of(s)) scope.push_back(x);
            // criterion 2: the -b floor, exactly
            auto r = plausible_value_range(inst->arena, cum, inst->proc->day(m), scope);
            if (r)
                require(r->first >= rat(-inst->b),
                        "budgeted trader fell below -b on iteration " + std::to_string(iter));
            raw_cum += execute(inst->raw[static_cast<std::size_t>(m) - 1], inst->h);
            auto rr = plausible_value_range(inst->arena, raw_cum, inst->proc->day(m), scope);
            if (rr && rr->first <= rat(-inst->b)) identity = false;
        }
        // criterion 3: identity when the raw trader stays above -b
        if (identity) {
            ++identity_cases;
            for (int m = 1; m <= inst->horizon; ++m) {
                affine_combination want =
                    execute(inst->raw[static_cast<std::size_t>(m) - 1], inst->h);
                const affine_combination& got = budgeted[static_cast<std::size_t>(m) - 1];
                require(got.constant == want.constant,
                        "identity violated (cash) on iteration " + std::to_string(iter));
                for (const auto& [s, q] : want.shares) {
                    const rat* g = got.find(s);
                    require(g && *g == q,
                            "identity violated (shares) on iteration " + std::to_string(iter));
                }
                require(got.shares.size() == want.shares.size(),
                        "identity violated (support) on iteration " + std::to_string(iter));
            }
        }
    }
    require(identity_cases >= 20, "too few identity-branch instances to be meaningful");
}

static void criterion_4() {
    prng rng(2718281);
    for (int iter = 0; iter < 50; ++iter) {
        auto inst = make_budget_instance(rng, iter);
        trader raw_trader{"raw", poly_budget{}, [&inst](int n) {
                              return inst->raw[static_cast<std::size_t>(n) - 1];
                          }};
        trader_catalog cat({raw_trader});
        catalog_runtime rt_a(&cat, &inst->arena, inst->proc.get());
        catalog_runtime rt_b(&cat, &inst->arena, inst->proc.get());
        history prefix;
        for (int n = 1; n <= inst->horizon; ++n) {
            trading_strategy at_cn = combine(rt_a, n, prefix, firm_options{false, 0, 0});
            trading_strategy at_cn5 = combine(rt_b, n, prefix, firm_options{false, 0, 5});
            prefix.push_back(inst->h[static_cast<std::size_t>(n) - 1]);
            affine_combination x = execute(at_cn, prefix);
            affine_combination y = execute(at_cn5, prefix);
            require(x.constant == y.constant && x.shares.size() == y.shares.size(),
                    "truncation identity failed on iteration " + std::to_string(iter));
            for (const auto& [s, q] : x.shares) {
                const rat* o = y.find(s);
                require(o && *o == q,
                        "truncation identity failed on iteration " + std::to_string(iter));
            }
            rt_a.commit_day(prefix);
            rt_b.commit_day(prefix);
        }
    }
}

static void criterion_5() {
    session& s = demo_run();
    require(s.catalog().size() == 6, "demo catalog must hold six auditors");
    audit_trace firm = exploitation_audit_firm(s.catalog(), s.arena(), s.process(), s.prices(),
                                               60, s.firm_opts(), s.atom_cap());
    for (int n = 1; n <= 60; ++n) {
        const auto& r = firm.per_day[static_cast<std::size_t>(n) - 1];
        require(r.has_value(), "no plausible worlds at day " + std::to_string(n));
        require(r->second < rat(1), "firm max reached 1 at day " + std::to_string(n));
        require(r->first >= rat(-2), "firm min fell below -2 at day " + std::to_string(n));
    }
}

static void criterion_6() {
    sentence_arena arena;
    atom_table atoms;
    sent_id phi = arena.atom(atoms.declare("phi"));
    scripted_process d("1: phi\n", arena, atoms);
    history market(100);
    for (auto& p : market) p.set(phi, rat(1, 2));
    trader t1 = coherence_buy(phi, 1);
    audit_trace trace = exploitation_audit(arena, t1.gen, market, d, 100);
    for (int n = 2; n <= 100; ++n) {
        const auto& r = trace.per_day[static_cast<std::size_t>(n) - 1];
        require(r.has_value(), "no plausible worlds at day " + std::to_string(n));
        require(r->first == rat(n - 1, 2),
                "audited min differs from (1/2)(n-1) at day " + std::to_string(n));
    }
}

static void criterion_7() {
    sentence_arena arena;
    atom_table atoms;
    for (const char* a : {"phi1", "phi2", "phi", "psi"}) atoms.declare(a);
    expr_ptr worked = parse_feature_program("v1 := P[phi1]@7 + P[phi2]@4\n"
                                            "v2 := v1 + (-1)\n"
                                            "return 3 * max(v1, v2)",
                                            arena, atoms);
    history h(7);
    h[6].set(arena.atom(*atoms.find("phi1")), rat(4, 5));
    require(eval_feature(worked, h) == rat(12, 5), "worked example is not 12/5");

    expr_ptr gap = parse_feature_program("return max(0, P[phi]@6 - P[psi]@7)", arena, atoms);
    history h2(7);
    h2[5].set(arena.atom(*atoms.find("phi")), rat(1, 2));
    h2[6].set(arena.atom(*atoms.find("psi")), rat(1, 5));
    require(eval_feature(gap, h2) == rat(3, 10), "price-gap feature is not 3/10");

    sent_id sphi = arena.atom(*atoms.find("phi"));
    sent_id spsi = arena.atom(*atoms.find("psi"));
    sent_id schi = arena.atom(atoms.declare("chi"));
    trading_strategy bets(1);
    bets.add(sphi, fe::konst(rat(4)));
    bets.add(spsi, fe::konst(rat(-3)));
    bets.add(schi, fe::konst(rat(-1)));
    history h3(1);
    h3[0].set(sphi, rat(9, 10));
    h3[0].set(spsi, rat(1, 20));
    h3[0].set(schi, rat(49, 50));
    require(execute(bets, h3).constant == rat(-247, 100), "three-bet cash term is not -247/100");
}

static void criterion_8() {
    std::string snap_a = demo_run().snapshot_text();
    // a second full run from scratch
    session again(config::parse_file(demo_config_path()), demo_base_dir());
    again.run_to(60);
    require(again.snapshot_text() == snap_a, "two runs differ");
    // save at 20, reload, continue to 60
    session first_half(config::parse_file(demo_config_path()), demo_base_dir());
    first_half.run_to(20);
    std::string mid =
        (std::filesystem::temp_directory_path() / "lia_acceptance_mid.lia").string();
    first_half.save_snapshot(mid);
    auto resumed = session::load_snapshot(config::parse_file(demo_config_path()),
                                          demo_base_dir(), mid);
    resumed->run_to(60);
    std::filesystem::remove(mid);
    require(resumed->snapshot_text() == snap_a, "continuation differs from the straight run");
}

static void criterion_9() {
    // soft trend targets, config-pinned; not guaranteed at finite horizons
    session& s = demo_run();
    std::vector<sent_id> diag = s.diagonal_sentences();
    require(!diag.empty(), "demo config declares no diagonal schedule");
    for (int n = 51; n <= 60; ++n) {
        sent_id phi_n = diag[static_cast<std::size_t>(n - 1) % diag.size()];
        rat p = s.prices()[static_cast<std::size_t>(n) - 1].value(phi_n);
        require(p > rat(9, 10), "diagonal price at day " + std::to_string(n) + " is " + p.str());
    }
    coherence_decls decls;
    for (const auto& t : split_list(s.cfg().get("diagnostics.tracked")))
        decls.tracked.push_back(s.parse_sent(t));
    for (const auto& pr : split_list(s.cfg().get("diagnostics.exclusive"))) {
        std::string body = pr.substr(1, pr.size() - 2);
        auto comma = body.find(',');
        decls.exclusive.emplace_back(s.parse_sent(body.substr(0, comma)),
                                     s.parse_sent(body.substr(comma + 1)));
    }
    coherence_report_t rep =
        coherence_report(s.arena(), s.prices(), s.process(), decls, s.atom_cap());
    auto g5 = rep.max_gap(5), g60 = rep.max_gap(60);
    require(g5.has_value() && g60.has_value(), "coherence gaps undefined");
    require(*g60 * rat(2) <= *g5, "day-60 gap " + g60->str() + " above half of day-5 gap " +
                                      g5->str());
}

static void criterion_10() {
    sentence_arena arena;
    atom_table atoms;
    sent_id phi = arena.atom(atoms.declare("phi"));
    auto d = std::make_shared<scripted_process>("", arena, atoms);
    rat p(1, 2), eps(1, 4);
    trader conv = convergence_auditor(phi, p, eps);
    trader nondog = nondogmatism_auditor(phi);
    trader prand =
        pseudorandom_auditor([phi](int) { return phi; }, p, eps, d, &arena);
    auto ramp = [](const rat& x) { return rmax(rat(0), rmin(rat(1), x)); };

    prng rng(55555);
    for (int iter = 0; iter < 50; ++iter) {
        const int days = 30;
        std::vector<rat> ps;
        history h(days);
        for (int i = 0; i < days; ++i) {
            ps.push_back(rng.price(64));
            h[static_cast<std::size_t>(i)].set(phi, ps.back());
        }

        // convergence: H recursion
        {
            rat held(0), half = eps / rat(2);
            for (int n = 1; n <= days; ++n) {
                rat want(0);
                if (n >= 2) {
                    rat px = ps[static_cast<std::size_t>(n) - 1];
                    rat buy = ramp(((p - half) - px) / half);
                    rat sell = ramp((px - (p + half)) / half);
                    want = (rat(1) - held) * buy - held * sell;
                }
                affine_combination out = execute(conv.gen(n), h);
                rat got = out.find(phi) ? *out.find(phi) : rat(0);
                require(got == want, "convergence trade mismatch");
                held += want;
            }
        }
        // non-dogmatism: beta grid
        {
            std::vector<std::vector<rat>> beta(days + 1, std::vector<rat>(days + 1, rat(0)));
            for (int k = 1; k <= days; ++k) {
                rat spent(0);
                for (int i = k + 1; i <= days; ++i) {
                    rat trig = ramp((rat::pow2(-k) - ps[static_cast<std::size_t>(i) - 1]) /
                                    rat::pow2(-k - 1));
                    beta[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
                        trig * (rat(1) - spent);
                    spent += beta[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
                }
            }
            for (int n = 1; n <= days; ++n) {
                rat want(0);
                for (int k = 1; k <= n; ++k)
                    want += beta[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)];
                affine_combination out = execute(nondog.gen(n), h);
                rat got = out.find(phi) ? *out.find(phi) : rat(0);
                require(got == want, "non-dogmatism trade mismatch");
            }
        }
        // pseudorandom: beta recursion (phi never decided by the empty process)
        {
            std::vector<rat> trades(days + 1, rat(0));
            rat half = eps / rat(2);
            for (int n = 1; n <= days; ++n) {
                rat beta(1);
                for (int j = 1; j < n; ++j) beta -= trades[static_cast<std::size_t>(j)];
                beta = ramp(beta);
                rat trig = ramp(((p - half) - ps[static_cast<std::size_t>(n) - 1]) / half);
                trades[static_cast<std::size_t>(n)] = beta * trig;
                affine_combination out = execute(prand.gen(n), h);
                rat got = out.find(phi) ? *out.find(phi) : rat(0);
                require(got == trades[static_cast<std::size_t>(n)],
                        "pseudorandom trade mismatch");
            }
        }
    }
}

int main() {
    std::cout << "lia acceptance suite" << std::endl;
    criterion(1, "market maker returns verified fixed points on 200 random strategies", 120,
              criterion_1);
    criterion(2, "budgeted traders never fall below -b (100 random instances)", 120,
              [] { criteria_2_and_3(); });
    criterion(3, "budget transform is the identity while the raw trader stays above -b", 120,
              [] { criteria_2_and_3(); });
    criterion(4, "firm truncation at C_n and C_n+5 executes identically (50 instances)", 60,
              criterion_4);
    criterion(5, "demo-run firm audit stays below 1 and above -2, exactly (60 days)", 600,
              criterion_5);
    criterion(6, "broken-market audit equals (1/2)(n-1) through day 100", 60, criterion_6);
    criterion(7, "feature interpreter golden values: 12/5, 3/10, -247/100", 10, criterion_7);
    criterion(8, "byte-identical reruns; save/continue equals a straight run", 1200, criterion_8);
    criterion(9, "soft trends: diagonal above 9/10 late; day-60 gap at most half day-5", 600,
              criterion_9);
    criterion(10, "auditor recursions match direct-recursion oracles on 50 histories", 60,
              criterion_10);
    if (g_failures == 0) {
        std::cout << "all criteria passed" << std::endl;
        return 0;
    }
    std::cout << g_failures << " criterion(s) failed" << std::endl;
    return 1;
}
