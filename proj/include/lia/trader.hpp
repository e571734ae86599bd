#pragma once

// Traders: deterministic generators day n -> day-n strategy, run under a
// polynomial step budget. Any overrun or malformed output becomes the zero
// strategy, so the catalog contract (valid n-strategy, every day, no matter
// what) holds by construction. The auditor library transcribes the
// convergence, coherence, non-dogmatism and pseudorandom-frequency traders.
//
// Recursively-carried holdings are routed through clamp01 nodes. The carried
// quantities provably stay in [0,1] on every history, so the clamp is the
// identity; it keeps the interval analysis of deep recursions tight, which
// the trading firm's tail collapse relies on.

#include "lia/deduction.hpp"
#include "lia/feature.hpp"
#include "lia/feature_parse.hpp"
#include "lia/logic.hpp"
#include "lia/strategy.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace lia {

// f(n) = sum coeffs[i] * n^i, saturating; deterministic step cap.
struct poly_budget {
    std::vector<std::uint64_t> coeffs{0, 0, 0, 100};

    std::uint64_t eval(int n) const {
        std::uint64_t out = 0, p = 1;
        for (std::uint64_t c : coeffs) {
            out += c * p;
            p *= static_cast<std::uint64_t>(n);
        }
        return out;
    }
};

using strategy_gen = std::function<trading_strategy(int)>;

struct trader {
    std::string name;
    poly_budget budget;
    strategy_gen gen;
};

// Runs the generator under its deterministic step budget; timeout or invalid
// output (wrong day, rank > day) maps to the zero strategy.
inline trader ect_wrap(trader t) {
    auto inner = t.gen;
    poly_budget b = t.budget;
    t.gen = [inner, b](int n) -> trading_strategy {
        step_meter meter(b.eval(n));
        try {
            metered_scope scope(meter);
            trading_strategy s = inner(n);
            if (s.day() != n || !s.well_formed()) return trading_strategy(n);
            return s;
        } catch (const budget_exceeded&) {
            return trading_strategy(n);
        } catch (const template_day_underflow&) {
            return trading_strategy(n);
        }
    };
    return t;
}

// Trader k of a catalog emits the zero strategy before day k.
inline trader zero_before(trader t, int k) {
    auto inner = t.gen;
    t.gen = [inner, k](int n) -> trading_strategy {
        if (n < k) return trading_strategy(n);
        return inner(n);
    };
    return t;
}

class trader_catalog {
    std::vector<trader> traders_;

public:
    trader_catalog() = default;

    // Wraps each trader with its budget cap and the zero-before-k rule;
    // enumeration order is the configuration order and is stable.
    explicit trader_catalog(std::vector<trader> raw) {
        int k = 1;
        for (auto& t : raw) traders_.push_back(zero_before(ect_wrap(std::move(t)), k++));
    }

    int size() const { return static_cast<int>(traders_.size()); }
    const trader& at(int k) const { return traders_.at(static_cast<std::size_t>(k) - 1); }
    trading_strategy strategy(int k, int n) const { return at(k).gen(n); }
};

// --- auditor library ----------------------------------------------------------

// Buys phi below p-eps and sells above p+eps, holding H_n in [0,1]:
//   T_n[phi] = (1-H_{n-1})*Ind_{eps/2}(phi^{*n} < p-eps/2)
//            -    H_{n-1} *Ind_{eps/2}(phi^{*n} > p+eps/2),  H_n = H_{n-1}+T_n,
// with T_1 = 0, H_1 = 0.
inline expr_ptr convergence_trade_expr(sent_id phi, const rat& p, const rat& eps, int n,
                                       expr_ptr* holdings_out = nullptr) {
    rat half = eps / rat(2);
    expr_ptr held = fe::konst(rat(0));
    expr_ptr last_trade = fe::konst(rat(0));
    for (int i = 2; i <= n; ++i) {
        expr_ptr px = fe::price(phi, i);
        expr_ptr buy = ind_threshold(half, px, fe::konst(p - half), ind_dir::less);
        expr_ptr sell = ind_threshold(half, px, fe::konst(p + half), ind_dir::greater);
        last_trade = fe::sub(fe::product(fe::sub(fe::konst(rat(1)), held), buy),
                             fe::product(held, sell));
        held = fe::clamp01(fe::sum(held, last_trade));
    }
    if (holdings_out) *holdings_out = held;
    return n >= 2 ? last_trade : fe::konst(rat(0));
}

inline trader convergence_auditor(sent_id phi, const rat& p, const rat& eps) {
    if (eps.sign() <= 0 || (p - eps).sign() < 0 || p + eps > rat(1))
        throw config_error("convergence auditor needs 0 < eps, 0 <= p-eps, p+eps <= 1");
    return trader{"convergence", poly_budget{},
                  [phi, p, eps](int n) {
                      trading_strategy t(n);
                      t.add(phi, convergence_trade_expr(phi, p, eps, n));
                      return t;
                  }};
}

// The four limit-coherence auditors; all zero through day s, trading from s+1.
inline trader coherence_buy(sent_id phi, int s) {
    return trader{"coherence_buy", poly_budget{},
                  [phi, s](int n) {
                      trading_strategy t(n);
                      if (n > s) t.add(phi, fe::konst(rat(1)));
                      return t;
                  }};
}

inline trader coherence_sell(sent_id phi, int s) {
    return trader{"coherence_sell", poly_budget{},
                  [phi, s](int n) {
                      trading_strategy t(n);
                      if (n > s) t.add(phi, fe::konst(rat(-1)));
                      return t;
                  }};
}

// Buys the disjunction, sells the parts (and the mirror image).
inline trader coherence_split(sent_id phi, sent_id psi, sent_id disj, int s, bool mirrored) {
    return trader{mirrored ? "coherence_merge" : "coherence_split", poly_budget{},
                  [phi, psi, disj, s, mirrored](int n) {
                      trading_strategy t(n);
                      if (n > s) {
                          rat one = mirrored ? rat(-1) : rat(1);
                          t.add(disj, fe::konst(one));
                          t.add(phi, fe::konst(-one));
                          t.add(psi, fe::konst(-one));
                      }
                      return t;
                  }};
}

inline std::vector<trader> coherence_auditors(sent_id phi, sent_id psi, int s,
                                              sentence_arena& arena) {
    sent_id d = arena.disj(phi, psi);
    return {coherence_buy(phi, s), coherence_sell(phi, s), coherence_split(phi, psi, d, s, false),
            coherence_split(phi, psi, d, s, true)};
}

// For every k, buys up to one phi-share at prices below 2^-k:
//   beta^k_k = 0,
//   beta^k_i = Ind_{2^-k-1}(phi^{*i} < 2^-k) * (1 - sum_{j<i} beta^k_j),
//   T_i[phi] = sum_{k<=i} beta^k_i.
inline expr_ptr nondogmatism_trade_expr(sent_id phi, int n) {
    expr_ptr total; // day-n coefficient
    for (int k = 1; k < n; ++k) {
        rat thresh = rat::pow2(-k), width = rat::pow2(-k - 1);
        expr_ptr spent = fe::konst(rat(0)); // sum_{j<=i} beta^k_j, clamped
        expr_ptr beta_n;
        for (int i = k + 1; i <= n; ++i) {
            expr_ptr trig =
                ind_threshold(width, fe::price(phi, i), fe::konst(thresh), ind_dir::less);
            expr_ptr beta = fe::product(trig, fe::sub(fe::konst(rat(1)), spent));
            spent = fe::clamp01(fe::sum(spent, beta));
            if (i == n) beta_n = beta;
        }
        total = total ? fe::sum(total, beta_n) : beta_n;
    }
    return total ? total : fe::konst(rat(0));
}

inline trader nondogmatism_auditor(sent_id phi) {
    return trader{"nondogmatism", poly_budget{},
                  [phi](int n) {
                      trading_strategy t(n);
                      t.add(phi, nondogmatism_trade_expr(phi, n));
                      return t;
                  }};
}

// "Maybe open": 0 iff some day m <= n lets a step-budget-n truth-table check
// confirm that every world propositionally consistent with D_m agrees on phi.
// Monotone nonincreasing in n by construction.
inline int maybe_open(const sentence_arena& arena, sent_id phi, int n, deductive_process& d,
                      int atom_cap = default_atom_cap) {
    for (int m = 1; m <= n; ++m) {
        const auto& dm = d.day(m);
        step_meter meter(static_cast<std::uint64_t>(n));
        try {
            metered_scope scope(meter);
            std::vector<atom_id> scope_atoms = arena.atoms_of(phi);
            for (sent_id s : dm) {
                const auto& sa = arena.atoms_of(s);
                scope_atoms.insert(scope_atoms.end(), sa.begin(), sa.end());
            }
            std::vector<world> ws = plausible_worlds(arena, dm, scope_atoms, atom_cap);
            if (ws.empty()) return 0; // explosion decides everything
            bool v0 = eval_sentence(arena, ws[0], phi);
            bool decided = true;
            for (const world& w : ws)
                if (eval_sentence(arena, w, phi) != v0) {
                    decided = false;
                    break;
                }
            if (decided) return 0;
        } catch (const budget_exceeded& e) {
            if (e.which != &meter) throw; // an enclosing trader budget tripped
            continue;                     // this m doesn't fit; a later n may retry it
        }
    }
    return 1;
}

// Buys phi_n below p - eps/2, keeping at most one unit of possibly-open
// shares outstanding:
//   beta_n = 1 - sum_{i<n} MO(phi_i, n) * T_i[phi_i],
//   T_n[phi_n] = beta_n * Ind_{eps/2}(phi_n^{*n} < p - eps/2).
inline trader pseudorandom_auditor(std::function<sent_id(int)> phi_at, const rat& p,
                                   const rat& eps, std::shared_ptr<deductive_process> d,
                                   const sentence_arena* arena,
                                   int atom_cap = default_atom_cap) {
    if (eps.sign() <= 0) throw config_error("pseudorandom auditor needs eps > 0");
    rat half = eps / rat(2);
    // MO is monotone nonincreasing in n; memoize the first n where each
    // sentence reads 0 (a pure function, so caching preserves determinism).
    struct mo_memo {
        std::map<std::pair<sent_id, int>, int> values;
    };
    auto memo = std::make_shared<mo_memo>();
    return trader{
        "pseudorandom", poly_budget{},
        [phi_at, p, half, d, arena, atom_cap, memo](int n) {
            auto mo = [&](sent_id s, int at) {
                // fixed synthetic charge so outer budgets see the same cost
                // whether or not the memo is warm
                tick_steps(static_cast<std::uint64_t>(at));
                auto key = std::make_pair(s, at);
                auto it = memo->values.find(key);
                if (it != memo->values.end()) return it->second;
                meter_pause pause;
                int v = maybe_open(*arena, s, at, *d, atom_cap);
                memo->values.emplace(key, v);
                return v;
            };
            // Day j's own trade expression uses MO values as of day j; the
            // day-n program recapitulates the earlier days verbatim.
            std::vector<expr_ptr> trades(static_cast<std::size_t>(n) + 1);
            std::vector<sent_id> phis(static_cast<std::size_t>(n) + 1);
            for (int j = 1; j <= n; ++j) {
                phis[static_cast<std::size_t>(j)] = phi_at(j);
                expr_ptr beta = fe::konst(rat(1));
                for (int i = 1; i < j; ++i) {
                    if (mo(phis[static_cast<std::size_t>(i)], j) == 0) continue;
                    beta = fe::sub(beta, trades[static_cast<std::size_t>(i)]);
                }
                expr_ptr trig =
                    ind_threshold(half, fe::price(phis[static_cast<std::size_t>(j)], j),
                                  fe::konst(p - half), ind_dir::less);
                trades[static_cast<std::size_t>(j)] = fe::product(fe::clamp01(beta), trig);
            }
            trading_strategy t(n);
            t.add(phis[static_cast<std::size_t>(n)], trades[static_cast<std::size_t>(n)]);
            return t;
        }};
}

// Per-day instantiation of a strategy-template file.
inline trader program_trader(std::string name, strategy_template tmpl, sentence_arena* arena,
                             atom_table* atoms) {
    // surface syntax errors at load time, not as silent zero strategies
    tmpl.instantiate(1, *arena, *atoms);
    return trader{std::move(name), poly_budget{},
                  [tmpl, arena, atoms](int n) {
                      trading_strategy t(n);
                      for (auto& [s, coeff] : tmpl.instantiate(n, *arena, *atoms))
                          t.add(s, coeff);
                      return t;
                  }};
}

inline bool strategies_structurally_equal(const trading_strategy& a, const trading_strategy& b) {
    if (a.day() != b.day() || a.coeffs().size() != b.coeffs().size()) return false;
    for (std::size_t i = 0; i < a.coeffs().size(); ++i) {
        if (a.coeffs()[i].first != b.coeffs()[i].first) return false;
        if (!structurally_equal(a.coeffs()[i].second, b.coeffs()[i].second)) return false;
    }
    return true;
}

} // namespace lia
