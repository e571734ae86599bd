#pragma once

// Budget transform: scale a trader's day-n strategy so its cumulative
// plausible losses can never pass -b, and zero it permanently once they have.
//
//   if   some world consistent with D_m (m < n) values the trader's
//        cumulative holdings at <= -b:        return the zero strategy;
//   else return T_n * min over W in PC(D_n) of
//        SafeRecip( (1/d_W) * (-W(T_n)) ),
//        d_W = b + W(cumulative holdings through n-1), a positive rational.
//
// -W(T_n) is built symbolically (it reads day-n prices), while d_W is a
// constant once the history is committed.

#include "lia/deduction.hpp"
#include "lia/feature.hpp"
#include "lia/logic.hpp"
#include "lia/strategy.hpp"

#include <optional>
#include <vector>

namespace lia {

// min/max over PC(D_m)-worlds of the cumulative value; nullopt when no world
// is propositionally consistent with D_m (the empty-range marker).
inline std::optional<std::pair<rat, rat>> plausible_value_range(
    const sentence_arena& arena, const affine_combination& cumulative,
    const std::vector<sent_id>& d_m, std::vector<atom_id> scope_atoms,
    int atom_cap = default_atom_cap) {
    for (sent_id s : d_m) {
        const auto& sa = arena.atoms_of(s);
        scope_atoms.insert(scope_atoms.end(), sa.begin(), sa.end());
    }
    for (const auto& [s, q] : cumulative.shares) {
        const auto& sa = arena.atoms_of(s);
        scope_atoms.insert(scope_atoms.end(), sa.begin(), sa.end());
    }
    std::vector<world> worlds = plausible_worlds(arena, d_m, scope_atoms, atom_cap);
    if (worlds.empty()) return std::nullopt;
    std::optional<std::pair<rat, rat>> out;
    for (const world& w : worlds) {
        rat v = world_value(arena, w, cumulative);
        if (!out) {
            out = {v, v};
        } else {
            out->first = rmin(out->first, v);
            out->second = rmax(out->second, v);
        }
    }
    return out;
}

// Range of the cumulative executed holdings of a strategy sequence through
// day m, with the enumeration scope the budgeter uses (atoms of D_m plus all
// supports in play through m).
inline std::optional<std::pair<rat, rat>> plausible_value_range(
    const sentence_arena& arena, const std::vector<trading_strategy>& t_hist, const history& h,
    deductive_process& d, int m, int atom_cap = default_atom_cap) {
    if (static_cast<int>(h.size()) < m) throw eval_error("plausible_value_range: short history");
    affine_combination cumulative;
    std::vector<atom_id> scope;
    for (int i = 1; i <= m && i <= static_cast<int>(t_hist.size()); ++i) {
        const trading_strategy& t = t_hist[static_cast<std::size_t>(i) - 1];
        cumulative += execute(t, h);
        for (sent_id s : t.support()) {
            const auto& sa = arena.atoms_of(s);
            scope.insert(scope.end(), sa.begin(), sa.end());
        }
    }
    return plausible_value_range(arena, cumulative, d.day(m), std::move(scope), atom_cap);
}

namespace detail {

// Everything apply_budget needs that does not depend on b; computed once per
// (trader, day) and reused across the firm's whole b-sum.
struct budget_inputs {
    trading_strategy t_n;
    std::optional<rat> worst_past_min; // min over m<n of the plausible minima
    std::vector<rat> g;                // per PC(D_n) world: W(cumulative through n-1)
    std::vector<expr_ptr> neg_w;       // per world: -W(T_n), symbolic in day-n prices
};

inline expr_ptr neg_world_value_expr(const trading_strategy& t, const sentence_arena& arena,
                                     const world& w) {
    // -W(T_n) = sum_phi T_n[phi] * (phi^{*n} - W(phi))
    expr_ptr out;
    for (const auto& [s, coeff] : t.coeffs()) {
        rat truth = eval_sentence(arena, w, s) ? rat(1) : rat(0);
        expr_ptr term =
            fe::product(coeff, fe::sum(fe::price(s, t.day()), fe::konst(-truth)));
        out = out ? fe::sum(out, term) : term;
    }
    return out ? out : fe::konst(rat(0));
}

inline budget_inputs make_budget_inputs(const sentence_arena& arena,
                                        const std::vector<trading_strategy>& t_hist,
                                        const history& h, deductive_process& d,
                                        int atom_cap = default_atom_cap) {
    const int n = static_cast<int>(t_hist.size());
    budget_inputs in;
    in.t_n = t_hist.back();

    affine_combination cumulative;
    std::vector<atom_id> scope;
    for (int m = 1; m < n; ++m) {
        const trading_strategy& t = t_hist[static_cast<std::size_t>(m) - 1];
        cumulative += execute(t, h);
        for (sent_id s : t.support()) {
            const auto& sa = arena.atoms_of(s);
            scope.insert(scope.end(), sa.begin(), sa.end());
        }
        auto range = plausible_value_range(arena, cumulative, d.day(m), scope, atom_cap);
        if (range)
            in.worst_past_min =
                in.worst_past_min ? rmin(*in.worst_past_min, range->first) : range->first;
    }

    std::vector<atom_id> scope_n = scope;
    for (sent_id s : in.t_n.support()) {
        const auto& sa = arena.atoms_of(s);
        scope_n.insert(scope_n.end(), sa.begin(), sa.end());
    }
    const auto& d_n = d.day(n);
    for (sent_id s : d_n) {
        const auto& sa = arena.atoms_of(s);
        scope_n.insert(scope_n.end(), sa.begin(), sa.end());
    }
    for (const world& w : plausible_worlds(arena, d_n, scope_n, atom_cap)) {
        in.g.push_back(world_value(arena, w, cumulative));
        in.neg_w.push_back(neg_world_value_expr(in.t_n, arena, w));
    }
    return in;
}

inline trading_strategy apply_budget(int b, const budget_inputs& in) {
    const int n = in.t_n.day();
    if (in.worst_past_min && *in.worst_past_min <= rat(-b)) return trading_strategy(n);
    if (in.t_n.is_zero() || in.neg_w.empty()) return in.t_n;

    expr_ptr scale;
    for (std::size_t i = 0; i < in.neg_w.size(); ++i) {
        rat denom = rat(b) + in.g[i];
        if (denom.sign() <= 0)
            throw eval_error("budgeter: nonpositive remaining budget without a breach");
        expr_ptr ratio = fe::product(fe::konst(rat(1) / denom), in.neg_w[i]);
        expr_ptr piece = fe::safe_recip(ratio);
        scale = scale ? fe::minimum(scale, piece) : piece;
    }
    trading_strategy out(n);
    for (const auto& [s, coeff] : in.t_n.coeffs()) out.add(s, fe::product(scale, coeff));
    return out;
}

} // namespace detail

// One-shot form; the trading firm uses the split form above to share the
// b-independent work across its whole double sum.
inline trading_strategy budget(const sentence_arena& arena, int b,
                               const std::vector<trading_strategy>& t_hist, const history& h,
                               deductive_process& d, int atom_cap = default_atom_cap) {
    if (b <= 0) throw config_error("budget must be a positive integer");
    if (t_hist.empty()) throw eval_error("budget: empty strategy history");
    return detail::apply_budget(b, detail::make_budget_inputs(arena, t_hist, h, d, atom_cap));
}

} // namespace lia
