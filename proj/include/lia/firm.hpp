#pragma once

// The supertrader: combine the catalog into one day-n strategy
//
//   sum_{k<=n} sum_{b<=C_n} 2^{-k-b} Budgeter(b, S^k_{<=n}, P_{<=n-1})
//     + sum_{k<=n} 2^{-k-C_n} S^k_n,
//
// with C_n an integer dominating every catalog trader's cumulative l1 trade
// volume through day n (structural bound rule, so C_n can be astronomically
// large for recursive traders; it is an exact bigint and is never iterated).
//
// Materializing the b-sum to C_n is impossible in general, so by default the
// sum is collapsed at the smallest cutoff B*_k <= C_n past which the budget
// transform is provably the identity for every candidate pricing (no breach
// is reachable and the scale factor is pinned at 1). For b > B*_k the
// budgeted strategy IS the raw strategy, so the tail telescopes exactly:
// the emitted strategy's executed trades and world values equal the full
// formula's on every history. Tests compare both forms; the acceptance
// harness runs the explicit form at C_n and C_n + 5.

#include "lia/budgeter.hpp"
#include "lia/deduction.hpp"
#include "lia/strategy.hpp"
#include "lia/trader.hpp"

#include <map>
#include <optional>
#include <vector>

namespace lia {

// Per-run caches: generated strategies, per-trader executed holdings, and the
// breach bookkeeping (minimum plausible value seen through each committed
// day). Deterministic because every cached function is pure.
class catalog_runtime {
public:
    struct ktrack {
        affine_combination cumulative;       // executed holdings through `through`
        std::vector<sent_id> support_union;  // supports in play so far
        std::optional<rat> min_so_far;       // min over m <= through of plausible minima
        std::vector<std::optional<rat>> day_min; // 1-based by day; nullopt = empty PC
        int through = 0;
    };

    catalog_runtime(const trader_catalog* cat, sentence_arena* arena, deductive_process* d,
                    int atom_cap = default_atom_cap)
        : cat_(cat), arena_(arena), d_(d), atom_cap_(atom_cap),
          tracks_(static_cast<std::size_t>(cat->size())) {}

    int size() const { return cat_->size(); }
    deductive_process& process() const { return *d_; }
    sentence_arena& arena() const { return *arena_; }
    int atom_cap() const { return atom_cap_; }
    int committed() const { return committed_; }

    const trading_strategy& strategy(int k, int day) {
        auto key = std::make_pair(k, day);
        auto it = strat_.find(key);
        if (it != strat_.end()) return it->second;
        return strat_.emplace(key, cat_->strategy(k, day)).first->second;
    }

    const ktrack& track(int k) const { return tracks_.at(static_cast<std::size_t>(k) - 1); }

    // Called once per committed day, in day order.
    void commit_day(const history& h) {
        int m = static_cast<int>(h.size());
        if (m != committed_ + 1) throw eval_error("catalog_runtime: days must commit in order");
        const auto& dm = d_->day(m);
        for (int k = 1; k <= cat_->size(); ++k) {
            ktrack& tr = tracks_[static_cast<std::size_t>(k) - 1];
            const trading_strategy& s = strategy(k, m);
            tr.cumulative += execute(s, h);
            merge_support(tr.support_union, s.support());
            auto range = plausible_value_range(*arena_, tr.cumulative, dm,
                                               support_atoms(tr.support_union), atom_cap_);
            tr.day_min.resize(static_cast<std::size_t>(m) + 1);
            if (range) {
                tr.day_min[static_cast<std::size_t>(m)] = range->first;
                tr.min_so_far =
                    tr.min_so_far ? rmin(*tr.min_so_far, range->first) : range->first;
            }
            tr.through = m;
        }
        committed_ = m;
    }

    // b-independent budget inputs for trader k's day-n strategy; requires the
    // first n-1 days committed.
    detail::budget_inputs inputs_for_day(int k, int n) {
        if (committed_ != n - 1) throw eval_error("catalog_runtime: wrong committed prefix");
        const ktrack& tr = track(k);
        detail::budget_inputs in;
        in.t_n = strategy(k, n);
        in.worst_past_min = tr.min_so_far;
        std::vector<sent_id> sup = tr.support_union;
        merge_support(sup, in.t_n.support());
        std::vector<atom_id> scope = support_atoms(sup);
        const auto& dn = d_->day(n);
        for (sent_id s : dn) {
            const auto& sa = arena_->atoms_of(s);
            scope.insert(scope.end(), sa.begin(), sa.end());
        }
        for (const world& w : plausible_worlds(*arena_, dn, scope, atom_cap_)) {
            in.g.push_back(world_value(*arena_, w, tr.cumulative));
            in.neg_w.push_back(detail::neg_world_value_expr(in.t_n, *arena_, w));
        }
        return in;
    }

    rat day_l1_bound(int k, int day) {
        auto key = std::make_pair(k, day);
        auto it = l1_bound_.find(key);
        if (it != l1_bound_.end()) return it->second;
        rat total(0);
        bound_analyzer ba;
        for (const auto& [s, coeff] : strategy(k, day).coeffs())
            total += rat(2) * ba.bound(coeff);
        return l1_bound_.emplace(key, total).first->second;
    }

private:
    static void merge_support(std::vector<sent_id>& into, const std::vector<sent_id>& add) {
        for (sent_id s : add)
            if (std::find(into.begin(), into.end(), s) == into.end()) into.push_back(s);
    }
    std::vector<atom_id> support_atoms(const std::vector<sent_id>& sup) const {
        std::vector<atom_id> out;
        for (sent_id s : sup) {
            const auto& sa = arena_->atoms_of(s);
            out.insert(out.end(), sa.begin(), sa.end());
        }
        return out;
    }

    const trader_catalog* cat_;
    sentence_arena* arena_;
    deductive_process* d_;
    int atom_cap_;
    int committed_ = 0;
    std::map<std::pair<int, int>, trading_strategy> strat_;
    std::map<std::pair<int, int>, rat> l1_bound_;
    std::vector<ktrack> tracks_;
};

struct cn_certificate {
    bigint c;                    // the C_n integer
    std::vector<rat> per_k;      // per-trader cumulative l1 bounds (certificates)
};

// C_n: integer with sum_{i<=n} l1(execute(S^k_i, .)) < C_n for every k <= n
// and every valuation sequence; per-day rule l1 <= sum_phi 2*bound(coeff),
// summed over days, maxed over k, then floor+1.
inline cn_certificate compute_cn(catalog_runtime& rt, int n) {
    cn_certificate cert;
    rat best(0);
    for (int k = 1; k <= std::min(n, rt.size()); ++k) {
        rat total(0);
        for (int i = 1; i <= n; ++i) total += rt.day_l1_bound(k, i);
        cert.per_k.push_back(total);
        best = rmax(best, total);
    }
    cert.c = best.floor() + 1;
    return cert;
}

struct firm_options {
    bool collapse = true;  // collapse the provably-identity b-tail
    int extra_b_margin = 0; // extend the collapsed cutoff (stability harness)
    int explicit_plus = 0;  // explicit mode: cutoff = C_n + explicit_plus
};

inline trading_strategy combine(catalog_runtime& rt, int n, const history& h,
                                const firm_options& opt = {}, cn_certificate* cert_out = nullptr) {
    if (static_cast<int>(h.size()) != n - 1)
        throw eval_error("combine: history must hold exactly n-1 days");
    cn_certificate cert = compute_cn(rt, n);
    if (cert_out) *cert_out = cert;

    trading_strategy firm(n);
    for (int k = 1; k <= std::min(n, rt.size()); ++k) {
        detail::budget_inputs in = rt.inputs_for_day(k, n);

        bigint cutoff;
        if (opt.collapse) {
            bigint b_star(1);
            if (in.worst_past_min && in.worst_past_min->sign() < 0) {
                bigint breach_thr = (-*in.worst_past_min).floor();
                if (breach_thr > b_star) b_star = breach_thr;
            }
            if (!in.neg_w.empty()) {
                interval_analyzer ia;
                rat nw(0);
                for (const auto& e : in.neg_w) nw = rmax(nw, ia.abs_bound(e));
                rat gmin = in.g.front();
                for (const auto& g : in.g) gmin = rmin(gmin, g);
                bigint scale_thr = (nw - gmin).ceil();
                if (scale_thr > b_star) b_star = scale_thr;
            }
            b_star += opt.extra_b_margin;
            cutoff = b_star < cert.c ? b_star : cert.c;
        } else {
            cutoff = cert.c + opt.explicit_plus;
        }
        if (!cutoff.fits_slong_p() || cutoff.get_si() > 100000)
            throw eval_error("firm b-cutoff too large to materialize");

        long cut = cutoff.get_si();
        for (long b = 1; b <= cut; ++b) {
            trading_strategy budgeted = detail::apply_budget(static_cast<int>(b), in);
            rat w = rat::pow2(-k - b);
            for (const auto& [s, coeff] : budgeted.coeffs())
                firm.add(s, fe::product(fe::konst(w), coeff));
        }
        rat tail = rat::pow2(-k - cut);
        for (const auto& [s, coeff] : in.t_n.coeffs())
            firm.add(s, fe::product(fe::konst(tail), coeff));
    }
    return firm;
}

} // namespace lia
