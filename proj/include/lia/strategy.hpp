#pragma once

// Trading strategies and affine combinations of sentences.
//
// A day-n strategy is stored as its coefficient map only; the cash term is
// implied (it is minus the day-n price of the share map), so the day-n value
// of an executed trade is zero by construction.

#include "lia/feature.hpp"
#include "lia/logic.hpp"
#include "lia/rational.hpp"

#include <vector>

namespace lia {

class trading_strategy {
    int day_ = 1;
    std::vector<std::pair<sent_id, expr_ptr>> coeffs_; // support order = insertion order

public:
    trading_strategy() = default;
    explicit trading_strategy(int day) : day_(day) {}

    int day() const { return day_; }
    bool is_zero() const { return coeffs_.empty(); }
    const std::vector<std::pair<sent_id, expr_ptr>>& coeffs() const { return coeffs_; }

    // Literal-zero coefficients stay out of the support.
    void add(sent_id s, expr_ptr coeff) {
        if (is_literal_zero(coeff)) return;
        for (auto& [k, c] : coeffs_)
            if (k == s) {
                c = fe::sum(c, std::move(coeff));
                if (is_literal_zero(c)) drop(s);
                return;
            }
        coeffs_.emplace_back(s, std::move(coeff));
    }

    const expr_ptr* coeff(sent_id s) const {
        for (const auto& [k, c] : coeffs_)
            if (k == s) return &c;
        return nullptr;
    }

    std::vector<sent_id> support() const {
        std::vector<sent_id> out;
        out.reserve(coeffs_.size());
        for (const auto& [k, c] : coeffs_) out.push_back(k);
        return out;
    }

    int max_rank() const {
        int r = 0;
        for (const auto& [k, c] : coeffs_) r = std::max(r, c->rank);
        return r;
    }
    bool well_formed() const { return max_rank() <= day_; }

private:
    void drop(sent_id s) {
        for (auto it = coeffs_.begin(); it != coeffs_.end(); ++it)
            if (it->first == s) {
                coeffs_.erase(it);
                return;
            }
    }
};

// constant + sum of rational share counts; the result of executing a strategy
// against a concrete history.
struct affine_combination {
    rat constant;
    std::vector<std::pair<sent_id, rat>> shares; // insertion order, unique sentences

    void add_shares(sent_id s, const rat& r) {
        if (r.is_zero()) return;
        for (auto it = shares.begin(); it != shares.end(); ++it)
            if (it->first == s) {
                it->second += r;
                // positions sold back to exactly zero stop widening world scopes
                if (it->second.is_zero()) shares.erase(it);
                return;
            }
        shares.emplace_back(s, r);
    }

    const rat* find(sent_id s) const {
        for (const auto& [k, v] : shares)
            if (k == s) return &v;
        return nullptr;
    }

    affine_combination& operator+=(const affine_combination& o) {
        constant += o.constant;
        for (const auto& [k, v] : o.shares) add_shares(k, v);
        return *this;
    }
};

inline rat l1_norm(const affine_combination& a) {
    rat out = a.constant.abs();
    for (const auto& [k, v] : a.shares) out += v.abs();
    return out;
}

// Evaluate the coefficients at h (whose last day is the strategy's day) and
// record the price-cancelling cash term.
inline affine_combination execute(const trading_strategy& t, const history& h,
                                  day_cache* cache = nullptr) {
    if (static_cast<int>(h.size()) < t.day())
        throw eval_error("execute: history shorter than strategy day");
    const pricing& today = h[static_cast<std::size_t>(t.day()) - 1];
    evaluator ev(h, cache);
    affine_combination out;
    for (const auto& [s, coeff] : t.coeffs()) {
        rat q = ev.eval(coeff);
        out.constant -= q * today.value(s);
        out.add_shares(s, q);
    }
    return out;
}

inline rat world_value(const sentence_arena& arena, const world& w, const affine_combination& a) {
    rat out = a.constant;
    for (const auto& [s, q] : a.shares)
        if (eval_sentence(arena, w, s)) out += q;
    return out;
}

// Affine combination with feature coefficients (used to buy combinations and
// inside the budget/firm constructions).
struct feature_combination {
    expr_ptr constant; // may be null for zero
    std::vector<std::pair<sent_id, expr_ptr>> coeffs;

    int max_rank() const {
        int r = constant ? constant->rank : 0;
        for (const auto& [s, c] : coeffs) r = std::max(r, c->rank);
        return r;
    }
};

// Buying A on day n: the strategy A - A^{*n}. The constant cancels against
// its own price, so only the sentence coefficients survive.
inline trading_strategy buy_combination(const feature_combination& a, int n) {
    if (a.max_rank() > n) throw eval_error("buy_combination: rank exceeds day");
    trading_strategy t(n);
    for (const auto& [s, c] : a.coeffs) t.add(s, c);
    return t;
}

} // namespace lia
