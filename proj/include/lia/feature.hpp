#pragma once

// The expressible-feature language: price symbols, rational constants,
// addition, multiplication, max, and safe reciprocation 1/max(1,x). Derived
// operators (negation, min, abs, the continuous threshold indicator, guarded
// division) desugar into these core nodes at construction.
//
// Expressions are immutable DAGs; sharing a subexpression is the in-memory
// form of a binding, and evaluation memoizes per node, so each binding is
// evaluated once per call. Evaluation at rational price histories is exact.
// Features are continuous in the price history by construction; only rational
// points are ever evaluated, so continuity is documented rather than
// asserted, with the structural slope() bound as the testable stand-in.

#include "lia/errors.hpp"
#include "lia/logic.hpp"
#include "lia/rational.hpp"
#include "lia/step_meter.hpp"

#include <memory>
#include <unordered_map>
#include <vector>

namespace lia {

enum class expr_kind : std::uint8_t { price, constant, sum, product, maximum, safe_recip };

struct expr;
using expr_ptr = std::shared_ptr<const expr>;

struct expr {
    expr_kind kind;
    rat value;        // constant
    sent_id sent{0};  // price
    int day{0};       // price
    expr_ptr lhs, rhs;
    int rank; // latest day whose price this node can read; 0 if none
};

inline bool is_literal_zero(const expr_ptr& e) {
    return e->kind == expr_kind::constant && e->value.is_zero();
}
inline bool is_literal(const expr_ptr& e, const rat& v) {
    return e->kind == expr_kind::constant && e->value == v;
}

namespace fe {

inline expr_ptr konst(rat v) {
    tick_steps();
    auto e = std::make_shared<expr>();
    e->kind = expr_kind::constant;
    e->value = std::move(v);
    e->rank = 0;
    return e;
}

inline expr_ptr price(sent_id s, int day) {
    tick_steps();
    if (day <= 0) throw parse_error("price symbol day must be positive");
    auto e = std::make_shared<expr>();
    e->kind = expr_kind::price;
    e->sent = s;
    e->day = day;
    e->rank = day;
    return e;
}

// Binary builders fold constants; that is the only simplification performed.

inline expr_ptr sum(expr_ptr a, expr_ptr b) {
    tick_steps();
    if (a->kind == expr_kind::constant && b->kind == expr_kind::constant)
        return konst(a->value + b->value);
    if (is_literal_zero(a)) return b;
    if (is_literal_zero(b)) return a;
    auto e = std::make_shared<expr>();
    e->kind = expr_kind::sum;
    e->rank = std::max(a->rank, b->rank);
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    return e;
}

inline expr_ptr product(expr_ptr a, expr_ptr b) {
    tick_steps();
    if (a->kind == expr_kind::constant && b->kind == expr_kind::constant)
        return konst(a->value * b->value);
    if (is_literal_zero(a) || is_literal_zero(b)) return konst(rat(0));
    if (is_literal(a, rat(1))) return b;
    if (is_literal(b, rat(1))) return a;
    auto e = std::make_shared<expr>();
    e->kind = expr_kind::product;
    e->rank = std::max(a->rank, b->rank);
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    return e;
}

inline expr_ptr maximum(expr_ptr a, expr_ptr b) {
    tick_steps();
    if (a->kind == expr_kind::constant && b->kind == expr_kind::constant)
        return konst(rmax(a->value, b->value));
    auto e = std::make_shared<expr>();
    e->kind = expr_kind::maximum;
    e->rank = std::max(a->rank, b->rank);
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    return e;
}

inline expr_ptr safe_recip(expr_ptr a) {
    tick_steps();
    if (a->kind == expr_kind::constant) {
        rat m = rmax(rat(1), a->value);
        return konst(rat(1) / m);
    }
    auto e = std::make_shared<expr>();
    e->kind = expr_kind::safe_recip;
    e->rank = a->rank;
    e->lhs = std::move(a);
    return e;
}

// derived forms

inline expr_ptr neg(expr_ptr a) { return product(konst(rat(-1)), std::move(a)); }
inline expr_ptr sub(expr_ptr a, expr_ptr b) { return sum(std::move(a), neg(std::move(b))); }
inline expr_ptr minimum(expr_ptr a, expr_ptr b) {
    return neg(maximum(neg(std::move(a)), neg(std::move(b))));
}
inline expr_ptr absval(expr_ptr a) { return maximum(a, neg(a)); }
inline expr_ptr clamp01(expr_ptr a) {
    return maximum(konst(rat(0)), minimum(konst(rat(1)), std::move(a)));
}

// xi/zeta for zeta >= eps > 0: (1/eps) * xi * safe_recip((1/eps) * zeta).
inline expr_ptr guarded_div(expr_ptr numer, expr_ptr denom, const rat& eps) {
    if (eps.sign() <= 0) throw eval_error("guarded division requires a positive lower bound");
    rat inv = rat(1) / eps;
    return product(product(konst(inv), std::move(numer)),
                   safe_recip(product(konst(inv), std::move(denom))));
}

} // namespace fe

enum class ind_dir { greater, less };

// Continuous threshold indicator: 0 on the wrong side, 1 past the band, and
// the linear ramp (x-y)/delta in between; built as max(0, min(1, (x-y)/delta)).
inline expr_ptr ind_threshold(const rat& delta, expr_ptr x, expr_ptr y,
                              ind_dir dir = ind_dir::greater) {
    if (delta.sign() <= 0) throw eval_error("ind_threshold requires delta > 0");
    expr_ptr diff = dir == ind_dir::greater ? fe::sub(std::move(x), std::move(y))
                                            : fe::sub(std::move(y), std::move(x));
    return fe::clamp01(fe::product(fe::konst(rat(1) / delta), std::move(diff)));
}

inline expr_ptr ind_between(const rat& delta, expr_ptr x, const rat& lo, const rat& hi) {
    return fe::minimum(ind_threshold(delta, x, fe::konst(lo), ind_dir::greater),
                       ind_threshold(delta, x, fe::konst(hi), ind_dir::less));
}

// --- pricings and histories ---------------------------------------------------

// Finite-support map sentence -> rational in [0,1]. Absent sentences read as
// price 0. Support order (first insertion) is preserved; it is part of the
// deterministic search and serialization contracts.
class pricing {
    std::vector<std::pair<sent_id, rat>> items_;

public:
    const rat* find(sent_id s) const {
        for (const auto& [k, v] : items_)
            if (k == s) return &v;
        return nullptr;
    }
    rat value(sent_id s) const {
        const rat* r = find(s);
        return r ? *r : rat(0);
    }
    void set(sent_id s, rat v) {
        if (v.sign() < 0 || v > rat(1)) throw eval_error("price outside [0,1]");
        for (auto& [k, old] : items_)
            if (k == s) {
                old = std::move(v);
                return;
            }
        items_.emplace_back(s, std::move(v));
    }
    const std::vector<std::pair<sent_id, rat>>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    bool operator==(const pricing& o) const {
        if (items_.size() != o.items_.size()) return false;
        for (std::size_t i = 0; i < items_.size(); ++i)
            if (items_[i].first != o.items_[i].first || !(items_[i].second == o.items_[i].second))
                return false;
        return true;
    }
};

using history = std::vector<pricing>; // history[i] is the day-(i+1) pricing

// Shared per-day cache for nodes that only read days < day; those values are
// the same for every candidate day-`day` pricing the market maker tries.
struct day_cache {
    int day = 0;
    std::unordered_map<const expr*, rat> values;
};

class evaluator {
    const history* h_;
    day_cache* shared_;
    std::unordered_map<const expr*, rat> memo_;

public:
    explicit evaluator(const history& h, day_cache* shared = nullptr)
        : h_(&h), shared_(shared) {}

    rat eval(const expr_ptr& e) {
        if (shared_ && e->rank < shared_->day) {
            auto it = shared_->values.find(e.get());
            if (it != shared_->values.end()) return it->second;
            rat v = compute(e);
            shared_->values.emplace(e.get(), v);
            return v;
        }
        auto it = memo_.find(e.get());
        if (it != memo_.end()) return it->second;
        rat v = compute(e);
        memo_.emplace(e.get(), v);
        return v;
    }

private:
    rat compute(const expr_ptr& e) {
        tick_steps();
        switch (e->kind) {
        case expr_kind::constant: return e->value;
        case expr_kind::price:
            if (e->day > static_cast<int>(h_->size()))
                throw eval_error("feature rank " + std::to_string(e->day) +
                                 " exceeds history length " + std::to_string(h_->size()));
            return (*h_)[static_cast<std::size_t>(e->day) - 1].value(e->sent);
        case expr_kind::sum: return eval(e->lhs) + eval(e->rhs);
        case expr_kind::product: return eval(e->lhs) * eval(e->rhs);
        case expr_kind::maximum: return rmax(eval(e->lhs), eval(e->rhs));
        default: {
            rat v = eval(e->lhs);
            return rat(1) / rmax(rat(1), v);
        }
        }
    }
};

inline rat eval_feature(const expr_ptr& e, const history& h) {
    return evaluator(h).eval(e);
}

inline int rank(const expr_ptr& e) { return e->rank; }

// --- structural analyses ----------------------------------------------------

// |eval(e,h)| <= bound(e) for every history, via the structural rules:
// |price| <= 1, |const c| = |c|, |a+b| <= Ba+Bb, |a*b| <= Ba*Bb,
// |max(a,b)| <= max(Ba,Bb), |safe_recip(a)| <= 1.
class bound_analyzer {
    std::unordered_map<const expr*, rat> memo_;

public:
    rat bound(const expr_ptr& e) {
        auto it = memo_.find(e.get());
        if (it != memo_.end()) return it->second;
        rat v;
        switch (e->kind) {
        case expr_kind::price: v = rat(1); break;
        case expr_kind::constant: v = e->value.abs(); break;
        case expr_kind::sum: v = bound(e->lhs) + bound(e->rhs); break;
        case expr_kind::product: v = bound(e->lhs) * bound(e->rhs); break;
        case expr_kind::maximum: v = rmax(bound(e->lhs), bound(e->rhs)); break;
        default: v = rat(1); break;
        }
        memo_.emplace(e.get(), v);
        return v;
    }
};

inline rat bound(const expr_ptr& e) { return bound_analyzer().bound(e); }

// Two-sided interval containing eval(e,h) for every history; tighter than
// bound() because clamps recover [0,1] exactly. Internal machinery (tail
// collapse in the trading firm); bound() is the published one-sided rule.
struct interval {
    rat lo, hi;
};

class interval_analyzer {
    std::unordered_map<const expr*, interval> memo_;

public:
    interval range(const expr_ptr& e) {
        auto it = memo_.find(e.get());
        if (it != memo_.end()) return it->second;
        interval v;
        switch (e->kind) {
        case expr_kind::price: v = {rat(0), rat(1)}; break;
        case expr_kind::constant: v = {e->value, e->value}; break;
        case expr_kind::sum: {
            auto a = range(e->lhs), b = range(e->rhs);
            v = {a.lo + b.lo, a.hi + b.hi};
            break;
        }
        case expr_kind::product: {
            auto a = range(e->lhs), b = range(e->rhs);
            rat c1 = a.lo * b.lo, c2 = a.lo * b.hi, c3 = a.hi * b.lo, c4 = a.hi * b.hi;
            v = {rmin(rmin(c1, c2), rmin(c3, c4)), rmax(rmax(c1, c2), rmax(c3, c4))};
            break;
        }
        case expr_kind::maximum: {
            auto a = range(e->lhs), b = range(e->rhs);
            v = {rmax(a.lo, b.lo), rmax(a.hi, b.hi)};
            break;
        }
        default: {
            auto a = range(e->lhs);
            // 1/max(1,x) is nonincreasing in x
            v = {rat(1) / rmax(rat(1), a.hi), rat(1) / rmax(rat(1), a.lo)};
            break;
        }
        }
        memo_.emplace(e.get(), v);
        return v;
    }

    rat abs_bound(const expr_ptr& e) {
        auto r = range(e);
        return rmax(r.lo.abs(), r.hi.abs());
    }
};

// Structural slope constant: |eval(e,h) - eval(e,h')| <= slope(e)*||h-h'||_inf.
class slope_analyzer {
    std::unordered_map<const expr*, rat> memo_;
    bound_analyzer bounds_;

public:
    rat slope(const expr_ptr& e) {
        auto it = memo_.find(e.get());
        if (it != memo_.end()) return it->second;
        rat v;
        switch (e->kind) {
        case expr_kind::price: v = rat(1); break;
        case expr_kind::constant: v = rat(0); break;
        case expr_kind::sum: v = slope(e->lhs) + slope(e->rhs); break;
        case expr_kind::product:
            v = bounds_.bound(e->lhs) * slope(e->rhs) + bounds_.bound(e->rhs) * slope(e->lhs);
            break;
        case expr_kind::maximum: v = rmax(slope(e->lhs), slope(e->rhs)); break;
        default: v = slope(e->lhs); break;
        }
        memo_.emplace(e.get(), v);
        return v;
    }
};

inline bool structurally_equal(const expr_ptr& a, const expr_ptr& b) {
    if (a.get() == b.get()) return true;
    if (a->kind != b->kind || a->rank != b->rank) return false;
    switch (a->kind) {
    case expr_kind::constant: return a->value == b->value;
    case expr_kind::price: return a->sent == b->sent && a->day == b->day;
    case expr_kind::safe_recip: return structurally_equal(a->lhs, b->lhs);
    default:
        return structurally_equal(a->lhs, b->lhs) && structurally_equal(a->rhs, b->rhs);
    }
}

} // namespace lia
