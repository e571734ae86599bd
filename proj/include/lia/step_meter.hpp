#pragma once

// Deterministic step accounting. A "step" is one interpreter or
// AST-construction operation, counted identically on every platform; wall
// clock never enters. Meters nest: a scope installs a meter, and every tick
// charges all active meters, so an inner budgeted check also counts against
// an outer trader budget. The thrown overrun names the meter that tripped, so
// an inner check can swallow its own overrun while letting an outer trader
// budget propagate.

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lia {

struct step_meter {
    std::uint64_t used = 0;
    std::uint64_t cap;
    explicit step_meter(std::uint64_t cap_) : cap(cap_) {}
};

struct budget_exceeded : std::runtime_error {
    const step_meter* which;
    explicit budget_exceeded(const step_meter* m)
        : std::runtime_error("step budget exceeded"), which(m) {}
};

namespace detail {
inline std::vector<step_meter*>& meter_stack() {
    static thread_local std::vector<step_meter*> stack;
    return stack;
}
} // namespace detail

inline void tick_steps(std::uint64_t k = 1) {
    for (step_meter* m : detail::meter_stack()) {
        m->used += k;
        if (m->used > m->cap) throw budget_exceeded(m);
    }
}

class metered_scope {
    step_meter* meter_;

public:
    explicit metered_scope(step_meter& m) : meter_(&m) { detail::meter_stack().push_back(meter_); }
    ~metered_scope() { detail::meter_stack().pop_back(); }
    metered_scope(const metered_scope&) = delete;
    metered_scope& operator=(const metered_scope&) = delete;
};

// Suspends all enclosing meters. Used where a memoized computation would
// otherwise make tick totals depend on cache temperature; the caller charges
// a fixed synthetic cost instead, keeping budgets a pure function of inputs.
class meter_pause {
    std::vector<step_meter*> saved_;

public:
    meter_pause() { saved_.swap(detail::meter_stack()); }
    ~meter_pause() { detail::meter_stack().swap(saved_); }
    meter_pause(const meter_pause&) = delete;
    meter_pause& operator=(const meter_pause&) = delete;
};

} // namespace lia
