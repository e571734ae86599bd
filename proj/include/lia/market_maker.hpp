#pragma once

// Per-day fixed-point pricing: given the day-n strategy and the committed
// (n-1)-day history, find a belief state under which the executed trade's
// value is at most 2^-n in every world.
//
// The verification quantifies over every Boolean assignment to the support
// sentences, with no consistency filter. Product worlds factor per sentence,
// so the exact max over all 2^|S| assignments is the sum over sentences of
// max(q*(1-p), -q*p); verification is linear in the support size.
//
// Search order (frozen; stamped into snapshots as the search-order version):
// for each dyadic grid level m = n, n+1, ...: snapped damped fixed-point
// iteration trajectories from fixed seeds, then a beam refinement around the
// best residuals seen (small supports only), then lexicographic grid tuples
// up to a fixed budget. The first candidate that verifies wins. Candidates
// are only ever accepted by the exact verifier, never by the heuristics.

#include "lia/feature.hpp"
#include "lia/strategy.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

namespace lia {

inline constexpr const char* mm_search_version = "mm1";

struct mm_params {
    int max_level_offset = 24; // levels n .. n+offset, then search_cap_exceeded
    int accel_iters = 64;
    std::uint64_t grid_budget = 4096; // lex grid tuples examined per level
    int beam_width = 16;
    int beam_max_support = 4;
};

namespace detail {

class fixed_point_search {
    const trading_strategy& t_;
    history h_; // committed prefix + mutable candidate slot
    day_cache cache_;
    std::vector<sent_id> support_;
    rat slack_;

public:
    fixed_point_search(const trading_strategy& t, const history& h_prev, int n)
        : t_(t), h_(h_prev) {
        if (static_cast<int>(h_prev.size()) != n - 1)
            throw eval_error("market maker needs exactly n-1 committed days");
        if (t.day() != n || !t.well_formed())
            throw eval_error("market maker given a malformed strategy");
        h_.emplace_back();
        cache_.day = n;
        support_ = t.support();
        slack_ = rat::pow2(-n);
    }

    const std::vector<sent_id>& support() const { return support_; }
    const rat& slack() const { return slack_; }

    std::vector<rat> shares_at(const std::vector<rat>& prices) {
        pricing& slot = h_.back();
        slot = pricing();
        for (std::size_t i = 0; i < support_.size(); ++i) slot.set(support_[i], prices[i]);
        evaluator ev(h_, &cache_);
        std::vector<rat> out;
        out.reserve(support_.size());
        for (const auto& [s, coeff] : t_.coeffs()) out.push_back(ev.eval(coeff));
        return out;
    }

    // max over all support-sentence assignments of the executed trade's value
    rat residual(const std::vector<rat>& prices, const std::vector<rat>& shares) const {
        rat out(0);
        for (std::size_t i = 0; i < shares.size(); ++i) {
            rat up = shares[i] * (rat(1) - prices[i]);
            rat down = -(shares[i] * prices[i]);
            out += rmax(up, down);
        }
        return out;
    }

    rat residual(const std::vector<rat>& prices) { return residual(prices, shares_at(prices)); }

    bool passes(const std::vector<rat>& prices) { return residual(prices) <= slack_; }

    // one damped price-adjustment step v <- (v + clamp01(v + T[.](v)))/2,
    // coordinates rounded to a guard grid to keep the iterates compact
    std::vector<rat> step(const std::vector<rat>& v, long guard_level) {
        std::vector<rat> shares = shares_at(v);
        std::vector<rat> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            rat moved = rmax(rat(0), rmin(rat(1), v[i] + shares[i]));
            out[i] = snap_dyadic((v[i] + moved) * rat(1, 2), guard_level);
        }
        return out;
    }
};

inline std::string tuple_key(const std::vector<rat>& v) {
    std::string k;
    for (const auto& r : v) {
        k += r.str();
        k += ',';
    }
    return k;
}

} // namespace detail

inline bool verify_fixed_point(const trading_strategy& t, const history& h_prev, int n,
                               const pricing& p) {
    detail::fixed_point_search s(t, h_prev, n);
    const auto& sup = s.support();
    for (const auto& [k, v] : p.items())
        if (std::find(sup.begin(), sup.end(), k) == sup.end()) return false;
    std::vector<rat> prices;
    prices.reserve(sup.size());
    for (sent_id k : sup) prices.push_back(p.value(k));
    return s.passes(prices);
}

inline pricing find_fixed_point(const trading_strategy& t, const history& h_prev, int n,
                                const mm_params& params = {}) {
    detail::fixed_point_search search(t, h_prev, n);
    const auto& sup = search.support();
    if (sup.empty()) return pricing(); // zero strategy prices nothing

    auto as_pricing = [&](const std::vector<rat>& v) {
        pricing p;
        for (std::size_t i = 0; i < sup.size(); ++i) p.set(sup[i], v[i]);
        return p;
    };

    // fixed deterministic seeds: previous-day prices (1/2 for new sentences),
    // then flat 1/2, 0, 1
    std::vector<std::vector<rat>> seeds;
    {
        std::vector<rat> prev(sup.size(), rat(1, 2));
        if (!h_prev.empty())
            for (std::size_t i = 0; i < sup.size(); ++i)
                if (const rat* r = h_prev.back().find(sup[i])) prev[i] = *r;
        seeds.push_back(std::move(prev));
        seeds.emplace_back(sup.size(), rat(1, 2));
        seeds.emplace_back(sup.size(), rat(0));
        seeds.emplace_back(sup.size(), rat(1));
    }

    struct scored {
        rat residual;
        std::vector<rat> point;
    };
    auto scored_less = [](const scored& a, const scored& b) {
        if (a.residual != b.residual) return a.residual < b.residual;
        for (std::size_t i = 0; i < a.point.size(); ++i) {
            if (a.point[i] < b.point[i]) return true;
            if (b.point[i] < a.point[i]) return false;
        }
        return false;
    };

    std::vector<std::vector<rat>> beam = seeds;

    for (int m = n; m <= n + params.max_level_offset; ++m) {
        std::set<std::string> tried;
        std::vector<scored> level_best;

        auto consider = [&](const std::vector<rat>& cand) -> bool {
            std::string key = detail::tuple_key(cand);
            if (!tried.insert(key).second) return false;
            rat r = search.residual(cand);
            level_best.push_back({r, cand});
            return r <= search.slack();
        };

        // damped iteration trajectories, snapped to this level's grid
        for (const auto& seed : seeds) {
            std::vector<rat> v = seed;
            for (int it = 0; it <= params.accel_iters; ++it) {
                std::vector<rat> cand(v.size());
                for (std::size_t i = 0; i < v.size(); ++i) cand[i] = snap_dyadic(v[i], m);
                if (consider(cand)) return as_pricing(cand);
                if (it < params.accel_iters) v = search.step(v, m + 8);
            }
            beam.push_back(v);
        }

        // beam refinement around the best candidates seen so far
        if (static_cast<int>(sup.size()) <= params.beam_max_support) {
            std::vector<scored> frontier;
            std::set<std::string> seen;
            rat cell = rat::pow2(-m);
            for (const auto& b : beam) {
                std::vector<std::vector<rat>> expand{{}};
                for (std::size_t i = 0; i < sup.size(); ++i) {
                    std::vector<std::vector<rat>> next;
                    rat base = snap_dyadic(b[i], m);
                    for (int dlt = -1; dlt <= 1; ++dlt) {
                        rat coord = rmax(rat(0), rmin(rat(1), base + rat(dlt) * cell));
                        for (const auto& partial : expand) {
                            auto ext = partial;
                            ext.push_back(coord);
                            next.push_back(std::move(ext));
                        }
                    }
                    expand = std::move(next);
                }
                for (auto& cand : expand) {
                    std::string key = detail::tuple_key(cand);
                    if (!seen.insert(key).second) continue;
                    if (tried.count(key)) continue;
                    frontier.push_back({search.residual(cand), std::move(cand)});
                }
            }
            std::sort(frontier.begin(), frontier.end(), scored_less);
            if (static_cast<int>(frontier.size()) > params.beam_width)
                frontier.resize(static_cast<std::size_t>(params.beam_width));
            for (const auto& f : frontier)
                if (consider(f.point)) return as_pricing(f.point);
            beam.clear();
            for (auto& f : frontier) beam.push_back(std::move(f.point));
        }

        // lexicographic dyadic grid, first grid_budget tuples
        {
            bigint per_axis = bigint(1) << static_cast<unsigned>(std::min(m, 62));
            per_axis += 1;
            std::vector<std::uint64_t> idx(sup.size(), 0);
            rat cell = rat::pow2(-m);
            std::uint64_t examined = 0;
            bool exhausted = false;
            while (!exhausted && examined < params.grid_budget) {
                std::vector<rat> cand(sup.size());
                for (std::size_t i = 0; i < sup.size(); ++i)
                    cand[i] = rmin(rat(1), rat(static_cast<long>(idx[i])) * cell);
                ++examined;
                if (consider(cand)) return as_pricing(cand);
                // advance lex counter, last coordinate fastest
                for (std::size_t i = sup.size(); i-- > 0;) {
                    if (bigint(static_cast<unsigned long>(++idx[i])) < per_axis) break;
                    idx[i] = 0;
                    if (i == 0) exhausted = true;
                }
            }
        }

        // carry the level's best points into the next level's beam
        std::sort(level_best.begin(), level_best.end(), scored_less);
        if (static_cast<int>(level_best.size()) > params.beam_width)
            level_best.resize(static_cast<std::size_t>(params.beam_width));
        for (auto& s : level_best) beam.push_back(std::move(s.point));
        if (static_cast<int>(beam.size()) > 2 * params.beam_width)
            beam.erase(beam.begin(), beam.end() - 2 * params.beam_width);
    }
    throw search_cap_exceeded("no verified fixed point through grid level " +
                              std::to_string(n + params.max_level_offset) +
                              "; pathological strategy or a bug");
}

} // namespace lia
