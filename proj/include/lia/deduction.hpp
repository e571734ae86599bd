#pragma once

// Deductive processes: nested computable sequences of finite theorem sets.
// Three generators: scripted files, bounded truth-table saturation, and a
// reflective variant that may consult committed prices of strictly earlier
// days (used by the self-reference demo).

#include "lia/logic.hpp"
#include "lia/rational.hpp"

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace lia {

// Committed prices of strictly earlier days, as a reflective process sees
// them. day is 1-based; implementations must only be queried for days the
// run has already committed.
struct market_view {
    virtual ~market_view() = default;
    virtual int committed_days() const = 0;
    virtual rat price(int day, sent_id s) const = 0;
};

class deductive_process {
public:
    virtual ~deductive_process() = default;

    // Cumulative theorem set D_n, sorted by sent_id. Implementations must be
    // deterministic and nested: day(n) is a subset of day(n+1).
    virtual const std::vector<sent_id>& day(int n) = 0;

    // Reflective processes need committed prices; others ignore this.
    virtual void attach_market(const market_view*) {}
    virtual bool reflective() const { return false; }
};

namespace detail {
inline void sort_unique(std::vector<sent_id>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}
} // namespace detail

// --- scripted ---------------------------------------------------------------
//
// UTF-8 lines "N: <sentence>(; <sentence>)*", '#' comments. Per-day sets are
// cumulative, so nestedness holds by construction.

class scripted_process : public deductive_process {
    std::map<int, std::vector<sent_id>> entries_;
    std::deque<std::vector<sent_id>> cache_; // cache_[n-1] = D_n

public:
    scripted_process(const std::string& text, sentence_arena& arena, atom_table& atoms) {
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            auto colon = line.find(':');
            if (colon == std::string::npos) throw parse_error("expected 'N: <sentence>'", line_no);
            int day = 0;
            try {
                std::size_t used = 0;
                day = std::stoi(line.substr(0, colon), &used);
                while (used < colon)
                    if (!std::isspace(static_cast<unsigned char>(line[used++])))
                        throw parse_error("bad day number", line_no);
            } catch (const parse_error&) {
                throw;
            } catch (...) {
                throw parse_error("bad day number", line_no);
            }
            if (day <= 0) throw parse_error("day must be positive", line_no);
            std::string rest = line.substr(colon + 1);
            std::size_t start = 0;
            while (start <= rest.size()) {
                auto semi = rest.find(';', start);
                std::string part = rest.substr(start, semi == std::string::npos ? std::string::npos
                                                                                : semi - start);
                auto a = part.find_first_not_of(" \t\r");
                if (a != std::string::npos) {
                    auto b = part.find_last_not_of(" \t\r");
                    entries_[day].push_back(
                        parse_sentence(part.substr(a, b - a + 1), arena, atoms, false, line_no));
                }
                if (semi == std::string::npos) break;
                start = semi + 1;
            }
        }
    }

    const std::vector<sent_id>& day(int n) override {
        while (static_cast<int>(cache_.size()) < n) {
            int d = static_cast<int>(cache_.size()) + 1;
            std::vector<sent_id> cur = d > 1 ? cache_.back() : std::vector<sent_id>{};
            auto it = entries_.find(d);
            if (it != entries_.end())
                cur.insert(cur.end(), it->second.begin(), it->second.end());
            detail::sort_unique(cur);
            cache_.push_back(std::move(cur));
        }
        return cache_[static_cast<std::size_t>(n) - 1];
    }
};

// --- saturation -------------------------------------------------------------
//
// D_n = all sentences of size <= n over the first schedule(n) atoms that hold
// in every assignment satisfying the axioms, in a fixed enumeration order
// (size-major; within a size: ~, then &, |, ->, <-> over left-size splits).

class saturation_process : public deductive_process {
    std::vector<sent_id> axioms_;
    std::vector<int> schedule_; // schedule_[n-1]; past the end, last value holds
    std::vector<atom_id> universe_;
    sentence_arena* arena_;
    std::deque<std::vector<sent_id>> cache_;
    int atom_cap_;

    int schedule_at(int n) const {
        if (schedule_.empty()) return static_cast<int>(universe_.size());
        int idx = std::min<int>(n, static_cast<int>(schedule_.size()));
        return std::min(schedule_[static_cast<std::size_t>(idx) - 1],
                        static_cast<int>(universe_.size()));
    }

public:
    saturation_process(std::vector<sent_id> axioms, std::vector<int> schedule,
                       std::vector<atom_id> universe, sentence_arena& arena,
                       int atom_cap = default_atom_cap)
        : axioms_(std::move(axioms)), schedule_(std::move(schedule)),
          universe_(std::move(universe)), arena_(&arena), atom_cap_(atom_cap) {
        for (std::size_t i = 1; i < schedule_.size(); ++i)
            if (schedule_[i] < schedule_[i - 1])
                throw config_error("saturation schedule must be monotone");
    }

    const std::vector<sent_id>& day(int n) override {
        while (static_cast<int>(cache_.size()) < n) {
            int d = static_cast<int>(cache_.size()) + 1;
            cache_.push_back(build(d));
        }
        return cache_[static_cast<std::size_t>(n) - 1];
    }

private:
    std::vector<sent_id> build(int n) {
        std::vector<atom_id> atoms(universe_.begin(),
                                   universe_.begin() + schedule_at(n));
        // enumerate sentences by size
        std::vector<std::vector<sent_id>> by_size(static_cast<std::size_t>(n) + 1);
        auto& s1 = by_size[1];
        s1.push_back(arena_->top());
        s1.push_back(arena_->bottom());
        for (atom_id a : atoms) s1.push_back(arena_->atom(a));
        for (int s = 2; s <= n; ++s) {
            auto& out = by_size[static_cast<std::size_t>(s)];
            for (sent_id x : by_size[static_cast<std::size_t>(s) - 1]) out.push_back(arena_->neg(x));
            for (int op = 0; op < 4; ++op)
                for (int i = 1; i <= s - 2; ++i)
                    for (sent_id a : by_size[static_cast<std::size_t>(i)])
                        for (sent_id b : by_size[static_cast<std::size_t>(s) - 1 - static_cast<std::size_t>(i)])
                            out.push_back(op == 0   ? arena_->conj(a, b)
                                          : op == 1 ? arena_->disj(a, b)
                                          : op == 2 ? arena_->impl(a, b)
                                                    : arena_->iff(a, b));
        }

        // assignments over the axiom atoms plus the scheduled universe
        std::vector<atom_id> scope = atoms;
        for (sent_id ax : axioms_) {
            const auto& aa = arena_->atoms_of(ax);
            scope.insert(scope.end(), aa.begin(), aa.end());
        }
        std::vector<world> models = plausible_worlds(*arena_, axioms_, scope, atom_cap_);

        std::vector<sent_id> out;
        for (int s = 1; s <= n; ++s)
            for (sent_id cand : by_size[static_cast<std::size_t>(s)]) {
                bool holds = true; // vacuously, if the axioms are inconsistent
                for (const world& w : models)
                    if (!eval_sentence(*arena_, w, cand)) {
                        holds = false;
                        break;
                    }
                if (holds) out.push_back(cand);
            }
        detail::sort_unique(out);
        return out;
    }
};

// --- reflective (self-reference demo) ----------------------------------------
//
// At day i+lag, inserts chi_i into D iff the committed price P_i(chi_i) was
// below p. Still a fixed computable process for a deterministic run, since it
// reads only strictly earlier committed prices.

class reflective_process : public deductive_process {
    std::vector<sent_id> chis_; // chis_[i-1] is the day-i diagonal sentence
    int lag_;
    rat threshold_;
    std::unique_ptr<deductive_process> base_; // optional scripted backdrop
    const market_view* market_ = nullptr;
    std::deque<std::vector<sent_id>> cache_;

public:
    reflective_process(std::vector<sent_id> chis, int lag, rat threshold,
                       std::unique_ptr<deductive_process> base = nullptr)
        : chis_(std::move(chis)), lag_(lag), threshold_(std::move(threshold)),
          base_(std::move(base)) {
        if (lag_ < 1) throw config_error("reflective lag must be >= 1");
    }

    void attach_market(const market_view* mv) override { market_ = mv; }
    bool reflective() const override { return true; }

    sent_id chi(int i) const { return chis_.at(static_cast<std::size_t>(i) - 1); }
    int chi_count() const { return static_cast<int>(chis_.size()); }

    const std::vector<sent_id>& day(int n) override {
        while (static_cast<int>(cache_.size()) < n) {
            int d = static_cast<int>(cache_.size()) + 1;
            std::vector<sent_id> cur = d > 1 ? cache_.back() : std::vector<sent_id>{};
            if (base_) {
                const auto& b = base_->day(d);
                cur.insert(cur.end(), b.begin(), b.end());
            }
            int i = d - lag_;
            if (i >= 1 && i <= static_cast<int>(chis_.size())) {
                if (!market_) throw config_error("reflective process queried without a market");
                if (market_->committed_days() < i)
                    throw config_error("reflective process queried past committed prefix");
                if (market_->price(i, chi(i)) < threshold_) cur.push_back(chi(i));
            }
            detail::sort_unique(cur);
            cache_.push_back(std::move(cur));
        }
        return cache_[static_cast<std::size_t>(n) - 1];
    }
};

} // namespace lia
