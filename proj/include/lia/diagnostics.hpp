#pragma once

// Finite-horizon observables over committed markets: exploitation audits,
// coherence gaps, calibration ratios, conditional markets, approximate
// expectations, and CSV export/import. Everything here is a read-only
// consumer of committed state; the asymptotic theorems these mirror are
// reported as curves, never asserted.

#include "lia/budgeter.hpp"
#include "lia/config.hpp"
#include "lia/deduction.hpp"
#include "lia/firm.hpp"
#include "lia/market_maker.hpp"

#include <deque>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

namespace lia {

// --- exploitation audits --------------------------------------------------

// per-day (min, max) plausible value of cumulative holdings; nullopt marks a
// day whose plausible world set is empty
struct audit_trace {
    std::vector<std::optional<std::pair<rat, rat>>> per_day; // index day-1
};

inline audit_trace exploitation_audit(const sentence_arena& arena,
                                      const std::function<trading_strategy(int)>& gen,
                                      const history& market, deductive_process& d, int horizon,
                                      int atom_cap = default_atom_cap) {
    if (horizon > static_cast<int>(market.size()))
        throw eval_error("audit horizon exceeds the market history");
    audit_trace out;
    affine_combination cumulative;
    std::vector<atom_id> scope;
    for (int n = 1; n <= horizon; ++n) {
        trading_strategy t = gen(n);
        if (t.day() != n || !t.well_formed())
            throw eval_error("audited trader emitted a malformed day-" + std::to_string(n) +
                             " strategy");
        cumulative += execute(t, market);
        for (sent_id s : t.support()) {
            const auto& sa = arena.atoms_of(s);
            scope.insert(scope.end(), sa.begin(), sa.end());
        }
        out.per_day.push_back(
            plausible_value_range(arena, cumulative, d.day(n), scope, atom_cap));
    }
    return out;
}

// The firm trader is stateful (budgeting reacts to realized breaches), so its
// audit replays the combination day by day on a fresh runtime.
inline audit_trace exploitation_audit_firm(const trader_catalog& cat, sentence_arena& arena,
                                           deductive_process& d, const history& market,
                                           int horizon, const firm_options& opt = {},
                                           int atom_cap = default_atom_cap) {
    if (horizon > static_cast<int>(market.size()))
        throw eval_error("audit horizon exceeds the market history");
    catalog_runtime rt(&cat, &arena, &d, atom_cap);
    audit_trace out;
    affine_combination cumulative;
    std::vector<atom_id> scope;
    history prefix;
    for (int n = 1; n <= horizon; ++n) {
        trading_strategy firm = combine(rt, n, prefix, opt);
        prefix.push_back(market[static_cast<std::size_t>(n) - 1]);
        cumulative += execute(firm, prefix);
        for (sent_id s : firm.support()) {
            const auto& sa = arena.atoms_of(s);
            scope.insert(scope.end(), sa.begin(), sa.end());
        }
        out.per_day.push_back(
            plausible_value_range(arena, cumulative, d.day(n), scope, atom_cap));
        rt.commit_day(prefix);
    }
    return out;
}

// --- coherence --------------------------------------------------------------

struct coherence_decls {
    std::vector<sent_id> tracked;                        // candidates for gaps (i) and (ii)
    std::vector<std::pair<sent_id, sent_id>> exclusive;  // provably-exclusive pairs, gap (iii)
};

struct coherence_report_t {
    struct day_row {
        std::optional<rat> theorem_gap;    // max 1 - P_n(phi), phi decided true
        std::optional<rat> refuted_gap;    // max P_n(phi), phi decided false
        std::optional<rat> additivity_gap; // max |P(phi|psi) - P(phi) - P(psi)|
    };
    std::vector<day_row> days;

    std::optional<rat> max_gap(int day) const {
        const day_row& r = days.at(static_cast<std::size_t>(day) - 1);
        std::optional<rat> out;
        for (const auto& g : {r.theorem_gap, r.refuted_gap, r.additivity_gap})
            if (g) out = out ? rmax(*out, *g) : *g;
        return out;
    }
};

// decided(+1/-1/0): whether every world consistent with D agrees on s
inline int decided_by(const sentence_arena& arena, const std::vector<sent_id>& d, sent_id s,
                      int atom_cap = default_atom_cap) {
    std::vector<atom_id> scope = arena.atoms_of(s);
    for (sent_id t : d) {
        const auto& ta = arena.atoms_of(t);
        scope.insert(scope.end(), ta.begin(), ta.end());
    }
    std::vector<world> ws = plausible_worlds(arena, d, scope, atom_cap);
    if (ws.empty()) return +1; // explosion: everything is a theorem
    bool v0 = eval_sentence(arena, ws[0], s);
    for (const world& w : ws)
        if (eval_sentence(arena, w, s) != v0) return 0;
    return v0 ? +1 : -1;
}

inline coherence_report_t coherence_report(sentence_arena& arena, const history& market,
                                           deductive_process& d, const coherence_decls& decls,
                                           int atom_cap = default_atom_cap) {
    coherence_report_t out;
    for (int n = 1; n <= static_cast<int>(market.size()); ++n) {
        const pricing& p = market[static_cast<std::size_t>(n) - 1];
        const auto& dn = d.day(n);
        coherence_report_t::day_row row;
        // the day's theorems themselves, plus tracked sentences D_n decides
        std::vector<sent_id> theorems = dn;
        for (sent_id s : decls.tracked) {
            int v = decided_by(arena, dn, s, atom_cap);
            if (v > 0) theorems.push_back(s);
            if (v < 0) {
                rat gap = p.value(s);
                row.refuted_gap = row.refuted_gap ? rmax(*row.refuted_gap, gap) : gap;
            }
        }
        for (sent_id s : theorems) {
            rat gap = rat(1) - p.value(s);
            row.theorem_gap = row.theorem_gap ? rmax(*row.theorem_gap, gap) : gap;
        }
        for (const auto& [a, b] : decls.exclusive) {
            rat gap = (p.value(arena.disj(a, b)) - p.value(a) - p.value(b)).abs();
            row.additivity_gap = row.additivity_gap ? rmax(*row.additivity_gap, gap) : gap;
        }
        out.days.push_back(std::move(row));
    }
    return out;
}

// --- calibration ---------------------------------------------------------------

// running ratio sum Ind*(truth) / sum Ind along the diagonal P_i(phi_i);
// entries are empty until the denominator is positive
inline std::vector<std::optional<rat>> calibration_stats(
    const sentence_arena& arena, const history& market,
    const std::function<sent_id(int)>& phi_at, deductive_process& d, const rat& band_lo,
    const rat& band_hi, const std::function<rat(int)>& delta_at, int horizon, int audit_horizon,
    int atom_cap = default_atom_cap) {
    auto ramp = [](const rat& x) { return rmax(rat(0), rmin(rat(1), x)); };
    std::vector<std::optional<rat>> out;
    rat num(0), den(0);
    for (int i = 1; i <= horizon; ++i) {
        sent_id s = phi_at(i);
        int tv = decided_by(arena, d.day(audit_horizon), s, atom_cap);
        if (tv == 0)
            throw eval_error("calibration: sentence undecided at the audit horizon");
        rat px = market.at(static_cast<std::size_t>(i) - 1).value(s);
        rat delta = delta_at(i);
        rat ind = rmin(ramp((px - band_lo) / delta), ramp((band_hi - px) / delta));
        num += ind * (tv > 0 ? rat(1) : rat(0));
        den += ind;
        out.push_back(den.is_zero() ? std::optional<rat>{} : std::optional<rat>{num / den});
    }
    return out;
}

// --- conditional market and expectations ------------------------------------

inline rat conditional_price(const pricing& p, sent_id conj, sent_id given) {
    rat pg = p.value(given);
    if (pg.is_zero()) return rat(1);
    rat pc = p.value(conj);
    if (pc < pg) return pc / pg;
    return rat(1);
}

// pointwise P_n(phi | psi) over each day's support
inline history conditional_market(sentence_arena& arena, const history& market, sent_id given) {
    history out;
    for (const pricing& p : market) {
        pricing q;
        for (const auto& [s, v] : p.items())
            q.set(s, conditional_price(p, arena.conj(s, given), given));
        out.push_back(std::move(q));
    }
    return out;
}

// E_k at day n over a threshold family s_i ("X > i/k", i = 0..k-1)
inline rat expectation(const history& market, int n, const std::vector<sent_id>& thresholds) {
    if (thresholds.empty()) throw eval_error("expectation: empty threshold family");
    const pricing& p = market.at(static_cast<std::size_t>(n) - 1);
    rat sum(0);
    for (sent_id s : thresholds) sum += p.value(s);
    return sum / rat(static_cast<long>(thresholds.size()));
}

// --- CSV ------------------------------------------------------------------------

// one row per (day, key): day,key,exact p/q,decimal approximation
class csv_writer {
    std::ostream& out_;
    int digits_;

public:
    explicit csv_writer(std::ostream& out, int digits = 9) : out_(out), digits_(digits) {
        out_ << "day,key,exact,approx\n";
    }
    void row(int day, const std::string& key, const rat& v) {
        out_ << day << "," << key << "," << v.str() << "," << v.decimal(digits_) << "\n";
    }
    void row(int day, const std::string& key, const std::optional<rat>& v) {
        if (v)
            row(day, key, *v);
        else
            out_ << day << "," << key << ",," "\n";
    }
};

inline void export_csv(std::ostream& out, const sentence_arena& arena, const atom_table& atoms,
                       const history& market, int digits = 9) {
    csv_writer w(out, digits);
    for (int n = 1; n <= static_cast<int>(market.size()); ++n)
        for (const auto& [s, v] : market[static_cast<std::size_t>(n) - 1].items())
            w.row(n, arena.to_string(s, atoms), v);
}

inline void export_csv(std::ostream& out, const audit_trace& trace, int digits = 9) {
    csv_writer w(out, digits);
    for (int n = 1; n <= static_cast<int>(trace.per_day.size()); ++n) {
        const auto& r = trace.per_day[static_cast<std::size_t>(n) - 1];
        w.row(n, "min", r ? std::optional<rat>{r->first} : std::nullopt);
        w.row(n, "max", r ? std::optional<rat>{r->second} : std::nullopt);
    }
}

inline void export_csv(std::ostream& out, const coherence_report_t& rep, int digits = 9) {
    csv_writer w(out, digits);
    for (int n = 1; n <= static_cast<int>(rep.days.size()); ++n) {
        const auto& r = rep.days[static_cast<std::size_t>(n) - 1];
        w.row(n, "theorem_gap", r.theorem_gap);
        w.row(n, "refuted_gap", r.refuted_gap);
        w.row(n, "additivity_gap", r.additivity_gap);
    }
}

// --- market loading (snapshot or CSV, self-describing) ------------------------

class frozen_process : public deductive_process {
    std::deque<std::vector<sent_id>> days_;

public:
    frozen_process(const std::map<int, std::vector<sent_id>>& fresh_by_day, int horizon) {
        std::vector<sent_id> cur;
        for (int n = 1; n <= horizon; ++n) {
            auto it = fresh_by_day.find(n);
            if (it != fresh_by_day.end()) {
                cur.insert(cur.end(), it->second.begin(), it->second.end());
                std::sort(cur.begin(), cur.end());
                cur.erase(std::unique(cur.begin(), cur.end()), cur.end());
            }
            days_.push_back(cur);
        }
        if (days_.empty()) days_.emplace_back();
    }
    const std::vector<sent_id>& day(int n) override {
        std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(n), days_.size());
        return days_[i - 1];
    }
};

struct loaded_market {
    sentence_arena arena;
    atom_table atoms;
    history hist;
    std::map<int, std::vector<sent_id>> deduction_fresh;

    std::unique_ptr<frozen_process> frozen() const {
        return std::make_unique<frozen_process>(deduction_fresh,
                                                static_cast<int>(hist.size()));
    }
};

// Snapshot loading without a config: checksum-verified, prices and the frozen
// deductive prefix only (no re-verification, which needs the catalog).
inline loaded_market load_market_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw snapshot_error("cannot open snapshot: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    auto nl = text.rfind("checksum ");
    if (nl == std::string::npos) throw snapshot_error("missing checksum trailer");
    std::string body = text.substr(0, nl);
    std::string stored = text.substr(nl + 9);
    while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
    if (stored != hex64(fnv1a64(body)))
        throw snapshot_error("snapshot checksum mismatch (corrupt file)");

    loaded_market out;
    std::istringstream lines(body);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind("lia snapshot ", 0) == 0) {
            if (line.substr(13) != snapshot_format_version)
                throw snapshot_error("snapshot format version mismatch");
        } else if (line.rfind("atoms", 0) == 0 && line.rfind("atoms ", 0) == 0) {
            for (const auto& name : split_list(line.substr(6), ','))
                out.atoms.declare(name);
        } else if (line.rfind("day ", 0) == 0) {
            out.hist.emplace_back();
        } else if (line.rfind("deduction ", 0) == 0) {
            auto colon = line.find(':');
            int d = std::stoi(line.substr(10, colon - 10));
            for (const auto& t : split_list(line.substr(colon + 1)))
                out.deduction_fresh[d].push_back(parse_sentence(t, out.arena, out.atoms));
        } else if (line.rfind("search ", 0) == 0 || line.rfind("fingerprint ", 0) == 0 ||
                   line.rfind("days ", 0) == 0 || line.rfind("final ", 0) == 0 ||
                   line.rfind("cache ", 0) == 0 || line.empty()) {
            // header and cache lines are not needed to read the market
        } else {
            auto eq = line.rfind(" = ");
            if (eq == std::string::npos || out.hist.empty())
                throw snapshot_error("unparseable snapshot line: " + line);
            sent_id s = parse_sentence(line.substr(0, eq), out.arena, out.atoms);
            auto v = rat::parse(line.substr(eq + 3));
            if (!v) throw snapshot_error("bad price: " + line);
            out.hist.back().set(s, *v);
        }
    }
    return out;
}

// CSV market input mirrors export_csv, so externally produced markets can be
// audited. Atoms are declared in first-appearance order.
inline loaded_market load_market_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open market csv: " + path);
    loaded_market out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line.rfind("day,key,exact", 0) != 0)
                throw parse_error("market csv must start with 'day,key,exact,approx'", 1);
            continue;
        }
        if (line.empty()) continue;
        auto c1 = line.find(',');
        auto c2 = line.find(',', c1 + 1);
        auto c3 = line.find(',', c2 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos || c3 == std::string::npos)
            throw parse_error("market csv row needs 4 columns", line_no);
        int day = std::stoi(line.substr(0, c1));
        std::string key = line.substr(c1 + 1, c2 - c1 - 1);
        auto v = rat::parse(line.substr(c2 + 1, c3 - c2 - 1));
        if (!v) throw parse_error("bad exact value in market csv", line_no);
        if (day <= 0) throw parse_error("bad day in market csv", line_no);
        if (static_cast<int>(out.hist.size()) < day) out.hist.resize(static_cast<std::size_t>(day));
        sent_id s = parse_sentence(key, out.arena, out.atoms, /*allow_new_atoms=*/true, line_no);
        out.hist[static_cast<std::size_t>(day) - 1].set(s, *v);
    }
    return out;
}

} // namespace lia
