#pragma once

// The day loop: each day, hand the firm's combined strategy to the market
// maker and commit the returned belief state. A session owns the whole run
// state (atom table, sentence arena, process, catalog, committed prices,
// breach caches) and serializes to a checksummed structured-text snapshot.
// Runs are bit-reproducible: rerunning a config gives a byte-identical
// snapshot, and loading a snapshot re-verifies every committed day.

#include "lia/config.hpp"
#include "lia/deduction.hpp"
#include "lia/firm.hpp"
#include "lia/market_maker.hpp"
#include "lia/trader.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace lia {

// --- catalog spec strings -----------------------------------------------------
//
//   coherence(phi="a", psi="b", start=1)     -> the four limit-coherence auditors
//   coherence_buy(phi="a", start=1)          (and _sell, _split, _merge)
//   convergence(phi="c", p=1/2, eps=1/4)
//   nondogmatism(phi="b")
//   pseudorandom(sentences="a; b", p=1/2, eps=1/4)   or pattern="chi"
//   program:traders/dipbuyer.lia
//
// Any entry may add budget="c0,c1,..." to override the step-budget polynomial.

namespace detail {

struct spec_call {
    std::string name;
    std::map<std::string, std::string> args;
};

inline spec_call parse_spec_call(const std::string& text) {
    spec_call out;
    auto open = text.find('(');
    if (open == std::string::npos) {
        out.name = text;
        return out;
    }
    if (text.back() != ')') throw config_error("catalog entry missing ')': " + text);
    out.name = text.substr(0, open);
    std::string body = text.substr(open + 1, text.size() - open - 2);
    std::size_t pos = 0;
    while (pos < body.size()) {
        while (pos < body.size() && (body[pos] == ' ' || body[pos] == ',')) ++pos;
        if (pos >= body.size()) break;
        auto eq = body.find('=', pos);
        if (eq == std::string::npos) throw config_error("catalog arg missing '=': " + text);
        std::string key = body.substr(pos, eq - pos);
        auto e = key.find_last_not_of(" \t");
        key = key.substr(0, e + 1);
        pos = eq + 1;
        while (pos < body.size() && body[pos] == ' ') ++pos;
        std::string value;
        if (pos < body.size() && body[pos] == '"') {
            auto close = body.find('"', pos + 1);
            if (close == std::string::npos) throw config_error("unterminated quote: " + text);
            value = body.substr(pos + 1, close - pos - 1);
            pos = close + 1;
        } else {
            auto comma = body.find(',', pos);
            value = body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            auto b = value.find_last_not_of(" \t");
            value = value.substr(0, b + 1);
            pos = comma == std::string::npos ? body.size() : comma;
        }
        out.args.emplace(std::move(key), std::move(value));
    }
    return out;
}

} // namespace detail

struct catalog_context {
    sentence_arena* arena;
    atom_table* atoms;
    std::shared_ptr<deductive_process> process;
    std::string base_dir;
    int atom_cap = default_atom_cap;
};

inline std::vector<trader> make_traders(const std::string& spec, const catalog_context& ctx) {
    if (spec.rfind("program:", 0) == 0) {
        std::filesystem::path p = std::filesystem::path(ctx.base_dir) / spec.substr(8);
        std::ifstream in(p);
        if (!in) throw config_error("cannot open trader program: " + p.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return {program_trader(p.filename().string(), strategy_template{buf.str()}, ctx.arena,
                               ctx.atoms)};
    }
    detail::spec_call call = detail::parse_spec_call(spec);
    auto arg = [&](const char* key) -> std::string {
        auto it = call.args.find(key);
        if (it == call.args.end())
            throw config_error("catalog entry '" + call.name + "' needs " + key + "=...");
        return it->second;
    };
    auto sent = [&](const char* key) {
        return parse_sentence(arg(key), *ctx.arena, *ctx.atoms);
    };
    auto ratio = [&](const char* key) {
        auto r = rat::parse(arg(key));
        if (!r) throw config_error("bad rational for " + std::string(key) + " in: " + spec);
        return *r;
    };
    auto start = [&]() {
        auto it = call.args.find("start");
        return it == call.args.end() ? 1 : std::stoi(it->second);
    };

    std::vector<trader> out;
    if (call.name == "coherence") {
        out = coherence_auditors(sent("phi"), sent("psi"), start(), *ctx.arena);
    } else if (call.name == "coherence_buy") {
        out = {coherence_buy(sent("phi"), start())};
    } else if (call.name == "coherence_sell") {
        out = {coherence_sell(sent("phi"), start())};
    } else if (call.name == "coherence_split" || call.name == "coherence_merge") {
        sent_id phi = sent("phi"), psi = sent("psi");
        out = {coherence_split(phi, psi, ctx.arena->disj(phi, psi), start(),
                               call.name == "coherence_merge")};
    } else if (call.name == "convergence") {
        out = {convergence_auditor(sent("phi"), ratio("p"), ratio("eps"))};
    } else if (call.name == "nondogmatism") {
        out = {nondogmatism_auditor(sent("phi"))};
    } else if (call.name == "pseudorandom") {
        std::vector<sent_id> seq;
        if (call.args.count("sentences")) {
            for (const auto& s : split_list(arg("sentences")))
                seq.push_back(parse_sentence(s, *ctx.arena, *ctx.atoms));
        } else if (call.args.count("pattern")) {
            std::string pat = arg("pattern");
            for (int i = 1;; ++i) {
                auto id = ctx.atoms->find(pat + std::to_string(i));
                if (!id) break;
                seq.push_back(ctx.arena->atom(*id));
            }
        }
        if (seq.empty())
            throw config_error("pseudorandom needs sentences=... or pattern=... with declared atoms");
        auto phi_at = [seq](int i) {
            return seq[static_cast<std::size_t>(i - 1) % seq.size()];
        };
        out = {pseudorandom_auditor(phi_at, ratio("p"), ratio("eps"), ctx.process, ctx.arena,
                                    ctx.atom_cap)};
    } else {
        throw config_error("unknown catalog builder: " + call.name);
    }
    if (call.args.count("budget")) {
        poly_budget pb;
        pb.coeffs.clear();
        for (const auto& c : split_list(call.args.at("budget"), ','))
            pb.coeffs.push_back(static_cast<std::uint64_t>(std::stoull(c)));
        for (auto& t : out) t.budget = pb;
    }
    return out;
}

// --- session -------------------------------------------------------------------

class session : public market_view {
public:
    session(const session&) = delete;
    session& operator=(const session&) = delete;

    explicit session(config cfg, std::string base_dir = ".")
        : cfg_(std::move(cfg)), base_dir_(std::move(base_dir)) {
        atom_cap_ = cfg_.get_int("logic.atom_cap", default_atom_cap);
        for (const auto& name : split_list(cfg_.get("atoms"), ',')) {
            // "chi*24" declares chi1 .. chi24
            auto star = name.find('*');
            if (star != std::string::npos) {
                std::string prefix = name.substr(0, star);
                int count = std::stoi(name.substr(star + 1));
                for (int i = 1; i <= count; ++i) atoms_.declare(prefix + std::to_string(i));
            } else {
                atoms_.declare(name);
            }
        }
        build_process();
        process_->attach_market(this);

        std::vector<trader> traders;
        for (const auto& spec : cfg_.numbered("catalog")) {
            catalog_context ctx{&arena_, &atoms_, process_, base_dir_, atom_cap_};
            for (auto& t : make_traders(spec, ctx)) traders.push_back(std::move(t));
        }
        catalog_ = std::make_unique<trader_catalog>(std::move(traders));
        runtime_ = std::make_unique<catalog_runtime>(catalog_.get(), &arena_, process_.get(),
                                                     atom_cap_);

        mm_.max_level_offset = cfg_.get_int("marketmaker.max_level", mm_.max_level_offset);
        mm_.accel_iters = cfg_.get_int("marketmaker.accel_iters", mm_.accel_iters);
        mm_.grid_budget =
            static_cast<std::uint64_t>(cfg_.get_int("marketmaker.grid_budget", 4096));
        mm_.beam_width = cfg_.get_int("marketmaker.beam_width", mm_.beam_width);
        mm_.beam_max_support =
            cfg_.get_int("marketmaker.beam_max_support", mm_.beam_max_support);
        std::string cutoff = cfg_.get("firm.cutoff", "collapsed");
        if (cutoff != "collapsed" && cutoff != "full")
            throw config_error("firm.cutoff must be 'collapsed' or 'full'");
        firm_opts_.collapse = cutoff == "collapsed";
        firm_opts_.extra_b_margin = cfg_.get_int("firm.extra_b_margin", 0);
    }

    // market_view over the committed prefix
    int committed_days() const override { return static_cast<int>(hist_.size()); }
    rat price(int day, sent_id s) const override {
        return hist_.at(static_cast<std::size_t>(day) - 1).value(s);
    }

    sentence_arena& arena() { return arena_; }
    const sentence_arena& arena() const { return arena_; }
    atom_table& atoms() { return atoms_; }
    const atom_table& atoms() const { return atoms_; }
    deductive_process& process() const { return *process_; }
    std::shared_ptr<deductive_process> process_ptr() const { return process_; }
    const trader_catalog& catalog() const { return *catalog_; }
    catalog_runtime& runtime() { return *runtime_; }
    const history& prices() const { return hist_; }
    const config& cfg() const { return cfg_; }
    const std::string& base_dir() const { return base_dir_; }
    int atom_cap() const { return atom_cap_; }
    const mm_params& market_params() const { return mm_; }
    const firm_options& firm_opts() const { return firm_opts_; }

    sent_id parse_sent(const std::string& text) {
        return parse_sentence(text, arena_, atoms_);
    }

    // the scheduled sentence sequence from diagnostics.diagonal; entries are
    // sentences, or "chi*" for every declared chi1, chi2, ...
    std::vector<sent_id> diagonal_sentences() {
        std::vector<sent_id> out;
        for (const auto& entry : split_list(cfg_.get("diagnostics.diagonal"))) {
            if (!entry.empty() && entry.back() == '*') {
                std::string prefix = entry.substr(0, entry.size() - 1);
                for (int i = 1;; ++i) {
                    auto id = atoms_.find(prefix + std::to_string(i));
                    if (!id) break;
                    out.push_back(arena_.atom(*id));
                }
            } else {
                out.push_back(parse_sent(entry));
            }
        }
        return out;
    }

    // commit one more day
    void step() {
        int n = committed_days() + 1;
        if (n > 1) {
            const auto& prev = process_->day(n - 1);
            const auto& cur = process_->day(n);
            if (!std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()))
                throw eval_error("deductive process is not nested at day " + std::to_string(n));
        }
        trading_strategy firm = combine(*runtime_, n, hist_, firm_opts_);
        pricing p = find_fixed_point(firm, hist_, n, mm_);
        if (!verify_fixed_point(firm, hist_, n, p))
            throw eval_error("internal: fixed point failed re-verification");
        hist_.push_back(std::move(p));
        runtime_->commit_day(hist_);
    }

    void run_to(int horizon) {
        while (committed_days() < horizon) step();
    }

    std::uint64_t fingerprint() const {
        std::uint64_t h = cfg_.fingerprint();
        h = fnv1a64(snapshot_format_version, h);
        h = fnv1a64(mm_search_version, h);
        return h;
    }

    // --- snapshot -------------------------------------------------------------

    std::string snapshot_text(bool final_flag = true) {
        std::ostringstream out;
        out << "lia snapshot " << snapshot_format_version << "\n";
        out << "search " << mm_search_version << "\n";
        out << "fingerprint " << hex64(fingerprint()) << "\n";
        out << "atoms ";
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            out << (i ? ", " : "") << atoms_.label(static_cast<atom_id>(i));
        out << "\n";
        out << "days " << committed_days() << "\n";
        out << "final " << (final_flag ? 1 : 0) << "\n";
        for (int n = 1; n <= committed_days(); ++n) {
            out << "day " << n << "\n";
            for (const auto& [s, v] : hist_[static_cast<std::size_t>(n) - 1].items())
                out << arena_.to_string(s, atoms_) << " = " << v.str() << "\n";
        }
        // frozen deductive prefix: sentences newly revealed at each day
        std::vector<sent_id> prev;
        for (int n = 1; n <= committed_days(); ++n) {
            const auto& cur = process_->day(n);
            std::vector<sent_id> fresh;
            std::set_difference(cur.begin(), cur.end(), prev.begin(), prev.end(),
                                std::back_inserter(fresh));
            if (!fresh.empty()) {
                out << "deduction " << n << ": ";
                for (std::size_t i = 0; i < fresh.size(); ++i)
                    out << (i ? "; " : "") << arena_.to_string(fresh[i], atoms_);
                out << "\n";
            }
            prev = cur;
        }
        for (int k = 1; k <= catalog_->size(); ++k) {
            const auto& tr = runtime_->track(k);
            out << "cache trader " << k << " min = "
                << (tr.min_so_far ? tr.min_so_far->str() : std::string("none")) << "\n";
        }
        std::string body = out.str();
        return body + "checksum " + hex64(fnv1a64(body)) + "\n";
    }

    void save_snapshot(const std::string& path, bool final_flag = true) {
        // atomic: write-temp, rename
        std::string tmp = path + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw snapshot_error("cannot write snapshot: " + path);
            out << snapshot_text(final_flag);
        }
        std::filesystem::rename(tmp, path);
    }

    // Rebuilds a session from a snapshot: checks the checksum, versions and
    // fingerprint, then replays the run, re-verifying the day-n inequality
    // and the caches for every committed day.
    static std::unique_ptr<session> load_snapshot(config cfg, const std::string& base_dir,
                                                  const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw snapshot_error("cannot open snapshot: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        std::string text = buf.str();

        auto nl = text.rfind("checksum ");
        if (nl == std::string::npos || nl == 0) throw snapshot_error("missing checksum trailer");
        std::string body = text.substr(0, nl);
        std::string stored = text.substr(nl + 9);
        while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r'))
            stored.pop_back();
        if (stored != hex64(fnv1a64(body)))
            throw snapshot_error("snapshot checksum mismatch (corrupt file)");

        auto s = std::make_unique<session>(std::move(cfg), base_dir);

        std::istringstream lines(body);
        std::string line;
        int days = -1, final_flag = -1, cur_day = 0;
        std::vector<pricing> loaded;
        std::map<int, std::vector<std::string>> deduction_lines;
        std::map<int, std::string> cache_lines;
        while (std::getline(lines, line)) {
            if (line.rfind("lia snapshot ", 0) == 0) {
                if (line.substr(13) != snapshot_format_version)
                    throw snapshot_error("snapshot format version mismatch: " + line.substr(13));
            } else if (line.rfind("search ", 0) == 0) {
                if (line.substr(7) != mm_search_version)
                    throw snapshot_error("search-order version mismatch: " + line.substr(7));
            } else if (line.rfind("fingerprint ", 0) == 0) {
                if (line.substr(12) != hex64(s->fingerprint()))
                    throw snapshot_error("config fingerprint mismatch");
            } else if (line.rfind("atoms", 0) == 0) {
                std::string want;
                for (std::size_t i = 0; i < s->atoms_.size(); ++i)
                    want += (i ? ", " : "") + s->atoms_.label(static_cast<atom_id>(i));
                if (line != "atoms " + want && !(want.empty() && line == "atoms "))
                    throw snapshot_error("snapshot atom table differs from config");
            } else if (line.rfind("days ", 0) == 0) {
                days = std::stoi(line.substr(5));
            } else if (line.rfind("final ", 0) == 0) {
                final_flag = std::stoi(line.substr(6));
            } else if (line.rfind("day ", 0) == 0) {
                cur_day = std::stoi(line.substr(4));
                if (cur_day != static_cast<int>(loaded.size()) + 1)
                    throw snapshot_error("day records out of order");
                loaded.emplace_back();
            } else if (line.rfind("deduction ", 0) == 0) {
                auto colon = line.find(':');
                int d = std::stoi(line.substr(10, colon - 10));
                deduction_lines[d] = split_list(line.substr(colon + 1));
            } else if (line.rfind("cache trader ", 0) == 0) {
                auto eq = line.find(" min = ");
                int k = std::stoi(line.substr(13, eq - 13));
                cache_lines[k] = line.substr(eq + 7);
            } else if (!line.empty()) {
                auto eq = line.rfind(" = ");
                if (eq == std::string::npos || loaded.empty())
                    throw snapshot_error("unparseable snapshot line: " + line);
                sent_id sid = parse_sentence(line.substr(0, eq), s->arena_, s->atoms_);
                auto v = rat::parse(line.substr(eq + 3));
                if (!v) throw snapshot_error("bad price in snapshot: " + line);
                loaded.back().set(sid, *v);
            }
        }
        if (days != static_cast<int>(loaded.size()))
            throw snapshot_error("day count disagrees with day records");
        if (final_flag == 0) throw snapshot_error("snapshot is flagged non-final (aborted run)");

        // replay: re-verify every committed day against a rebuilt firm
        for (int n = 1; n <= days; ++n) {
            trading_strategy firm = combine(*s->runtime_, n, s->hist_, s->firm_opts_);
            if (!verify_fixed_point(firm, s->hist_, n, loaded[static_cast<std::size_t>(n) - 1]))
                throw snapshot_error("day " + std::to_string(n) +
                                     " fails fixed-point re-verification");
            s->hist_.push_back(loaded[static_cast<std::size_t>(n) - 1]);
            s->runtime_->commit_day(s->hist_);
        }
        // frozen deduction prefix must match the recomputed process
        std::vector<sent_id> prev;
        for (int n = 1; n <= days; ++n) {
            const auto& cur = s->process_->day(n);
            std::vector<sent_id> fresh;
            std::set_difference(cur.begin(), cur.end(), prev.begin(), prev.end(),
                                std::back_inserter(fresh));
            std::vector<sent_id> stored_fresh;
            if (deduction_lines.count(n))
                for (const auto& t : deduction_lines[n])
                    stored_fresh.push_back(parse_sentence(t, s->arena_, s->atoms_));
            std::sort(stored_fresh.begin(), stored_fresh.end());
            if (fresh != stored_fresh)
                throw snapshot_error("frozen deductive prefix disagrees at day " +
                                     std::to_string(n));
            prev = cur;
        }
        for (int k = 1; k <= s->catalog_->size(); ++k) {
            const auto& tr = s->runtime_->track(k);
            std::string want = tr.min_so_far ? tr.min_so_far->str() : std::string("none");
            auto it = cache_lines.find(k);
            if (it == cache_lines.end() || it->second != want)
                throw snapshot_error("breach cache disagrees for trader " + std::to_string(k));
        }
        return s;
    }

private:
    void build_process() {
        std::string kind = cfg_.get("process.kind", "scripted");
        if (kind == "scripted") {
            process_ = std::make_shared<scripted_process>(read_rel(cfg_.get("process.file")),
                                                          arena_, atoms_);
        } else if (kind == "saturation") {
            std::vector<sent_id> axioms;
            for (const auto& t : split_list(cfg_.get("process.axioms")))
                axioms.push_back(parse_sentence(t, arena_, atoms_));
            std::vector<int> schedule;
            for (const auto& t : split_list(cfg_.get("process.schedule"), ','))
                schedule.push_back(std::stoi(t));
            std::vector<atom_id> universe;
            for (std::size_t i = 0; i < atoms_.size(); ++i)
                universe.push_back(static_cast<atom_id>(i));
            process_ = std::make_shared<saturation_process>(std::move(axioms), std::move(schedule),
                                                            std::move(universe), arena_, atom_cap_);
        } else if (kind == "paradox") {
            std::string pattern = cfg_.get("process.pattern", "chi");
            std::vector<sent_id> chis;
            for (int i = 1;; ++i) {
                auto id = atoms_.find(pattern + std::to_string(i));
                if (!id) break;
                chis.push_back(arena_.atom(*id));
            }
            if (chis.empty())
                throw config_error("paradox process: no atoms match pattern '" + pattern + "'");
            std::unique_ptr<deductive_process> base;
            if (cfg_.has("process.base"))
                base = std::make_unique<scripted_process>(read_rel(cfg_.get("process.base")),
                                                          arena_, atoms_);
            process_ = std::make_shared<reflective_process>(
                std::move(chis), cfg_.get_int("process.lag", 1),
                cfg_.get_rat("process.p", rat(1, 2)), std::move(base));
        } else {
            throw config_error("unknown process.kind: " + kind);
        }
    }

    std::string read_rel(const std::string& rel) {
        if (rel.empty()) throw config_error("process.file not set");
        std::filesystem::path p = std::filesystem::path(base_dir_) / rel;
        std::ifstream in(p);
        if (!in) throw config_error("cannot open file: " + p.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }

    config cfg_;
    std::string base_dir_;
    sentence_arena arena_;
    atom_table atoms_;
    std::shared_ptr<deductive_process> process_;
    std::unique_ptr<trader_catalog> catalog_;
    std::unique_ptr<catalog_runtime> runtime_;
    history hist_;
    mm_params mm_;
    firm_options firm_opts_;
    int atom_cap_ = default_atom_cap;
};

} // namespace lia
