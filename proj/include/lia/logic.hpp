#pragma once

// Propositional sentences over opaque atoms, worlds as finite truth
// assignments, and propositionally-consistent world enumeration.
//
// Sentences are interned in an arena: structural equality is identity, so a
// sent_id is the key used everywhere (pricings, supports, theorem sets).

#include "lia/errors.hpp"
#include "lia/step_meter.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lia {

using atom_id = std::uint32_t;
using sent_id = std::uint32_t;

class atom_table {
    std::vector<std::string> labels_;
    std::map<std::string, atom_id, std::less<>> by_label_;

public:
    atom_id declare(std::string_view label) {
        auto it = by_label_.find(label);
        if (it != by_label_.end()) return it->second;
        atom_id id = static_cast<atom_id>(labels_.size());
        labels_.emplace_back(label);
        by_label_.emplace(std::string(label), id);
        return id;
    }
    std::optional<atom_id> find(std::string_view label) const {
        auto it = by_label_.find(label);
        if (it == by_label_.end()) return std::nullopt;
        return it->second;
    }
    const std::string& label(atom_id id) const { return labels_.at(id); }
    std::size_t size() const { return labels_.size(); }
};

enum class sent_kind : std::uint8_t { top, bottom, atom, neg, conj, disj, impl, iff };

struct sentence_node {
    sent_kind kind;
    atom_id atom{0};
    sent_id lhs{0}, rhs{0};
};

class sentence_arena {
    struct key {
        sent_kind kind;
        atom_id atom;
        sent_id lhs, rhs;
        bool operator==(const key&) const = default;
    };
    struct key_hash {
        std::size_t operator()(const key& k) const {
            std::size_t h = static_cast<std::size_t>(k.kind);
            h = h * 1000003u + k.atom;
            h = h * 1000003u + k.lhs;
            h = h * 1000003u + k.rhs;
            return h;
        }
    };

    std::vector<sentence_node> nodes_;
    std::vector<std::vector<atom_id>> atoms_; // sorted, per node
    std::unordered_map<key, sent_id, key_hash> intern_;

    sent_id put(const key& k) {
        auto it = intern_.find(k);
        if (it != intern_.end()) return it->second;
        sent_id id = static_cast<sent_id>(nodes_.size());
        nodes_.push_back({k.kind, k.atom, k.lhs, k.rhs});
        std::vector<atom_id> at;
        if (k.kind == sent_kind::atom) {
            at.push_back(k.atom);
        } else if (k.kind != sent_kind::top && k.kind != sent_kind::bottom) {
            at = atoms_[k.lhs];
            if (k.kind != sent_kind::neg) {
                const auto& rb = atoms_[k.rhs];
                at.insert(at.end(), rb.begin(), rb.end());
                std::sort(at.begin(), at.end());
                at.erase(std::unique(at.begin(), at.end()), at.end());
            }
        }
        atoms_.push_back(std::move(at));
        intern_.emplace(k, id);
        return id;
    }

public:
    sent_id top() { return put({sent_kind::top, 0, 0, 0}); }
    sent_id bottom() { return put({sent_kind::bottom, 0, 0, 0}); }
    sent_id atom(atom_id a) { return put({sent_kind::atom, a, 0, 0}); }
    sent_id neg(sent_id s) { return put({sent_kind::neg, 0, s, 0}); }
    sent_id conj(sent_id a, sent_id b) { return put({sent_kind::conj, 0, a, b}); }
    sent_id disj(sent_id a, sent_id b) { return put({sent_kind::disj, 0, a, b}); }
    sent_id impl(sent_id a, sent_id b) { return put({sent_kind::impl, 0, a, b}); }
    sent_id iff(sent_id a, sent_id b) { return put({sent_kind::iff, 0, a, b}); }

    const sentence_node& node(sent_id s) const { return nodes_.at(s); }
    const std::vector<atom_id>& atoms_of(sent_id s) const { return atoms_.at(s); }
    std::size_t size() const { return nodes_.size(); }

    int node_count(sent_id s) const {
        const auto& n = node(s);
        switch (n.kind) {
        case sent_kind::top:
        case sent_kind::bottom:
        case sent_kind::atom: return 1;
        case sent_kind::neg: return 1 + node_count(n.lhs);
        default: return 1 + node_count(n.lhs) + node_count(n.rhs);
        }
    }

    // Precedence: ~ > & > | > -> > <->, arrows right-associative.
    std::string to_string(sent_id s, const atom_table& at) const { return print(s, at, 0); }

private:
    // levels: 0 iff, 1 impl, 2 disj, 3 conj, 4 neg/primary
    std::string print(sent_id s, const atom_table& at, int min_level) const {
        const auto& n = node(s);
        std::string out;
        int level;
        switch (n.kind) {
        case sent_kind::top: return "T";
        case sent_kind::bottom: return "F";
        case sent_kind::atom: return at.label(n.atom);
        case sent_kind::neg: return "~" + print(n.lhs, at, 4);
        case sent_kind::conj:
            level = 3;
            out = print(n.lhs, at, level) + " & " + print(n.rhs, at, level + 1);
            break;
        case sent_kind::disj:
            level = 2;
            out = print(n.lhs, at, level) + " | " + print(n.rhs, at, level + 1);
            break;
        case sent_kind::impl:
            level = 1;
            out = print(n.lhs, at, level + 1) + " -> " + print(n.rhs, at, level);
            break;
        default:
            level = 0;
            out = print(n.lhs, at, level + 1) + " <-> " + print(n.rhs, at, level);
            break;
        }
        if (level < min_level) return "(" + out + ")";
        return out;
    }
};

// --- sentence text parser ---------------------------------------------------
//
// atoms [a-z][a-zA-Z0-9_]*, operators ~ & | -> <->, constants T F, parens.

class sentence_parser {
    std::string_view src_;
    std::size_t pos_ = 0;
    sentence_arena& arena_;
    atom_table& atoms_;
    bool allow_new_atoms_;
    int line_ = 0;

public:
    sentence_parser(std::string_view src, sentence_arena& arena, atom_table& atoms,
                    bool allow_new_atoms, int line = 0)
        : src_(src), arena_(arena), atoms_(atoms), allow_new_atoms_(allow_new_atoms), line_(line) {}

    sent_id parse() {
        sent_id s = parse_iff();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected trailing input in sentence");
        return s;
    }

private:
    [[noreturn]] void fail(const std::string& msg) {
        throw parse_error(msg + " in \"" + std::string(src_) + "\"", line_);
    }
    void skip_ws() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
    }
    bool eat(std::string_view tok) {
        skip_ws();
        if (src_.substr(pos_, tok.size()) == tok) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }
    sent_id parse_iff() {
        sent_id lhs = parse_impl();
        if (eat("<->")) return arena_.iff(lhs, parse_iff());
        return lhs;
    }
    sent_id parse_impl() {
        sent_id lhs = parse_disj();
        if (eat("->")) return arena_.impl(lhs, parse_impl());
        return lhs;
    }
    sent_id parse_disj() {
        sent_id s = parse_conj();
        while (true) {
            skip_ws();
            // don't swallow the '|' of nothing, or '-' of '->' handled above
            if (pos_ < src_.size() && src_[pos_] == '|') {
                ++pos_;
                s = arena_.disj(s, parse_conj());
            } else {
                return s;
            }
        }
    }
    sent_id parse_conj() {
        sent_id s = parse_unary();
        while (eat("&")) s = arena_.conj(s, parse_unary());
        return s;
    }
    sent_id parse_unary() {
        if (eat("~")) return arena_.neg(parse_unary());
        return parse_primary();
    }
    sent_id parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of sentence");
        char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            sent_id s = parse_iff();
            if (!eat(")")) fail("missing ')'");
            return s;
        }
        if (c == 'T' && !is_ident_char(peek_at(pos_ + 1))) {
            ++pos_;
            return arena_.top();
        }
        if (c == 'F' && !is_ident_char(peek_at(pos_ + 1))) {
            ++pos_;
            return arena_.bottom();
        }
        if (c >= 'a' && c <= 'z') {
            std::size_t start = pos_;
            while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
            std::string_view name = src_.substr(start, pos_ - start);
            if (auto id = atoms_.find(name)) return arena_.atom(*id);
            if (!allow_new_atoms_) fail("undeclared atom '" + std::string(name) + "'");
            return arena_.atom(atoms_.declare(name));
        }
        fail(std::string("unexpected character '") + c + "'");
    }
    static bool is_ident_char(char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    }
    char peek_at(std::size_t i) const { return i < src_.size() ? src_[i] : '\0'; }
};

inline sent_id parse_sentence(std::string_view text, sentence_arena& arena, atom_table& atoms,
                              bool allow_new_atoms = false, int line = 0) {
    return sentence_parser(text, arena, atoms, allow_new_atoms, line).parse();
}

// --- worlds -------------------------------------------------------------

// Truth assignment over a finite, sorted atom set. Any sentence whose atoms
// are covered gets its value compositionally, so every world here is
// propositionally consistent by construction.
struct world {
    std::vector<atom_id> atoms; // ascending
    std::uint64_t bits = 0;     // bit i = value of atoms[i]

    std::optional<bool> value(atom_id a) const {
        auto it = std::lower_bound(atoms.begin(), atoms.end(), a);
        if (it == atoms.end() || *it != a) return std::nullopt;
        return (bits >> (it - atoms.begin())) & 1u;
    }
};

inline bool eval_sentence(const sentence_arena& arena, const world& w, sent_id s) {
    tick_steps();
    const auto& n = arena.node(s);
    switch (n.kind) {
    case sent_kind::top: return true;
    case sent_kind::bottom: return false;
    case sent_kind::atom: {
        auto v = w.value(n.atom);
        if (!v) throw eval_error("world does not cover atom id " + std::to_string(n.atom));
        return *v;
    }
    case sent_kind::neg: return !eval_sentence(arena, w, n.lhs);
    case sent_kind::conj: return eval_sentence(arena, w, n.lhs) && eval_sentence(arena, w, n.rhs);
    case sent_kind::disj: return eval_sentence(arena, w, n.lhs) || eval_sentence(arena, w, n.rhs);
    case sent_kind::impl: return !eval_sentence(arena, w, n.lhs) || eval_sentence(arena, w, n.rhs);
    default: return eval_sentence(arena, w, n.lhs) == eval_sentence(arena, w, n.rhs);
    }
}

constexpr int default_atom_cap = 20;

// All assignments over `atoms` under which every sentence of D is true, in
// lexicographic order (first atom id is the most significant coordinate,
// 0 before 1). May be empty (D propositionally inconsistent).
inline std::vector<world> plausible_worlds(const sentence_arena& arena,
                                           const std::vector<sent_id>& d,
                                           std::vector<atom_id> atoms,
                                           int atom_cap = default_atom_cap) {
    std::sort(atoms.begin(), atoms.end());
    atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
    for (sent_id s : d)
        for (atom_id a : arena.atoms_of(s))
            if (!std::binary_search(atoms.begin(), atoms.end(), a))
                throw eval_error("plausible_worlds: atom set does not cover D");
    if (static_cast<int>(atoms.size()) > atom_cap)
        throw cap_exceeded("world enumeration over " + std::to_string(atoms.size()) +
                           " atoms exceeds cap " + std::to_string(atom_cap));

    std::vector<world> out;
    const std::size_t k = atoms.size();
    const std::uint64_t total = 1ull << k;
    for (std::uint64_t counter = 0; counter < total; ++counter) {
        tick_steps();
        world w;
        w.atoms = atoms;
        // counter's MSB-first reading is the lexicographic tuple; stored bits
        // are per-atom-index for cheap lookup.
        for (std::size_t i = 0; i < k; ++i)
            if ((counter >> (k - 1 - i)) & 1u) w.bits |= 1ull << i;
        bool ok = true;
        for (sent_id s : d)
            if (!eval_sentence(arena, w, s)) {
                ok = false;
                break;
            }
        if (ok) out.push_back(std::move(w));
    }
    return out;
}

} // namespace lia
