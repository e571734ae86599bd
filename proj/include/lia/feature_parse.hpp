#pragma once

// Text format for feature programs and strategy templates.
//
//   v1 := P[phi1]@7 + P[phi2]@4
//   v2 := v1 + (-1)
//   return 3 * max(v1, v2)
//
// Price symbols are written P[<sentence>]@<day>. Rationals are p/q or finite
// decimals. max/min/abs/saferecip/ind are calls; -, min, abs and ind desugar
// into core nodes. Strategy templates replace the return line with one or
// more "trade <sentence> := <expr>" lines and may write relative day indices
// @n or @n-<k>, instantiated per day.

#include "lia/feature.hpp"
#include "lia/logic.hpp"

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lia {

// Raised when a template's relative day lands below day 1; the trader wrapper
// maps it to the zero strategy for that day.
struct template_day_underflow : std::runtime_error {
    template_day_underflow() : std::runtime_error("relative day index below 1") {}
};

namespace detail {

class expr_parser {
    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 0;
    sentence_arena* arena_;
    atom_table* atoms_;
    const std::map<std::string, expr_ptr, std::less<>>* vars_;
    std::optional<int> current_day_; // set in template mode
    bool allow_new_atoms_;

public:
    expr_parser(std::string_view src, int line, sentence_arena& arena, atom_table& atoms,
                const std::map<std::string, expr_ptr, std::less<>>& vars,
                std::optional<int> current_day, bool allow_new_atoms = false)
        : src_(src), line_(line), arena_(&arena), atoms_(&atoms), vars_(&vars),
          current_day_(current_day), allow_new_atoms_(allow_new_atoms) {}

    expr_ptr parse() {
        expr_ptr e = parse_sum();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) {
        throw parse_error(msg + " at column " + std::to_string(pos_ + 1), line_);
    }
    void skip_ws() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
    }
    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }
    bool eat(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c, const char* what) {
        if (!eat(c)) fail(std::string("expected '") + c + "' " + what);
    }

    expr_ptr parse_sum() {
        expr_ptr e = parse_term();
        while (true) {
            char c = peek();
            if (c == '+') {
                ++pos_;
                e = fe::sum(e, parse_term());
            } else if (c == '-') {
                ++pos_;
                e = fe::sub(e, parse_term());
            } else {
                return e;
            }
        }
    }
    expr_ptr parse_term() {
        expr_ptr e = parse_factor();
        while (peek() == '*') {
            ++pos_;
            e = fe::product(e, parse_factor());
        }
        return e;
    }
    expr_ptr parse_factor() {
        if (peek() == '-') {
            ++pos_;
            return fe::neg(parse_factor());
        }
        return parse_primary();
    }

    expr_ptr parse_primary() {
        char c = peek();
        if (c == '(') {
            ++pos_;
            expr_ptr e = parse_sum();
            expect(')', "to close group");
            return e;
        }
        if (c == 'P' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '[') return parse_price();
        if (std::isdigit(static_cast<unsigned char>(c))) return parse_rational();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
        fail("expected expression");
    }

    expr_ptr parse_price() {
        pos_ += 2; // "P["
        std::size_t close = src_.find(']', pos_);
        if (close == std::string_view::npos) fail("missing ']' in price symbol");
        std::string sent_text(src_.substr(pos_, close - pos_));
        pos_ = close + 1;
        expect('@', "after price symbol");
        int day = parse_day_index();
        sent_id s = parse_sentence(sent_text, *arena_, *atoms_, allow_new_atoms_, line_);
        return fe::price(s, day);
    }

    int parse_day_index() {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == 'n') {
            if (!current_day_) fail("relative day '@n' outside a strategy template");
            ++pos_;
            int offset = 0;
            if (pos_ < src_.size() && src_[pos_] == '-') {
                ++pos_;
                offset = parse_int("day offset");
            }
            int day = *current_day_ - offset;
            if (day < 1) throw template_day_underflow();
            return day;
        }
        int day = parse_int("day index");
        if (day <= 0) fail("day index must be positive");
        return day;
    }

    int parse_int(const char* what) {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (start == pos_) fail(std::string("expected ") + what);
        return std::stoi(std::string(src_.substr(start, pos_ - start)));
    }

    expr_ptr parse_rational() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            ++pos_;
        // a/b only when the slash is immediately followed by digits
        if (pos_ < src_.size() && src_[pos_] == '/' && pos_ + 1 < src_.size() &&
            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }
        auto r = rat::parse(src_.substr(start, pos_ - start));
        if (!r) fail("bad rational literal");
        return fe::konst(*r);
    }

    expr_ptr parse_name() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string name(src_.substr(start, pos_ - start));
        if (name == "max" || name == "min") {
            expect('(', "after function name");
            expr_ptr a = parse_sum();
            expect(',', "between arguments");
            expr_ptr b = parse_sum();
            expect(')', "to close call");
            return name == "max" ? fe::maximum(a, b) : fe::minimum(a, b);
        }
        if (name == "abs" || name == "saferecip") {
            expect('(', "after function name");
            expr_ptr a = parse_sum();
            expect(')', "to close call");
            return name == "abs" ? fe::absval(a) : fe::safe_recip(a);
        }
        if (name == "ind") return parse_ind();
        auto it = vars_->find(name);
        if (it == vars_->end()) fail("undefined variable '" + name + "'");
        return it->second;
    }

    expr_ptr parse_ind() {
        expect('(', "after ind");
        expr_ptr delta_e = parse_sum();
        if (delta_e->kind != expr_kind::constant) fail("ind threshold width must be a constant");
        rat delta = delta_e->value;
        if (delta.sign() <= 0) fail("ind threshold width must be positive");
        expect(';', "after ind width");
        expr_ptr x = parse_sum();
        char c = peek();
        if (c != '<' && c != '>') fail("expected '<' or '>' in ind");
        ++pos_;
        expr_ptr y = parse_sum();
        if (peek() == '<' || peek() == '>') {
            // two-sided band a < x < b
            char c2 = peek();
            if (c != '<' || c2 != '<') fail("two-sided ind must be written a < x < b");
            ++pos_;
            expr_ptr b = parse_sum();
            expect(')', "to close ind");
            return fe::minimum(ind_threshold(delta, y, x, ind_dir::greater),
                               ind_threshold(delta, y, b, ind_dir::less));
        }
        expect(')', "to close ind");
        return ind_threshold(delta, x, y, c == '>' ? ind_dir::greater : ind_dir::less);
    }
};

struct program_line {
    enum class kind { binding, ret, trade } what;
    std::string name;       // binding variable, or trade sentence text
    std::string expr_text;
    int line_no;
};

inline std::vector<program_line> split_program(const std::string& text) {
    std::vector<program_line> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        std::string body = line.substr(first, last - first + 1);
        if (body.rfind("return", 0) == 0 &&
            (body.size() == 6 || body[6] == ' ' || body[6] == '\t')) {
            out.push_back({program_line::kind::ret, "", body.substr(6), line_no});
            continue;
        }
        if (body.rfind("trade", 0) == 0 && body.size() > 5 &&
            (body[5] == ' ' || body[5] == '\t')) {
            auto assign = body.find(":=");
            if (assign == std::string::npos)
                throw parse_error("expected ':=' in trade line", line_no);
            std::string sent = body.substr(5, assign - 5);
            auto a = sent.find_first_not_of(" \t");
            auto b = sent.find_last_not_of(" \t");
            if (a == std::string::npos) throw parse_error("missing trade sentence", line_no);
            out.push_back({program_line::kind::trade, sent.substr(a, b - a + 1),
                           body.substr(assign + 2), line_no});
            continue;
        }
        auto assign = body.find(":=");
        if (assign == std::string::npos)
            throw parse_error("expected 'v := expr', 'trade s := expr' or 'return expr'", line_no);
        std::string name = body.substr(0, assign);
        auto a = name.find_first_not_of(" \t");
        auto b = name.find_last_not_of(" \t");
        if (a == std::string::npos) throw parse_error("missing binding name", line_no);
        out.push_back({program_line::kind::binding, name.substr(a, b - a + 1),
                       body.substr(assign + 2), line_no});
    }
    return out;
}

} // namespace detail

// A parsed feature program: bindings resolve to shared subgraphs, so rank and
// evaluation see exactly what is reachable from the return expression.
inline expr_ptr parse_feature_program(const std::string& text, sentence_arena& arena,
                                      atom_table& atoms,
                                      std::optional<int> current_day = std::nullopt,
                                      bool allow_new_atoms = false) {
    std::map<std::string, expr_ptr, std::less<>> vars;
    expr_ptr ret;
    bool have_ret = false;
    for (const auto& pl : detail::split_program(text)) {
        if (pl.what == detail::program_line::kind::trade)
            throw parse_error("'trade' lines belong to strategy templates", pl.line_no);
        if (pl.what == detail::program_line::kind::ret) {
            if (have_ret) throw parse_error("multiple return lines", pl.line_no);
            ret = detail::expr_parser(pl.expr_text, pl.line_no, arena, atoms, vars, current_day,
                                      allow_new_atoms)
                      .parse();
            have_ret = true;
            continue;
        }
        if (have_ret) throw parse_error("binding after return", pl.line_no);
        if (vars.count(pl.name)) throw parse_error("rebinding '" + pl.name + "'", pl.line_no);
        vars.emplace(pl.name, detail::expr_parser(pl.expr_text, pl.line_no, arena, atoms, vars,
                                                  current_day, allow_new_atoms)
                                  .parse());
    }
    if (!have_ret) throw parse_error("program has no return line");
    return ret;
}

// Strategy template: bindings plus trade lines; instantiated per day by the
// program-file trader.
struct strategy_template {
    std::string text;

    // Returns coefficient list in file order; empty when a relative day index
    // underflows for this day.
    std::vector<std::pair<sent_id, expr_ptr>> instantiate(int day, sentence_arena& arena,
                                                          atom_table& atoms) const {
        std::map<std::string, expr_ptr, std::less<>> vars;
        std::vector<std::pair<sent_id, expr_ptr>> coeffs;
        try {
            for (const auto& pl : detail::split_program(text)) {
                if (pl.what == detail::program_line::kind::ret)
                    throw parse_error("strategy templates use 'trade', not 'return'", pl.line_no);
                if (pl.what == detail::program_line::kind::binding) {
                    if (vars.count(pl.name))
                        throw parse_error("rebinding '" + pl.name + "'", pl.line_no);
                    vars.emplace(pl.name, detail::expr_parser(pl.expr_text, pl.line_no, arena,
                                                              atoms, vars, day)
                                              .parse());
                    continue;
                }
                sent_id s = parse_sentence(pl.name, arena, atoms, false, pl.line_no);
                coeffs.emplace_back(
                    s, detail::expr_parser(pl.expr_text, pl.line_no, arena, atoms, vars, day)
                           .parse());
            }
        } catch (const template_day_underflow&) {
            return {};
        }
        return coeffs;
    }
};

} // namespace lia
