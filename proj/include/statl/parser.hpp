#pragma once

// Surface-syntax parser: hand-written lexer + recursive descent.
//
// The surface language is ML-flavored and fully prefix/keyword-led, so no
// precedence climbing is needed; every construct is introduced by a
// keyword or a bracket and parsing stops naturally at commas, closing
// brackets, and layout keywords.
//
// Disambiguation worth knowing about:
//   - "(3, e)"   a bare nonnegative integer before the comma makes an
//                injection; pairs with an integer first component are
//                written "(3/1, e)" (the printer does this automatically);
//   - "(i, e) : ty"  ascribes the sum type of an injection;
//   - dist literals may carry their carrier, dist<ty>(...); without it the
//                carrier is inferred from the support and ambiguity is a
//                diagnostic;
//   - "#" starts a line comment.
//
// Parsing never throws out of this header: the entry points return either
// a term or a ParseDiagnostic with line/column and expected tokens.

#include "ast.hpp"
#include "measure.hpp"

#include <cctype>
#include <string>
#include <variant>
#include <vector>

namespace statl {

struct ParseDiagnostic {
    int line = 0;
    int column = 0;
    std::string message;
    std::vector<std::string> expected;
};

using ParseResult = std::variant<TermPtr, ParseDiagnostic>;

namespace detail {

enum class TokKind { Ident, Number, Punct, End };

struct Token {
    TokKind kind;
    std::string text;
    int line, col;
};

inline bool lex(const std::string& src, std::vector<Token>& out, ParseDiagnostic& diag) {
    int line = 1, col = 1;
    std::size_t i = 0;
    auto push = [&](TokKind k, std::string text, int l, int c) {
        out.push_back(Token{k, std::move(text), l, c});
    };
    while (i < src.size()) {
        char c = src[i];
        if (c == '\n') {
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++col;
            ++i;
            continue;
        }
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') ++i;
            continue;
        }
        int tl = line, tc = col;
        if (c == '=' && i + 1 < src.size() && src[i + 1] == '>') {
            push(TokKind::Punct, "=>", tl, tc);
            i += 2;
            col += 2;
            continue;
        }
        if (std::string("(){}[],|=:<>*").find(c) != std::string::npos) {
            push(TokKind::Punct, std::string(1, c), tl, tc);
            ++i;
            ++col;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i + (c == '-' ? 1 : 0);
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j < src.size() && src[j] == '/' && j + 1 < src.size() &&
                std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            push(TokKind::Number, src.substr(i, j - i), tl, tc);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() &&
                   (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' ||
                    src[j] == '\'' || src[j] == '-'))
                ++j;
            push(TokKind::Ident, src.substr(i, j - i), tl, tc);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        diag = ParseDiagnostic{tl, tc, std::string("unexpected character '") + c + "'", {}};
        return false;
    }
    push(TokKind::End, "", line, col);
    return true;
}

inline bool is_keyword(const std::string& s) {
    static const std::set<std::string> kws = {"let",  "in",   "sample", "return", "score",
                                             "norm", "stat", "case",   "of",     "fn",
                                             "if",   "then", "else",   "tt",     "ff",
                                             "dist", "fst",  "snd",    "last",   "mh-accept"};
    return kws.count(s) > 0;
}

inline bool is_prim_name(const std::string& s) {
    static const std::set<std::string> prims = {"add", "sub", "mul", "min",  "max",
                                               "abs", "lt",  "le",  "gt",   "ge",
                                               "eq",  "ne",  "bern", "dirac", "categorical"};
    return prims.count(s) > 0;
}

class Parser {
  public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    TermPtr parse_whole() {
        TermPtr t = parse_term();
        expect_end();
        return t;
    }

  private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;

    const Token& peek(std::size_t ahead = 0) const {
        std::size_t i = pos_ + ahead;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    [[noreturn]] void fail(const Token& at, std::string msg, std::vector<std::string> expected = {}) {
        throw ParseDiagnostic{at.line, at.col, std::move(msg), std::move(expected)};
    }

    bool at_punct(const std::string& p, std::size_t ahead = 0) const {
        return peek(ahead).kind == TokKind::Punct && peek(ahead).text == p;
    }
    bool at_ident(const std::string& s, std::size_t ahead = 0) const {
        return peek(ahead).kind == TokKind::Ident && peek(ahead).text == s;
    }

    void expect_punct(const std::string& p) {
        if (!at_punct(p)) fail(peek(), "expected '" + p + "'", {"'" + p + "'"});
        advance();
    }
    void expect_keyword(const std::string& kw) {
        if (!at_ident(kw)) fail(peek(), "expected '" + kw + "'", {"'" + kw + "'"});
        advance();
    }
    void expect_end() {
        if (peek().kind != TokKind::End) fail(peek(), "expected end of input", {"end of input"});
    }

    std::string expect_binder() {
        const Token& t = peek();
        if (t.kind != TokKind::Ident) fail(t, "expected a variable name", {"identifier"});
        if (is_keyword(t.text) || is_prim_name(t.text))
            fail(t, "'" + t.text + "' is reserved and cannot be a variable name", {"identifier"});
        advance();
        return t.text;
    }

    Rational expect_rational() {
        const Token& t = peek();
        if (t.kind != TokKind::Number) fail(t, "expected a rational literal", {"number"});
        auto r = rat_from_string(t.text);
        if (!r) fail(t, "malformed rational literal '" + t.text + "'", {"number"});
        advance();
        return *r;
    }

    bool peek_is_nat(std::size_t ahead = 0) const {
        const Token& t = peek(ahead);
        if (t.kind != TokKind::Number) return false;
        return t.text.find('-') == std::string::npos && t.text.find('/') == std::string::npos;
    }

    std::size_t expect_nat() {
        const Token& t = peek();
        if (!peek_is_nat()) fail(t, "expected a nonnegative integer", {"nonnegative integer"});
        advance();
        return static_cast<std::size_t>(std::stoul(t.text));
    }

    // ---- types -----------------------------------------------------------

    TyPtr parse_ty() {
        const Token& t = peek();
        if (at_ident("real")) { advance(); return ty_real(); }
        if (at_ident("unit")) { advance(); return ty_unit(); }
        if (at_ident("bool")) { advance(); return ty_bool(); }
        if (at_ident("P")) {
            advance();
            expect_punct("(");
            TyPtr a = parse_ty();
            expect_punct(")");
            return ty_prob(a);
        }
        if (at_ident("sum")) {
            advance();
            expect_punct("[");
            std::vector<TyPtr> parts;
            parts.push_back(parse_ty());
            while (at_punct(",")) {
                advance();
                parts.push_back(parse_ty());
            }
            expect_punct("]");
            return ty_sum(std::move(parts));
        }
        if (at_punct("(")) {
            advance();
            TyPtr a = parse_ty();
            expect_punct("*");
            TyPtr b = parse_ty();
            expect_punct(")");
            return ty_product(a, b);
        }
        fail(t, "expected a type", {"real", "unit", "bool", "P(", "sum[", "'('"});
    }

    // ---- carrier-directed values (dist literal entries) ------------------

    Value parse_value(const TyPtr& ty) {
        const Token& t = peek();
        switch (ty->tag) {
            case TyTag::Real:
                return value_rat(expect_rational());
            case TyTag::Unit:
                expect_punct("(");
                expect_punct(")");
                return value_unit();
            case TyTag::Product: {
                expect_punct("(");
                Value a = parse_value(ty->parts[0]);
                expect_punct(",");
                Value b = parse_value(ty->parts[1]);
                expect_punct(")");
                return value_pair(std::move(a), std::move(b));
            }
            case TyTag::Sum: {
                if (at_ident("tt") || at_ident("ff")) {
                    std::size_t tag = at_ident("tt") ? 0 : 1;
                    if (tag >= ty->parts.size() || ty->parts[tag]->tag != TyTag::Unit)
                        fail(t, "'" + t.text + "' does not inhabit " + ty_to_string(ty), {});
                    advance();
                    return value_inj(tag, value_unit());
                }
                expect_punct("(");
                std::size_t tag = expect_nat();
                if (tag >= ty->parts.size())
                    fail(t, "injection tag " + std::to_string(tag) + " out of range for " +
                                ty_to_string(ty),
                         {});
                expect_punct(",");
                Value payload = parse_value(ty->parts[tag]);
                expect_punct(")");
                return value_inj(tag, std::move(payload));
            }
            case TyTag::Prob: {
                TermPtr lit = parse_dist_literal(ty->parts[0]);
                return value_dist(*lit->dist);
            }
        }
        fail(t, "cannot parse a value here", {});
    }

    // ---- carrier-free values, with hole-typed inference ------------------
    // Holes are null TyPtr entries; join unifies two shapes.

    TyPtr join_shapes(const Token& at, const TyPtr& a, const TyPtr& b) {
        if (!a) return b;
        if (!b) return a;
        if (a->tag != b->tag)
            fail(at, "dist literal mixes values of types " + ty_to_string(a) + " and " +
                         ty_to_string(b),
                 {});
        switch (a->tag) {
            case TyTag::Real:
            case TyTag::Unit:
                return a;
            case TyTag::Product:
                return ty_product(join_shapes(at, a->parts[0], b->parts[0]),
                                  join_shapes(at, a->parts[1], b->parts[1]));
            case TyTag::Prob:
                return ty_prob(join_shapes(at, a->parts[0], b->parts[0]));
            case TyTag::Sum: {
                std::vector<TyPtr> parts;
                std::size_t n = std::max(a->parts.size(), b->parts.size());
                for (std::size_t i = 0; i < n; ++i) {
                    TyPtr x = i < a->parts.size() ? a->parts[i] : nullptr;
                    TyPtr y = i < b->parts.size() ? b->parts[i] : nullptr;
                    parts.push_back(join_shapes(at, x, y));
                }
                return ty_sum(std::move(parts));
            }
        }
        fail(at, "cannot join value types", {});
    }

    bool shape_ground(const TyPtr& a) {
        if (!a) return false;
        for (const auto& p : a->parts)
            if (!shape_ground(p)) return false;
        return true;
    }

    Value parse_free_value(TyPtr& shape) {
        const Token& t = peek();
        if (t.kind == TokKind::Number) {
            shape = ty_real();
            return value_rat(expect_rational());
        }
        if (at_ident("tt") || at_ident("ff")) {
            std::size_t tag = at_ident("tt") ? 0 : 1;
            advance();
            std::vector<TyPtr> parts(tag + 1, nullptr);
            parts[tag] = ty_unit();
            shape = ty_sum(std::move(parts));
            return value_inj(tag, value_unit());
        }
        if (at_ident("dist")) {
            TermPtr lit = parse_dist_term();
            shape = ty_prob(lit->dist->carrier);
            return value_dist(*lit->dist);
        }
        if (at_punct("(")) {
            advance();
            if (at_punct(")")) {
                advance();
                shape = ty_unit();
                return value_unit();
            }
            if (peek_is_nat() && at_punct(",", 1)) {
                std::size_t tag = expect_nat();
                expect_punct(",");
                TyPtr payload_shape;
                Value payload = parse_free_value(payload_shape);
                expect_punct(")");
                std::vector<TyPtr> parts(tag + 1, nullptr);
                parts[tag] = payload_shape;
                shape = ty_sum(std::move(parts));
                return value_inj(tag, std::move(payload));
            }
            TyPtr a_shape;
            Value a = parse_free_value(a_shape);
            expect_punct(",");
            TyPtr b_shape;
            Value b = parse_free_value(b_shape);
            expect_punct(")");
            shape = ty_product(a_shape, b_shape);
            return value_pair(std::move(a), std::move(b));
        }
        fail(t, "expected a value literal", {"number", "tt", "ff", "'('", "dist"});
    }

    // dist literal, carrier known.
    TermPtr parse_dist_literal(const TyPtr& carrier) {
        expect_keyword("dist");
        if (at_punct("<")) {
            advance();
            const Token& at = peek();
            TyPtr given = parse_ty();
            if (!ty_equal(given, carrier))
                fail(at, "dist carrier " + ty_to_string(given) + " does not match expected " +
                             ty_to_string(carrier),
                     {});
            expect_punct(">");
        }
        return finish_dist_entries(carrier);
    }

    // dist literal, carrier optional.
    TermPtr parse_dist_term() {
        const Token& kw = peek();
        expect_keyword("dist");
        if (at_punct("<")) {
            advance();
            TyPtr carrier = parse_ty();
            expect_punct(">");
            return finish_dist_entries(carrier);
        }
        // Carrier-free: collect values and weights, then infer.
        expect_punct("(");
        std::vector<std::pair<Value, Rational>> entries;
        TyPtr shape;
        if (!at_punct(")")) {
            while (true) {
                expect_punct("(");
                TyPtr s;
                const Token& at = peek();
                Value v = parse_free_value(s);
                shape = join_shapes(at, shape, s);
                expect_punct(",");
                Rational w = expect_rational();
                if (w < 0) fail(at, "dist weights must be nonnegative", {});
                expect_punct(")");
                entries.emplace_back(std::move(v), std::move(w));
                if (at_punct(",")) {
                    advance();
                    continue;
                }
                break;
            }
        }
        expect_punct(")");
        if (!shape_ground(shape))
            fail(kw, "ambiguous dist literal carrier; annotate as dist<ty>(...)", {});
        MeasureBuilder b(shape);
        for (auto& e : entries) b.add(std::move(e.first), std::move(e.second));
        return mk_dist_const(std::move(b).build());
    }

    TermPtr finish_dist_entries(const TyPtr& carrier) {
        expect_punct("(");
        MeasureBuilder b(carrier);
        if (!at_punct(")")) {
            while (true) {
                expect_punct("(");
                const Token& at = peek();
                Value v = parse_value(carrier);
                expect_punct(",");
                Rational w = expect_rational();
                if (w < 0) fail(at, "dist weights must be nonnegative", {});
                expect_punct(")");
                b.add(std::move(v), std::move(w));
                if (at_punct(",")) {
                    advance();
                    continue;
                }
                break;
            }
        }
        expect_punct(")");
        return mk_dist_const(std::move(b).build());
    }

    // ---- terms -----------------------------------------------------------

    TermPtr parse_term() {
        const Token& t = peek();
        if (t.kind == TokKind::Ident) {
            const std::string& kw = t.text;
            if (kw == "let") {
                advance();
                std::string x = expect_binder();
                expect_punct("=");
                TermPtr bound = parse_term();
                expect_keyword("in");
                TermPtr body = parse_term();
                return mk_let(x, bound, body);
            }
            if (kw == "sample") {
                advance();
                expect_punct("(");
                TermPtr d = parse_term();
                expect_punct(")");
                return mk_sample(d);
            }
            if (kw == "return") {
                advance();
                return mk_return(parse_atom());
            }
            if (kw == "score") {
                advance();
                expect_punct("(");
                TermPtr d = parse_term();
                expect_punct(")");
                return mk_score(d);
            }
            if (kw == "norm") {
                advance();
                expect_punct("(");
                TermPtr p = parse_term();
                expect_punct(")");
                return mk_norm(p);
            }
            if (kw == "stat") {
                advance();
                expect_punct("(");
                TermPtr init = parse_term();
                expect_punct(",");
                expect_keyword("fn");
                std::string x = expect_binder();
                expect_punct("=>");
                TermPtr body = parse_term();
                expect_punct(")");
                return mk_stat(init, x, body);
            }
            if (kw == "case") {
                advance();
                TermPtr scr = parse_atom();
                expect_keyword("of");
                expect_punct("{");
                std::vector<CaseBranch> branches;
                while (true) {
                    const Token& bt = peek();
                    expect_punct("(");
                    std::size_t tag = expect_nat();
                    if (tag != branches.size())
                        fail(bt,
                             "branch tags must be consecutive from 0; expected tag " +
                                 std::to_string(branches.size()),
                             {});
                    expect_punct(",");
                    std::string var = at_ident("_") ? (advance(), std::string("_")) : expect_binder();
                    expect_punct(")");
                    expect_punct("=>");
                    TermPtr body = parse_term();
                    branches.push_back(CaseBranch{var, body});
                    if (at_punct("|")) {
                        advance();
                        continue;
                    }
                    break;
                }
                expect_punct("}");
                return mk_case(scr, std::move(branches));
            }
            if (kw == "if") {
                advance();
                TermPtr c = parse_term();
                expect_keyword("then");
                TermPtr a = parse_term();
                expect_keyword("else");
                TermPtr b = parse_term();
                return mk_if(c, a, b);
            }
            if (kw == "mh-accept") {
                advance();
                expect_punct("[");
                if (peek().kind != TokKind::Ident && peek().kind != TokKind::Number)
                    fail(peek(), "expected a site tag", {"identifier", "number"});
                // A hex digest that starts with digits lexes as a run of
                // number/identifier tokens (e.g. "8924fb23"); the tag is
                // discarded and recomputed on print, so consume the run.
                do advance();
                while (peek().kind == TokKind::Ident || peek().kind == TokKind::Number);
                expect_punct("]");
                expect_punct("(");
                expect_keyword("fn");
                std::string binder = expect_binder();
                expect_punct("=>");
                TermPtr weight = parse_term();
                expect_punct(")");
                expect_punct("(");
                TermPtr cur = parse_term();
                expect_punct(",");
                TermPtr prop = parse_term();
                expect_punct(")");
                return mk_mh_accept(binder, weight, cur, prop);
            }
        }
        return parse_atom();
    }

    TermPtr parse_atom() {
        const Token& t = peek();
        if (t.kind == TokKind::Number) return mk_const(expect_rational());
        if (t.kind == TokKind::Ident) {
            const std::string& s = t.text;
            if (s == "tt") { advance(); return mk_tt(); }
            if (s == "ff") { advance(); return mk_ff(); }
            if (s == "dist") return parse_dist_term();
            if (s == "fst" || s == "snd" || s == "last") {
                advance();
                expect_punct("(");
                TermPtr arg = parse_term();
                expect_punct(")");
                ProjKind pk = s == "fst" ? ProjKind::First
                              : s == "snd" ? ProjKind::Second
                                           : ProjKind::Last;
                return mk_proj(pk, arg);
            }
            if (is_prim_name(s)) {
                advance();
                std::vector<TermPtr> args;
                if (at_punct("(")) {
                    advance();
                    if (!at_punct(")")) {
                        args.push_back(parse_term());
                        while (at_punct(",")) {
                            advance();
                            args.push_back(parse_term());
                        }
                    }
                    expect_punct(")");
                } else {
                    args.push_back(parse_atom());  // juxtaposed single argument, e.g. bern 1/2
                }
                return mk_prim(s, std::move(args));
            }
            if (is_keyword(s))
                fail(t, "unexpected '" + s + "' here", {"a deterministic atom"});
            advance();
            return mk_var(s);
        }
        if (at_punct("(")) {
            advance();
            if (at_punct(")")) {
                advance();
                return mk_unit();
            }
            // A bare nonnegative integer followed by ',' reads as an
            // injection tag.
            if (peek_is_nat() && at_punct(",", 1)) {
                std::size_t tag = expect_nat();
                expect_punct(",");
                TermPtr payload = parse_term();
                expect_punct(")");
                return maybe_ascribe(mk_inj(tag, payload));
            }
            TermPtr first = parse_term();
            if (at_punct(",")) {
                advance();
                TermPtr second = parse_term();
                expect_punct(")");
                return mk_pair(first, second);
            }
            expect_punct(")");
            return first;
        }
        fail(t, "expected a term", {"'('", "number", "identifier", "keyword"});
    }

    // "(i, e) : ty" — ascription suffix, injections only.
    TermPtr maybe_ascribe(TermPtr inj) {
        if (!at_punct(":")) return inj;
        advance();
        TyPtr ty = parse_ty();
        return mk_inj(inj->inj_tag, inj->kids[0], ty);
    }
};

}  // namespace detail

inline ParseResult parse_term_text(const std::string& src) {
    std::vector<detail::Token> toks;
    ParseDiagnostic diag;
    if (!detail::lex(src, toks, diag)) return diag;
    detail::Parser p(std::move(toks));
    try {
        return p.parse_whole();
    } catch (ParseDiagnostic& d) {
        return d;
    }
}

}  // namespace statl
