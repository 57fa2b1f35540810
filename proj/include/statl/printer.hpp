#pragma once

// Canonical surface-syntax printer.  One fixed rendering per construct,
// single line, stable whitespace, so that print is deterministic and
// parse(print(t)) == t structurally.  Program digests hash this text.

#include "ast.hpp"

#include <string>

namespace statl {

std::string print_term(const TermPtr& t);

namespace detail {

inline bool prints_atomically(const TermPtr& t) {
    switch (t->tag) {
        case TermTag::Var:
        case TermTag::UnitVal:
        case TermTag::ConstRat:
        case TermTag::Pair:
        case TermTag::DistConst:
        case TermTag::Proj:      // fst(..) / snd(..) / last(..)
        case TermTag::PrimApp:   // name(..)
            return true;
        case TermTag::Inj:
            return !t->ann || (ty_equal(t->ann, ty_bool()) && t->kids[0]->tag == TermTag::UnitVal);
        default:
            return false;
    }
}

inline std::string print_atom(const TermPtr& t) {
    if (prints_atomically(t)) return print_term(t);
    return "(" + print_term(t) + ")";
}

}  // namespace detail

inline std::string print_term(const TermPtr& t) {
    using detail::print_atom;
    switch (t->tag) {
        case TermTag::Var:
            return t->name;
        case TermTag::UnitVal:
            return "()";
        case TermTag::ConstRat:
            return rat_to_string(t->rat);
        case TermTag::Pair: {
            const TermPtr& a = t->kids[0];
            std::string first;
            // A bare nonnegative integer literal in first position would
            // re-parse as an injection tag; force the fraction form.
            if (a->tag == TermTag::ConstRat && a->rat >= 0 && denominator(a->rat) == 1)
                first = rat_to_fraction_string(a->rat);
            else
                first = print_term(a);
            return "(" + first + ", " + print_term(t->kids[1]) + ")";
        }
        case TermTag::Inj: {
            if (t->ann && ty_equal(t->ann, ty_bool()) && t->kids[0]->tag == TermTag::UnitVal)
                return t->inj_tag == 0 ? "tt" : "ff";
            std::string core =
                "(" + std::to_string(t->inj_tag) + ", " + print_term(t->kids[0]) + ")";
            if (t->ann) core += " : " + ty_to_string(t->ann);
            return core;
        }
        case TermTag::Proj: {
            const char* fn = t->proj == ProjKind::First ? "fst"
                             : t->proj == ProjKind::Second ? "snd"
                                                           : "last";
            return std::string(fn) + "(" + print_term(t->kids[0]) + ")";
        }
        case TermTag::PrimApp: {
            std::string out = t->name + "(";
            for (std::size_t i = 0; i < t->kids.size(); ++i) {
                if (i) out += ", ";
                out += print_term(t->kids[i]);
            }
            return out + ")";
        }
        case TermTag::DistConst:
            return measure_to_dist_string(*t->dist);
        case TermTag::Case: {
            std::string out = "case " + print_atom(t->kids[0]) + " of { ";
            for (std::size_t i = 0; i < t->branches.size(); ++i) {
                if (i) out += " | ";
                out += "(" + std::to_string(i) + ", " + t->branches[i].var + ") => " +
                       print_term(t->branches[i].body);
            }
            return out + " }";
        }
        case TermTag::Sample:
            return "sample(" + print_term(t->kids[0]) + ")";
        case TermTag::Return:
            return "return " + print_atom(t->kids[0]);
        case TermTag::Let:
            return "let " + t->name + " = " + print_term(t->kids[0]) + " in " +
                   print_term(t->kids[1]);
        case TermTag::Score:
            return "score(" + print_term(t->kids[0]) + ")";
        case TermTag::Norm:
            return "norm(" + print_term(t->kids[0]) + ")";
        case TermTag::Stat:
            return "stat(" + print_term(t->kids[0]) + ", fn " + t->name + " => " +
                   print_term(t->kids[1]) + ")";
        case TermTag::MhAccept: {
            std::string payload = "fn " + t->name + " => " + print_term(t->kids[0]);
            std::string tag = fnv1a64_hex(payload).substr(0, 8);
            return "mh-accept[" + tag + "](" + payload + ")(" + print_term(t->kids[1]) + ", " +
                   print_term(t->kids[2]) + ")";
        }
    }
    return "?";
}

// Stable content digest of the canonical surface form.
inline std::string term_digest(const TermPtr& t) { return fnv1a64_hex(print_term(t)); }

}  // namespace statl
