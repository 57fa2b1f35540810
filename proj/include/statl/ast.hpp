#pragma once

// Abstract syntax.  One node type covers the deterministic and the
// probabilistic fragments; the kind checker (typecheck.hpp) decides which
// judgment a term inhabits.
//
// mh-accept is the acceptance-probability primitive produced by the
// norm-elimination compiler: a deterministic function of two candidate
// traces whose payload is the likelihood-weight term (one bound variable
// ranging over traces).  Its ratio-with-guard semantics lives in the
// evaluator; the payload keeps it printable and re-parseable.

#include "measure.hpp"
#include "rational.hpp"
#include "ty.hpp"

#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace statl {

struct Term;
using TermPtr = std::shared_ptr<const Term>;

enum class TermTag {
    Var,
    UnitVal,
    ConstRat,
    Pair,
    Inj,
    Proj,
    PrimApp,
    DistConst,
    Case,
    Sample,
    Return,
    Let,
    Score,
    Norm,
    Stat,
    MhAccept,
};

enum class ProjKind { First, Second, Last };

struct CaseBranch {
    std::string var;
    TermPtr body;
};

struct Term {
    TermTag tag;
    std::string name;               // Var / Let / Stat / MhAccept binder, PrimApp function
    Rational rat;                   // ConstRat
    std::size_t inj_tag = 0;        // Inj
    TyPtr ann;                      // Inj sum-type ascription (may be null)
    ProjKind proj = ProjKind::First;
    MeasurePtr dist;                // DistConst literal
    std::vector<TermPtr> kids;
    std::vector<CaseBranch> branches;  // Case
};

inline TermPtr mk_var(std::string name) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::Var;
    t->name = std::move(name);
    return t;
}
inline TermPtr mk_unit() {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::UnitVal;
    return t;
}
inline TermPtr mk_const(Rational r) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::ConstRat;
    t->rat = std::move(r);
    return t;
}
inline TermPtr mk_pair(TermPtr a, TermPtr b) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::Pair;
    t->kids = {std::move(a), std::move(b)};
    return t;
}
inline TermPtr mk_inj(std::size_t tag, TermPtr payload, TyPtr ann = nullptr) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::Inj;
    t->inj_tag = tag;
    t->ann = std::move(ann);
    t->kids = {std::move(payload)};
    return t;
}
inline TermPtr mk_tt() { return mk_inj(0, mk_unit(), ty_bool()); }
inline TermPtr mk_ff() { return mk_inj(1, mk_unit(), ty_bool()); }
inline TermPtr mk_proj(ProjKind p, TermPtr arg) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::Proj;
    t->proj = p;
    t->kids = {std::move(arg)};
    return t;
}
inline TermPtr mk_prim(std::string fn, std::vector<TermPtr> args) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::PrimApp;
    t->name = std::move(fn);
    t->kids = std::move(args);
    return t;
}
inline TermPtr mk_dist_const(FiniteMeasure m) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::DistConst;
    t->dist = std::make_shared<FiniteMeasure>(std::move(m));
    return t;
}
inline TermPtr mk_case(TermPtr scrutinee, std::vector<CaseBranch> branches) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::Case;
    t->kids = {std::move(scrutinee)};
    t->branches = std::move(branches);
    return t;
}
inline TermPtr mk_sample(TermPtr d) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::Sample;
    t->kids = {std::move(d)};
    return t;
}
inline TermPtr mk_return(TermPtr d) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::Return;
    t->kids = {std::move(d)};
    return t;
}
inline TermPtr mk_let(std::string x, TermPtr bound, TermPtr body) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::Let;
    t->name = std::move(x);
    t->kids = {std::move(bound), std::move(body)};
    return t;
}
inline TermPtr mk_score(TermPtr d) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::Score;
    t->kids = {std::move(d)};
    return t;
}
inline TermPtr mk_norm(TermPtr p) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::Norm;
    t->kids = {std::move(p)};
    return t;
}
inline TermPtr mk_stat(TermPtr init, std::string x, TermPtr body) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::Stat;
    t->name = std::move(x);
    t->kids = {std::move(init), std::move(body)};
    return t;
}
inline TermPtr mk_mh_accept(std::string binder, TermPtr weight_body, TermPtr current, TermPtr proposed) {
    auto t = std::make_shared<Term>();
    t->tag = TermTag::MhAccept;
    t->name = std::move(binder);
    t->kids = {std::move(weight_body), std::move(current), std::move(proposed)};
    return t;
}

// if-sugar: case on a bool with tag 0 = true; the binders are unused.
inline TermPtr mk_if(TermPtr cond, TermPtr then_t, TermPtr else_t) {
    return mk_case(std::move(cond),
                   {CaseBranch{"_", std::move(then_t)}, CaseBranch{"_", std::move(else_t)}});
}

// ---------------------------------------------------------------------------
// Structural equality (binder names included; no alpha-conversion).

inline bool term_equal(const TermPtr& a, const TermPtr& b) {
    if (a.get() == b.get()) return true;
    if (!a || !b) return false;
    if (a->tag != b->tag || a->name != b->name || a->rat != b->rat || a->inj_tag != b->inj_tag ||
        a->proj != b->proj)
        return false;
    if ((a->ann == nullptr) != (b->ann == nullptr)) return false;
    if (a->ann && !ty_equal(a->ann, b->ann)) return false;
    if ((a->dist == nullptr) != (b->dist == nullptr)) return false;
    if (a->dist && !measure_equal(*a->dist, *b->dist)) return false;
    if (a->kids.size() != b->kids.size() || a->branches.size() != b->branches.size()) return false;
    for (std::size_t i = 0; i < a->kids.size(); ++i)
        if (!term_equal(a->kids[i], b->kids[i])) return false;
    for (std::size_t i = 0; i < a->branches.size(); ++i) {
        if (a->branches[i].var != b->branches[i].var) return false;
        if (!term_equal(a->branches[i].body, b->branches[i].body)) return false;
    }
    return true;
}

// Structurally identical copy with fresh node identities throughout.  Used
// when one construction needs the same subterm in two positions: site
// labeling walks the tree by position, so node pointers must not repeat.
inline TermPtr deep_copy(const TermPtr& t) {
    auto out = std::make_shared<Term>(*t);
    for (auto& k : out->kids) k = deep_copy(k);
    for (auto& br : out->branches) br.body = deep_copy(br.body);
    return out;
}

// ---------------------------------------------------------------------------
// Free variables and capture-avoiding substitution.

inline void free_vars_into(const TermPtr& t, std::set<std::string>& out) {
    switch (t->tag) {
        case TermTag::Var:
            out.insert(t->name);
            return;
        case TermTag::Let:
        case TermTag::Stat: {
            free_vars_into(t->kids[0], out);
            std::set<std::string> body;
            free_vars_into(t->kids[1], body);
            body.erase(t->name);
            out.insert(body.begin(), body.end());
            return;
        }
        case TermTag::Case: {
            free_vars_into(t->kids[0], out);
            for (const auto& br : t->branches) {
                std::set<std::string> body;
                free_vars_into(br.body, body);
                body.erase(br.var);
                out.insert(body.begin(), body.end());
            }
            return;
        }
        case TermTag::MhAccept: {
            std::set<std::string> w;
            free_vars_into(t->kids[0], w);
            w.erase(t->name);
            out.insert(w.begin(), w.end());
            free_vars_into(t->kids[1], out);
            free_vars_into(t->kids[2], out);
            return;
        }
        default:
            for (const auto& k : t->kids) free_vars_into(k, out);
            return;
    }
}

inline std::set<std::string> free_vars(const TermPtr& t) {
    std::set<std::string> out;
    free_vars_into(t, out);
    return out;
}

// Collects every name appearing in the term (free, bound, or binding), for
// deterministic fresh-name generation.
inline void all_names_into(const TermPtr& t, std::set<std::string>& out) {
    if (!t->name.empty() && t->tag != TermTag::PrimApp) out.insert(t->name);
    for (const auto& k : t->kids) all_names_into(k, out);
    for (const auto& br : t->branches) {
        out.insert(br.var);
        all_names_into(br.body, out);
    }
}

inline std::string fresh_name(const std::string& base, const std::set<std::string>& used) {
    if (!used.count(base)) return base;
    for (unsigned long i = 1;; ++i) {
        std::string cand = base + std::to_string(i);
        if (!used.count(cand)) return cand;
    }
}

TermPtr substitute(const TermPtr& t, const std::string& x, const TermPtr& d);

// Renames a single binder occurrence so substitution can proceed without
// capturing free variables of the substituted term.
inline std::pair<std::string, TermPtr> avoid_capture(const std::string& binder, const TermPtr& body,
                                                     const std::string& x, const TermPtr& d,
                                                     const std::set<std::string>& d_free) {
    if (!d_free.count(binder)) return {binder, body};
    std::set<std::string> used = d_free;
    free_vars_into(body, used);
    all_names_into(body, used);
    used.insert(x);
    std::string renamed = fresh_name(binder, used);
    return {renamed, substitute(body, binder, mk_var(renamed))};
}

inline TermPtr substitute(const TermPtr& t, const std::string& x, const TermPtr& d) {
    switch (t->tag) {
        case TermTag::Var:
            return t->name == x ? d : t;
        case TermTag::UnitVal:
        case TermTag::ConstRat:
        case TermTag::DistConst:
            return t;
        case TermTag::Let:
        case TermTag::Stat: {
            TermPtr first = substitute(t->kids[0], x, d);
            if (t->name == x) {
                if (first == t->kids[0]) return t;
                auto out = std::make_shared<Term>(*t);
                out->kids[0] = first;
                return out;
            }
            auto d_free = free_vars(d);
            auto [binder, body] = avoid_capture(t->name, t->kids[1], x, d, d_free);
            TermPtr new_body = substitute(body, x, d);
            if (first == t->kids[0] && new_body == t->kids[1] && binder == t->name) return t;
            auto out = std::make_shared<Term>(*t);
            out->name = binder;
            out->kids[0] = first;
            out->kids[1] = new_body;
            return out;
        }
        case TermTag::Case: {
            auto out = std::make_shared<Term>(*t);
            out->kids[0] = substitute(t->kids[0], x, d);
            auto d_free = free_vars(d);
            for (auto& br : out->branches) {
                if (br.var == x) continue;
                auto [binder, body] = avoid_capture(br.var, br.body, x, d, d_free);
                br.var = binder;
                br.body = substitute(body, x, d);
            }
            return out;
        }
        case TermTag::MhAccept: {
            auto out = std::make_shared<Term>(*t);
            out->kids[1] = substitute(t->kids[1], x, d);
            out->kids[2] = substitute(t->kids[2], x, d);
            if (t->name != x) {
                auto d_free = free_vars(d);
                auto [binder, body] = avoid_capture(t->name, t->kids[0], x, d, d_free);
                out->name = binder;
                out->kids[0] = substitute(body, x, d);
            }
            return out;
        }
        default: {
            auto out = std::make_shared<Term>(*t);
            bool changed = false;
            for (auto& k : out->kids) {
                TermPtr nk = substitute(k, x, d);
                if (nk != k) changed = true;
                k = nk;
            }
            return changed ? TermPtr(out) : t;
        }
    }
}

// ---------------------------------------------------------------------------
// Typing context: ordered bindings, innermost last.

struct Context {
    std::vector<std::pair<std::string, TyPtr>> bindings;

    const TyPtr* lookup(const std::string& name) const {
        for (auto it = bindings.rbegin(); it != bindings.rend(); ++it)
            if (it->first == name) return &it->second;
        return nullptr;
    }

    Context extended(const std::string& name, TyPtr ty) const {
        Context out = *this;
        out.bindings.emplace_back(name, std::move(ty));
        return out;
    }
};

enum class Kind { Det, PureProb, Prob };

inline const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Det: return "det";
        case Kind::PureProb: return "p1";
        case Kind::Prob: return "p";
    }
    return "?";
}

// Join in the Det < PureProb < Prob order.
inline Kind kind_join(Kind a, Kind b) { return a < b ? b : a; }

}  // namespace statl
