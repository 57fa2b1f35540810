#pragma once

// Kind and type checking.
//
// Three judgments share one checker: deterministic (det), purely
// probabilistic (p1), and probabilistic (p).  kind_check returns the
// strongest kind a term admits in the det < p1 < p order; checks_at
// applies the one subsumption the system has (every p1 term is a p term).
//
// Sum injections: an ascribed injection checks against its ascription.  A
// bare injection infers a homogeneous sum — as a case scrutinee the arity
// is the branch count, elsewhere tag + 1 — which is enough for bool-like
// code; heterogeneous sums use the ascribed form.

#include "ast.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace statl {

struct TypeError : std::runtime_error {
    std::string rule;      // which typing rule rejected the term
    std::string path;      // AST path from the root, slash-separated
    std::string expected;
    std::string found;

    TypeError(std::string rule_, std::string path_, std::string expected_, std::string found_)
        : std::runtime_error(rule_ + " at '" + (path_.empty() ? "." : path_) + "': expected " +
                             expected_ + ", found " + found_),
          rule(std::move(rule_)),
          path(std::move(path_)),
          expected(std::move(expected_)),
          found(std::move(found_)) {}
};

struct KindTy {
    Kind kind;
    TyPtr ty;
};

namespace detail {

inline std::string join_path(const std::string& base, const std::string& seg) {
    return base.empty() ? seg : base + "/" + seg;
}

// Optional ambient memo (node identity + typing context) consulted by
// kind_check_at.  Evaluation installs one per run so that deeply nested
// let-chains sharing a kernel body are checked once per context instead of
// once per enclosing layer; with no memo installed, checking — including
// every diagnostic — is exactly the plain recursion.
using KindMemo = std::map<std::pair<const Term*, std::string>, KindTy>;

inline thread_local KindMemo* kind_memo = nullptr;

inline KindTy kind_check_at(const Context& ctx, const TermPtr& t, const std::string& path);

inline TyPtr check_det(const Context& ctx, const TermPtr& t, const std::string& path,
                       const char* rule) {
    KindTy kt = kind_check_at(ctx, t, path);
    if (kt.kind != Kind::Det)
        throw TypeError(rule, path, "a deterministic term", std::string(kind_name(kt.kind)) + " term");
    return kt.ty;
}

inline TyPtr check_det_ty(const Context& ctx, const TermPtr& t, const std::string& path,
                          const char* rule, const TyPtr& want) {
    TyPtr got = check_det(ctx, t, path, rule);
    if (!ty_equal(got, want)) throw TypeError(rule, path, ty_to_string(want), ty_to_string(got));
    return got;
}

// Deterministic primitive signatures.  dirac and categorical are handled
// separately (their result type depends on the argument type).
inline bool prim_signature(const std::string& fn, std::vector<TyPtr>& args, TyPtr& ret) {
    if (fn == "add" || fn == "sub" || fn == "mul" || fn == "min" || fn == "max") {
        args = {ty_real(), ty_real()};
        ret = ty_real();
        return true;
    }
    if (fn == "abs") {
        args = {ty_real()};
        ret = ty_real();
        return true;
    }
    if (fn == "lt" || fn == "le" || fn == "gt" || fn == "ge" || fn == "eq" || fn == "ne") {
        args = {ty_real(), ty_real()};
        ret = ty_bool();
        return true;
    }
    if (fn == "bern") {
        args = {ty_real()};
        ret = ty_prob(ty_bool());
        return true;
    }
    return false;
}

inline KindTy kind_check_rules(const Context& ctx, const TermPtr& t, const std::string& path) {
    switch (t->tag) {
        case TermTag::Var: {
            const TyPtr* ty = ctx.lookup(t->name);
            if (!ty) throw TypeError("var-unbound", path, "a bound variable", "'" + t->name + "'");
            return {Kind::Det, *ty};
        }
        case TermTag::UnitVal:
            return {Kind::Det, ty_unit()};
        case TermTag::ConstRat:
            return {Kind::Det, ty_real()};
        case TermTag::Pair: {
            TyPtr a = check_det(ctx, t->kids[0], join_path(path, "pair.0"), "pair-det");
            TyPtr b = check_det(ctx, t->kids[1], join_path(path, "pair.1"), "pair-det");
            return {Kind::Det, ty_product(a, b)};
        }
        case TermTag::Inj: {
            TyPtr payload = check_det(ctx, t->kids[0], join_path(path, "inj.payload"), "inj-det");
            if (t->ann) {
                if (t->ann->tag != TyTag::Sum)
                    throw TypeError("inj-sum", path, "a sum type ascription", ty_to_string(t->ann));
                if (t->inj_tag >= t->ann->parts.size())
                    throw TypeError("inj-tag", path,
                                    "tag < " + std::to_string(t->ann->parts.size()),
                                    "tag " + std::to_string(t->inj_tag));
                if (!ty_equal(payload, t->ann->parts[t->inj_tag]))
                    throw TypeError("inj-payload", join_path(path, "inj.payload"),
                                    ty_to_string(t->ann->parts[t->inj_tag]), ty_to_string(payload));
                return {Kind::Det, t->ann};
            }
            std::vector<TyPtr> parts(t->inj_tag + 1, payload);
            return {Kind::Det, ty_sum(std::move(parts))};
        }
        case TermTag::Proj: {
            TyPtr arg = check_det(ctx, t->kids[0], join_path(path, "proj.arg"), "proj-det");
            if (t->proj == ProjKind::Last) return {Kind::Det, ty_last(arg)};
            if (arg->tag != TyTag::Product)
                throw TypeError("proj-product", join_path(path, "proj.arg"), "a product type",
                                ty_to_string(arg));
            return {Kind::Det, t->proj == ProjKind::First ? arg->parts[0] : arg->parts[1]};
        }
        case TermTag::PrimApp: {
            if (t->name == "dirac") {
                if (t->kids.size() != 1)
                    throw TypeError("prim-arity", path, "1 argument", std::to_string(t->kids.size()));
                TyPtr a = check_det(ctx, t->kids[0], join_path(path, "dirac.0"), "prim-det");
                return {Kind::Det, ty_prob(a)};
            }
            if (t->name == "categorical") {
                if (t->kids.empty())
                    throw TypeError("prim-arity", path, ">= 1 argument", "0");
                TyPtr value_ty;
                Rational total(0);
                for (std::size_t i = 0; i < t->kids.size(); ++i) {
                    std::string p = join_path(path, "categorical." + std::to_string(i));
                    const TermPtr& arg = t->kids[i];
                    // Weights must be literal so the constructor is total:
                    // the positive-total check happens here, statically.
                    if (arg->tag != TermTag::Pair || arg->kids[1]->tag != TermTag::ConstRat)
                        throw TypeError("categorical-literal", p,
                                        "a (value, rational-literal) pair", "a computed weight");
                    if (arg->kids[1]->rat < 0)
                        throw TypeError("categorical-literal", p, "a nonnegative weight",
                                        rat_to_string(arg->kids[1]->rat));
                    total += arg->kids[1]->rat;
                    TyPtr vt = check_det(ctx, arg->kids[0], join_path(p, "pair.0"), "prim-det");
                    if (!value_ty) value_ty = vt;
                    else if (!ty_equal(value_ty, vt))
                        throw TypeError("categorical-value-type", p, ty_to_string(value_ty),
                                        ty_to_string(vt));
                }
                if (total == 0)
                    throw TypeError("categorical-literal", path, "positive total weight", "0");
                return {Kind::Det, ty_prob(value_ty)};
            }
            std::vector<TyPtr> want;
            TyPtr ret;
            if (!prim_signature(t->name, want, ret))
                throw TypeError("prim-unknown", path, "a whitelisted primitive", "'" + t->name + "'");
            if (t->kids.size() != want.size())
                throw TypeError("prim-arity", path, std::to_string(want.size()) + " argument(s)",
                                std::to_string(t->kids.size()));
            for (std::size_t i = 0; i < want.size(); ++i)
                check_det_ty(ctx, t->kids[i], join_path(path, t->name + "." + std::to_string(i)),
                             "prim-arg", want[i]);
            return {Kind::Det, ret};
        }
        case TermTag::DistConst: {
            const FiniteMeasure& m = *t->dist;
            if (!is_probability(m))
                throw TypeError("dist-literal", path, "total mass 1", rat_to_string(mass(m)));
            for (const auto& e : m.support)
                if (!inhabits(e.first, m.carrier))
                    throw TypeError("dist-literal", path,
                                    "support values of type " + ty_to_string(m.carrier),
                                    value_to_string(e.first));
            return {Kind::Det, ty_prob(m.carrier)};
        }
        case TermTag::Case: {
            const TermPtr& scr = t->kids[0];
            std::string scr_path = join_path(path, "case.scrutinee");
            TyPtr scr_ty;
            if (scr->tag == TermTag::Inj && !scr->ann) {
                // A bare injection scrutinee takes its arity from the
                // branch count (homogeneous components).
                TyPtr payload = check_det(ctx, scr->kids[0], join_path(scr_path, "inj.payload"),
                                          "inj-det");
                if (scr->inj_tag >= t->branches.size())
                    throw TypeError("case-arity", scr_path,
                                    "tag < " + std::to_string(t->branches.size()),
                                    "tag " + std::to_string(scr->inj_tag));
                scr_ty = ty_sum(std::vector<TyPtr>(t->branches.size(), payload));
            } else {
                scr_ty = check_det(ctx, scr, scr_path, "case-det");
            }
            if (scr_ty->tag != TyTag::Sum)
                throw TypeError("case-sum", scr_path, "a sum type", ty_to_string(scr_ty));
            if (scr_ty->parts.size() != t->branches.size())
                throw TypeError("case-arity", path,
                                std::to_string(scr_ty->parts.size()) + " branch(es)",
                                std::to_string(t->branches.size()));
            Kind kind = Kind::Det;
            TyPtr out_ty;
            for (std::size_t i = 0; i < t->branches.size(); ++i) {
                const auto& br = t->branches[i];
                KindTy kt = kind_check_at(ctx.extended(br.var, scr_ty->parts[i]), br.body,
                                          join_path(path, "case.branch[" + std::to_string(i) + "]"));
                kind = kind_join(kind, kt.kind);
                if (!out_ty) out_ty = kt.ty;
                else if (!ty_equal(out_ty, kt.ty))
                    throw TypeError("case-branch-type",
                                    join_path(path, "case.branch[" + std::to_string(i) + "]"),
                                    ty_to_string(out_ty), ty_to_string(kt.ty));
            }
            return {kind, out_ty};
        }
        case TermTag::Sample: {
            TyPtr d = check_det(ctx, t->kids[0], join_path(path, "sample.arg"), "sample-det");
            if (d->tag != TyTag::Prob)
                throw TypeError("sample-dist", join_path(path, "sample.arg"), "a P(-) type",
                                ty_to_string(d));
            return {Kind::PureProb, d->parts[0]};
        }
        case TermTag::Return: {
            TyPtr d = check_det(ctx, t->kids[0], join_path(path, "return.arg"), "return-det");
            return {Kind::PureProb, d};
        }
        case TermTag::Let: {
            KindTy bound = kind_check_at(ctx, t->kids[0], join_path(path, "let.bound"));
            if (bound.kind == Kind::Det)
                throw TypeError("let-kind", join_path(path, "let.bound"),
                                "a probabilistic term (wrap deterministic code in return)",
                                "det term");
            KindTy body = kind_check_at(ctx.extended(t->name, bound.ty), t->kids[1],
                                        join_path(path, "let.body"));
            if (body.kind == Kind::Det)
                throw TypeError("let-kind", join_path(path, "let.body"),
                                "a probabilistic term (wrap deterministic code in return)",
                                "det term");
            return {kind_join(bound.kind, body.kind), body.ty};
        }
        case TermTag::Score: {
            check_det_ty(ctx, t->kids[0], join_path(path, "score.arg"), "score-real", ty_real());
            return {Kind::Prob, ty_unit()};
        }
        case TermTag::Norm: {
            KindTy arg = kind_check_at(ctx, t->kids[0], join_path(path, "norm.arg"));
            if (arg.kind == Kind::Det)
                throw TypeError("norm-prob", join_path(path, "norm.arg"), "a probabilistic term",
                                "det term");
            return {Kind::PureProb, ty_or_error(arg.ty)};
        }
        case TermTag::Stat: {
            KindTy init = kind_check_at(ctx, t->kids[0], join_path(path, "stat.init"));
            if (init.kind != Kind::PureProb)
                throw TypeError("stat-pure", join_path(path, "stat.init"),
                                "a purely probabilistic term",
                                std::string(kind_name(init.kind)) + " term");
            KindTy body = kind_check_at(ctx.extended(t->name, init.ty), t->kids[1],
                                        join_path(path, "stat.body"));
            if (body.kind != Kind::PureProb)
                throw TypeError("stat-pure", join_path(path, "stat.body"),
                                "a purely probabilistic term",
                                std::string(kind_name(body.kind)) + " term");
            if (!ty_equal(body.ty, init.ty))
                throw TypeError("stat-endo", join_path(path, "stat.body"), ty_to_string(init.ty),
                                ty_to_string(body.ty));
            return {Kind::PureProb, ty_or_error(init.ty)};
        }
        case TermTag::MhAccept: {
            TyPtr cur = check_det(ctx, t->kids[1], join_path(path, "mh-accept.current"), "mh-accept-args");
            TyPtr prop =
                check_det(ctx, t->kids[2], join_path(path, "mh-accept.proposed"), "mh-accept-args");
            if (!ty_equal(cur, prop))
                throw TypeError("mh-accept-args", join_path(path, "mh-accept.proposed"),
                                ty_to_string(cur), ty_to_string(prop));
            check_det_ty(ctx.extended(t->name, cur), t->kids[0],
                         join_path(path, "mh-accept.weight"), "mh-accept-weight", ty_real());
            return {Kind::Det, ty_real()};
        }
    }
    throw std::logic_error("kind_check: unknown term tag");
}

inline KindTy kind_check_at(const Context& ctx, const TermPtr& t, const std::string& path) {
    // Leaves are cheaper to re-check than to key; memoize the composite
    // forms whose recursion can revisit shared subtrees.
    if (kind_memo && (t->tag == TermTag::Let || t->tag == TermTag::Case ||
                      t->tag == TermTag::Stat || t->tag == TermTag::Norm)) {
        std::string key;
        for (const auto& b : ctx.bindings) {
            key += b.first;
            key += ':';
            key += ty_to_string(b.second);
            key += ';';
        }
        auto slot = std::make_pair(t.get(), std::move(key));
        auto hit = kind_memo->find(slot);
        if (hit != kind_memo->end()) return hit->second;
        KindTy kt = kind_check_rules(ctx, t, path);
        kind_memo->emplace(std::move(slot), kt);
        return kt;
    }
    return kind_check_rules(ctx, t, path);
}

}  // namespace detail

inline KindTy kind_check(const Context& ctx, const TermPtr& t) {
    return detail::kind_check_at(ctx, t, "");
}

inline KindTy kind_check(const TermPtr& t) { return kind_check(Context{}, t); }

// Subsumption: a term checks at `want` if its strongest kind is `want`,
// or if it is p1 and p is wanted.
inline bool checks_at(const Context& ctx, const TermPtr& t, Kind want) {
    Kind got = kind_check(ctx, t).kind;
    if (got == want) return true;
    return got == Kind::PureProb && want == Kind::Prob;
}

// A program: closed and purely probabilistic.
inline bool is_program(const TermPtr& t) {
    if (!free_vars(t).empty()) return false;
    try {
        return kind_check(t).kind == Kind::PureProb;
    } catch (const TypeError&) {
        return false;
    }
}

}  // namespace statl
