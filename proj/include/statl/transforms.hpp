#pragma once

// Source-to-source transformations.
//
//  - tracer:        reshape a probabilistic term so it returns its full
//                   trace (the tuple of all intermediate let results).
//  - prior_tracer:  the same reshaping with every score erased, yielding
//                   the purely probabilistic prior over traces.
//  - lhd_tracer:    the deterministic likelihood weight of a trace, as a
//                   first-order term with one bound trace variable.
//  - mh:            replace norm(t) by a Markov chain whose kernel is the
//                   Metropolis-Hastings step with independent proposals
//                   from the prior and the likelihood-ratio acceptance.
//  - compile:       the norm- and score-eliminating compiler built from
//                   the pieces above (innermost norms first).
//  - stat_sites / iterate_unroll / approx_all: enumerate stat sites,
//                   unroll one stat into N kernel applications, and
//                   rewrite every site per an iteration plan.
//
// Value extraction from traces: the trace of a non-let term is the value
// itself, the trace of a let is a pair whose rightmost leaf is the final
// value, so extraction is the identity or `last` depending on the shape.

#include "ast.hpp"
#include "typecheck.hpp"

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace statl {

// Does the trace of t have pair shape (so extraction needs `last`)?
inline bool trace_may_pair(const TermPtr& t) {
    if (t->tag == TermTag::Let) return true;
    if (t->tag == TermTag::Case) {
        for (const auto& br : t->branches)
            if (trace_may_pair(br.body)) return true;
    }
    return false;
}

namespace detail {

inline TermPtr extract_from(const TermPtr& traced_source, TermPtr trace_expr) {
    return trace_may_pair(traced_source) ? mk_proj(ProjKind::Last, std::move(trace_expr))
                                         : trace_expr;
}

inline TermPtr tracer_impl(const TermPtr& t, bool strip_scores, std::set<std::string>& used) {
    switch (t->tag) {
        case TermTag::Score:
            return strip_scores ? mk_return(mk_unit()) : t;
        case TermTag::Sample:
        case TermTag::Return:
        case TermTag::Stat:
        case TermTag::Norm:
            return t;
        case TermTag::Let: {
            TermPtr tr0 = tracer_impl(t->kids[0], strip_scores, used);
            std::string tx = fresh_name("trace_" + t->name, used);
            used.insert(tx);
            std::string tb = fresh_name("tail_" + t->name, used);
            used.insert(tb);
            TermPtr body = substitute(t->kids[1], t->name, extract_from(t->kids[0], mk_var(tx)));
            TermPtr tr1 = tracer_impl(body, strip_scores, used);
            return mk_let(tx, tr0,
                          mk_let(tb, tr1, mk_return(mk_pair(mk_var(tx), mk_var(tb)))));
        }
        case TermTag::Case: {
            std::vector<CaseBranch> branches;
            branches.reserve(t->branches.size());
            for (const auto& br : t->branches)
                branches.push_back({br.var, tracer_impl(br.body, strip_scores, used)});
            return mk_case(t->kids[0], std::move(branches));
        }
        default:
            // Deterministic branch bodies coerced into a probabilistic
            // case already denote their own dirac; their trace is the
            // value itself.
            return t;
    }
}

inline TermPtr lhd_term(const TermPtr& t, const TermPtr& at) {
    switch (t->tag) {
        case TermTag::Score:
            return mk_prim("abs", {t->kids[0]});
        case TermTag::Let: {
            TermPtr w0 = lhd_term(t->kids[0], mk_proj(ProjKind::First, at));
            TermPtr body = substitute(
                t->kids[1], t->name, extract_from(t->kids[0], mk_proj(ProjKind::First, at)));
            TermPtr w1 = lhd_term(body, mk_proj(ProjKind::Second, at));
            return mk_prim("mul", {w0, w1});
        }
        case TermTag::Case: {
            std::vector<CaseBranch> branches;
            branches.reserve(t->branches.size());
            for (const auto& br : t->branches) branches.push_back({br.var, lhd_term(br.body, at)});
            return mk_case(t->kids[0], std::move(branches));
        }
        default:
            return mk_const(Rational(1));
    }
}

}  // namespace detail

inline TermPtr tracer(const TermPtr& t) {
    std::set<std::string> used;
    all_names_into(t, used);
    return detail::tracer_impl(t, false, used);
}

inline TermPtr prior_tracer(const TermPtr& t) {
    std::set<std::string> used;
    all_names_into(t, used);
    return detail::tracer_impl(t, true, used);
}

struct LhdWeight {
    std::string binder;  // ranges over traces of the source term
    TermPtr body;        // deterministic, real-valued
};

inline LhdWeight lhd_tracer(const TermPtr& t) {
    std::set<std::string> used;
    all_names_into(t, used);
    std::string binder = fresh_name("tr", used);
    return LhdWeight{binder, detail::lhd_term(t, mk_var(binder))};
}

// Metropolis-Hastings replacement for a norm term: a stat whose kernel
// proposes independently from the prior over traces and accepts with the
// likelihood ratio (clamped at one; zero off the positive-weight region).
inline TermPtr mh(const TermPtr& norm_term) {
    if (norm_term->tag != TermTag::Norm)
        throw std::invalid_argument("mh expects a norm term");
    const TermPtr& u = norm_term->kids[0];
    TermPtr prior = prior_tracer(u);
    LhdWeight w = lhd_tracer(u);
    std::set<std::string> used;
    all_names_into(u, used);
    all_names_into(prior, used);
    used.insert(w.binder);
    std::string cur = fresh_name("x", used);
    used.insert(cur);
    std::string prop = fresh_name("x'", used);
    used.insert(prop);
    std::string flip = fresh_name("b", used);
    used.insert(flip);
    TermPtr accept = mk_mh_accept(w.binder, w.body, mk_var(cur), mk_var(prop));
    TermPtr body =
        mk_let(prop, deep_copy(prior),
               mk_let(flip, mk_sample(mk_prim("bern", {accept})),
                      mk_case(mk_var(flip), {CaseBranch{"_", mk_return(mk_var(prop))},
                                             CaseBranch{"_", mk_return(mk_var(cur))}})));
    return mk_stat(prior, cur, body);
}

// The norm- and score-eliminating compiler.  Homomorphic everywhere
// except norm(u), which becomes: run the MH chain over traces of the
// compiled u, then repack the stat outcome as norm's sum — extracting the
// returned value from the trace on success and passing the error through.
inline TermPtr compile(const TermPtr& t, const Context& ctx = {}) {
    switch (t->tag) {
        case TermTag::Let: {
            TermPtr bound = compile(t->kids[0], ctx);
            TyPtr a = kind_check(ctx, t->kids[0]).ty;
            TermPtr body = compile(t->kids[1], ctx.extended(t->name, a));
            if (bound == t->kids[0] && body == t->kids[1]) return t;
            return mk_let(t->name, std::move(bound), std::move(body));
        }
        case TermTag::Stat: {
            TermPtr init = compile(t->kids[0], ctx);
            TyPtr a = kind_check(ctx, t->kids[0]).ty;
            TermPtr body = compile(t->kids[1], ctx.extended(t->name, a));
            if (init == t->kids[0] && body == t->kids[1]) return t;
            return mk_stat(std::move(init), t->name, std::move(body));
        }
        case TermTag::Case: {
            TyPtr scr_ty = kind_check(ctx, t->kids[0]).ty;
            std::vector<CaseBranch> branches;
            branches.reserve(t->branches.size());
            bool changed = false;
            for (std::size_t i = 0; i < t->branches.size(); ++i) {
                const auto& br = t->branches[i];
                TermPtr body = compile(br.body, ctx.extended(br.var, scr_ty->parts[i]));
                changed = changed || body != br.body;
                branches.push_back({br.var, std::move(body)});
            }
            return changed ? mk_case(t->kids[0], std::move(branches)) : t;
        }
        case TermTag::Norm: {
            TermPtr u = compile(t->kids[0], ctx);
            TyPtr a = kind_check(ctx, t->kids[0]).ty;
            TyPtr s = ty_or_error(a);
            TermPtr chain = mh(mk_norm(u));
            std::set<std::string> used;
            all_names_into(chain, used);
            std::string res = fresh_name("r", used);
            used.insert(res);
            std::string tr = fresh_name("t", used);
            used.insert(tr);
            std::string err = fresh_name("e", used);
            TermPtr ok_payload = detail::extract_from(u, mk_var(tr));
            return mk_let(
                res, std::move(chain),
                mk_case(mk_var(res),
                        {CaseBranch{tr, mk_return(mk_inj(0, std::move(ok_payload), s))},
                         CaseBranch{err, mk_return(mk_inj(1, mk_var(err), s))}}));
        }
        default:
            // sample / return / score and every deterministic form carry
            // no norm inside (their subterms are deterministic).
            return t;
    }
}

// ---------------------------------------------------------------------------
// Stat sites and iterate-based approximation.

struct StatSite {
    std::string label;  // "s0", "s1", ... in pre-order
    TermPtr node;
};

namespace detail {

inline void stat_sites_into(const TermPtr& t, std::vector<StatSite>& out,
                            std::set<const Term*>& seen) {
    if (t->tag == TermTag::Stat) {
        if (!seen.insert(t.get()).second)
            throw std::logic_error("stat_sites: shared stat node; sites must be distinct");
        out.push_back({"s" + std::to_string(out.size()), t});
    }
    for (const auto& k : t->kids) stat_sites_into(k, out, seen);
    for (const auto& br : t->branches) stat_sites_into(br.body, out, seen);
}

}  // namespace detail

inline std::vector<StatSite> stat_sites(const TermPtr& t) {
    std::vector<StatSite> out;
    std::set<const Term*> seen;
    detail::stat_sites_into(t, out, seen);
    return out;
}

using IterationPlan = std::map<std::string, unsigned long>;

struct PlanError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool contains_stat(const TermPtr& t) {
    if (t->tag == TermTag::Stat) return true;
    for (const auto& k : t->kids)
        if (contains_stat(k)) return true;
    for (const auto& br : t->branches)
        if (contains_stat(br.body)) return true;
    return false;
}

}  // namespace detail

// N-fold kernel application: bind the previous step under the stat's own
// binder, starting from the initial distribution.  The result has the
// state type itself (no error branch).  Stat-free bodies are shared
// between the unrolled layers (evaluation memoizes shared closed
// subterms); a body that still carries stat sites is copied per layer so
// site labelling continues to see distinct nodes.
inline TermPtr iterate_unroll(const TermPtr& stat_term, unsigned long n) {
    if (stat_term->tag != TermTag::Stat)
        throw std::invalid_argument("iterate_unroll expects a stat term");
    const TermPtr& body = stat_term->kids[1];
    const bool share = !detail::contains_stat(body);
    TermPtr acc = stat_term->kids[0];
    for (unsigned long i = 0; i < n; ++i)
        acc = mk_let(stat_term->name, acc, share ? body : deep_copy(body));
    return acc;
}

namespace detail {

inline TermPtr approx_walk(const TermPtr& t, const IterationPlan& plan, const Context& ctx,
                           std::size_t& counter, std::set<std::string>& seen_labels) {
    switch (t->tag) {
        case TermTag::Stat: {
            std::string label = "s" + std::to_string(counter++);
            seen_labels.insert(label);
            TyPtr a = kind_check(ctx, t->kids[0]).ty;
            TermPtr init = approx_walk(t->kids[0], plan, ctx, counter, seen_labels);
            TermPtr body =
                approx_walk(t->kids[1], plan, ctx.extended(t->name, a), counter, seen_labels);
            auto it = plan.find(label);
            if (it == plan.end()) throw PlanError("no step count for stat site " + label);
            TermPtr unrolled = iterate_unroll(mk_stat(init, t->name, body), it->second);
            std::set<std::string> used;
            all_names_into(unrolled, used);
            std::string y = fresh_name("y", used);
            // Re-embed the approximated state on norm's success branch so
            // the rewrite preserves the site's sum type.
            return mk_let(y, std::move(unrolled),
                          mk_return(mk_inj(0, mk_var(y), ty_or_error(a))));
        }
        case TermTag::Let: {
            TyPtr a = kind_check(ctx, t->kids[0]).ty;
            TermPtr bound = approx_walk(t->kids[0], plan, ctx, counter, seen_labels);
            TermPtr body =
                approx_walk(t->kids[1], plan, ctx.extended(t->name, a), counter, seen_labels);
            if (bound == t->kids[0] && body == t->kids[1]) return t;
            return mk_let(t->name, std::move(bound), std::move(body));
        }
        case TermTag::Case: {
            TyPtr scr_ty = kind_check(ctx, t->kids[0]).ty;
            std::vector<CaseBranch> branches;
            bool changed = false;
            for (std::size_t i = 0; i < t->branches.size(); ++i) {
                const auto& br = t->branches[i];
                TermPtr body = approx_walk(br.body, plan, ctx.extended(br.var, scr_ty->parts[i]),
                                           counter, seen_labels);
                changed = changed || body != br.body;
                branches.push_back({br.var, std::move(body)});
            }
            return changed ? mk_case(t->kids[0], std::move(branches)) : t;
        }
        case TermTag::Norm: {
            TermPtr arg = approx_walk(t->kids[0], plan, ctx, counter, seen_labels);
            return arg == t->kids[0] ? t : mk_norm(std::move(arg));
        }
        default:
            return t;
    }
}

}  // namespace detail

// Rewrites every stat site per the plan (label -> step count).  Labels in
// the plan must name sites of t.
inline TermPtr approx_all(const TermPtr& t, const IterationPlan& plan, const Context& ctx = {}) {
    std::size_t counter = 0;
    std::set<std::string> seen;
    TermPtr out = detail::approx_walk(t, plan, ctx, counter, seen);
    for (const auto& e : plan)
        if (!seen.count(e.first)) throw PlanError("unknown stat site label " + e.first);
    return out;
}

}  // namespace statl
