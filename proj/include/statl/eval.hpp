#pragma once

// Denotational evaluation with exact rationals.
//
// eval_det maps a det term and an environment to a Value; eval_prob maps
// a probabilistic term to a FiniteMeasure.  Both thread the typing
// context alongside the value environment: measure carriers (and the
// carrier of dirac/categorical results) come from the static types, so
// empty measures and error branches stay well-typed.
//
// stat evaluates by building the finite reachable-state kernel matrix
// (breadth-first closure from the initial support, guarded by a state
// budget), then classifying the chain: exactly one reachable recurrent
// class whose period is 1 yields the exact stationary distribution via
// rational Gaussian elimination; anything else is the error branch.

#include "ast.hpp"
#include "measure.hpp"
#include "typecheck.hpp"

#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace statl {

struct Env {
    std::vector<std::pair<std::string, Value>> bindings;

    const Value* lookup(const std::string& name) const {
        for (auto it = bindings.rbegin(); it != bindings.rend(); ++it)
            if (it->first == name) return &it->second;
        return nullptr;
    }

    Env extended(const std::string& name, Value v) const {
        Env out = *this;
        out.bindings.emplace_back(name, std::move(v));
        return out;
    }
};

// Per-run memo shared across one evaluation: a subterm's measure depends only
// on the node and on the values (with their declared types) of its free
// variables, so repeated occurrences — unrolled chains reusing one kernel
// body, kernels re-entered per state — are computed once.  Caching is keyed
// by node identity and never outlives the run that created it.
struct EvalCache {
    std::map<const Term*, std::set<std::string>> fv;
    std::map<const Term*, FiniteMeasure> closed;
    std::map<std::pair<const Term*, std::string>, FiniteMeasure> open;
    detail::KindMemo kinds;
};

struct EvalLimits {
    std::size_t state_budget = 10000;
    std::shared_ptr<EvalCache> cache{};
};

struct StateBudgetExceeded : std::runtime_error {
    std::size_t budget;
    explicit StateBudgetExceeded(std::size_t b)
        : std::runtime_error("state budget of " + std::to_string(b) + " states exceeded"),
          budget(b) {}
};

Value eval_det(const TermPtr& t, const Env& env, const Context& ctx);
FiniteMeasure eval_prob(const TermPtr& t, const Env& env, const Context& ctx,
                        const EvalLimits& lim);

namespace detail {

inline Rational rat_of(const Value& v) { return std::get<Rational>(v.rep); }

inline Value bool_value(bool b) { return b ? value_tt() : value_ff(); }

inline FiniteMeasure bern_dist(Rational p) {
    if (p < 0) p = 0;
    if (p > 1) p = 1;
    MeasureBuilder b(ty_bool());
    b.add(value_tt(), p);
    b.add(value_ff(), Rational(1) - p);
    return std::move(b).build();
}

}  // namespace detail

inline Value eval_det(const TermPtr& t, const Env& env, const Context& ctx) {
    switch (t->tag) {
        case TermTag::Var: {
            const Value* v = env.lookup(t->name);
            if (!v) throw std::logic_error("eval_det: unbound variable '" + t->name + "'");
            return *v;
        }
        case TermTag::UnitVal:
            return value_unit();
        case TermTag::ConstRat:
            return value_rat(t->rat);
        case TermTag::Pair:
            return value_pair(eval_det(t->kids[0], env, ctx), eval_det(t->kids[1], env, ctx));
        case TermTag::Inj:
            return value_inj(t->inj_tag, eval_det(t->kids[0], env, ctx));
        case TermTag::Proj: {
            Value v = eval_det(t->kids[0], env, ctx);
            if (t->proj == ProjKind::Last) return value_last(v);
            if (!value_is_pair(v)) throw std::logic_error("eval_det: projection from a non-pair");
            const auto& p = std::get<Value::PairRep>(v.rep);
            return t->proj == ProjKind::First ? *p.first : *p.second;
        }
        case TermTag::DistConst:
            return Value{t->dist};
        case TermTag::PrimApp: {
            const std::string& fn = t->name;
            if (fn == "dirac") {
                TyPtr carrier = kind_check(ctx, t->kids[0]).ty;
                return value_dist(dirac(carrier, eval_det(t->kids[0], env, ctx)));
            }
            if (fn == "categorical") {
                // Weights are literal (kind-checked); values are computed.
                TyPtr carrier = kind_check(ctx, t->kids[0]->kids[0]).ty;
                Rational total(0);
                for (const auto& arg : t->kids) total += arg->kids[1]->rat;
                MeasureBuilder b(carrier);
                for (const auto& arg : t->kids)
                    b.add(eval_det(arg->kids[0], env, ctx), arg->kids[1]->rat / total);
                return value_dist(std::move(b).build());
            }
            if (fn == "bern")
                return value_dist(detail::bern_dist(detail::rat_of(eval_det(t->kids[0], env, ctx))));
            Value a = eval_det(t->kids[0], env, ctx);
            if (fn == "abs") return value_rat(rat_abs(detail::rat_of(a)));
            Value b = eval_det(t->kids[1], env, ctx);
            const Rational x = detail::rat_of(a), y = detail::rat_of(b);
            if (fn == "add") return value_rat(x + y);
            if (fn == "sub") return value_rat(x - y);
            if (fn == "mul") return value_rat(x * y);
            if (fn == "min") return value_rat(x < y ? x : y);
            if (fn == "max") return value_rat(x > y ? x : y);
            if (fn == "lt") return detail::bool_value(x < y);
            if (fn == "le") return detail::bool_value(x <= y);
            if (fn == "gt") return detail::bool_value(x > y);
            if (fn == "ge") return detail::bool_value(x >= y);
            if (fn == "eq") return detail::bool_value(x == y);
            if (fn == "ne") return detail::bool_value(x != y);
            throw std::logic_error("eval_det: unknown primitive '" + fn + "'");
        }
        case TermTag::Case: {
            Value scr = eval_det(t->kids[0], env, ctx);
            const auto& inj = std::get<Value::InjRep>(scr.rep);
            if (inj.tag >= t->branches.size())
                throw std::logic_error("eval_det: case tag out of range");
            const auto& br = t->branches[inj.tag];
            // The context type for the binder is only needed by nested
            // dirac/categorical; recover it from the scrutinee type.
            KindTy scr_kt = kind_check(ctx, t->kids[0]);
            TyPtr binder_ty = scr_kt.ty->tag == TyTag::Sum && inj.tag < scr_kt.ty->parts.size()
                                  ? scr_kt.ty->parts[inj.tag]
                                  : ty_unit();
            return eval_det(br.body, env.extended(br.var, *inj.payload),
                            ctx.extended(br.var, binder_ty));
        }
        case TermTag::MhAccept: {
            TyPtr trace_ty = kind_check(ctx, t->kids[1]).ty;
            Context wctx = ctx.extended(t->name, trace_ty);
            auto weight = [&](Value v) {
                return detail::rat_of(
                    eval_det(t->kids[0], env.extended(t->name, std::move(v)), wctx));
            };
            Rational w_cur = weight(eval_det(t->kids[1], env, ctx));
            Rational w_prop = weight(eval_det(t->kids[2], env, ctx));
            // Acceptance ratio with the region guard: both weights must be
            // strictly positive, otherwise never accept.
            if (w_cur <= 0 || w_prop <= 0) return value_rat(Rational(0));
            Rational ratio = w_prop / w_cur;
            return value_rat(ratio > 1 ? Rational(1) : ratio);
        }
        default:
            throw std::logic_error("eval_det: term is not deterministic");
    }
}

// ---------------------------------------------------------------------------
// Kernel matrices and the stat solver.

struct KernelMatrix {
    TyPtr state_ty;
    std::vector<Value> states;  // canonically sorted, closed under transitions
    std::vector<std::vector<Rational>> rows;

    std::size_t index_of(const Value& v) const {
        auto it = std::lower_bound(states.begin(), states.end(), v, value_less);
        if (it == states.end() || !value_equal(*it, v))
            throw std::invalid_argument("state not present in kernel matrix");
        return static_cast<std::size_t>(it - states.begin());
    }
};

enum class StatVerdict { UniqueLimit, MultipleRecurrentClasses, Periodic };

inline const char* verdict_name(StatVerdict v) {
    switch (v) {
        case StatVerdict::UniqueLimit: return "unique-limit";
        case StatVerdict::MultipleRecurrentClasses: return "multiple-recurrent-classes";
        case StatVerdict::Periodic: return "periodic";
    }
    return "?";
}

struct StatAnalysis {
    StatVerdict verdict;
    unsigned period = 0;  // of the single recurrent class when there is one
    KernelMatrix matrix;
    std::vector<Rational> stationary;  // over matrix.states; empty on error verdicts
    FiniteMeasure result;              // over sum[A, unit]
};

namespace detail {

// Exact solve of A x = b by Gaussian elimination with partial pivoting on
// nonzero entries.  Returns nullopt if the system is singular.
inline std::optional<std::vector<Rational>> solve_linear(std::vector<std::vector<Rational>> a,
                                                         std::vector<Rational> b) {
    const std::size_t n = a.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        while (pivot < n && a[pivot][col] == 0) ++pivot;
        if (pivot == n) return std::nullopt;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || a[r][col] == 0) continue;
            Rational f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<Rational> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
    return x;
}

}  // namespace detail

inline KernelMatrix build_kernel_matrix(const FiniteMeasure& init, const std::string& var,
                                        const TermPtr& body, const Env& env, const Context& ctx,
                                        const EvalLimits& lim) {
    const TyPtr& state_ty = init.carrier;
    Context body_ctx = ctx.extended(var, state_ty);
    auto cmp = [](const Value& a, const Value& b) { return value_less(a, b); };
    std::map<Value, FiniteMeasure, decltype(cmp)> rows_by_state(cmp);
    std::vector<Value> frontier;
    for (const auto& e : init.support) frontier.push_back(e.first);
    while (!frontier.empty()) {
        Value s = frontier.back();
        frontier.pop_back();
        if (rows_by_state.count(s)) continue;
        FiniteMeasure row = eval_prob(body, env.extended(var, s), body_ctx, lim);
        if (!is_probability(row))
            throw std::logic_error("stat body produced a non-probability row");
        for (const auto& e : row.support)
            if (!rows_by_state.count(e.first)) frontier.push_back(e.first);
        rows_by_state.emplace(std::move(s), std::move(row));
        if (rows_by_state.size() > lim.state_budget) throw StateBudgetExceeded(lim.state_budget);
    }
    KernelMatrix k;
    k.state_ty = state_ty;
    for (const auto& e : rows_by_state) k.states.push_back(e.first);
    k.rows.reserve(k.states.size());
    for (const auto& e : rows_by_state) {
        std::vector<Rational> row(k.states.size(), Rational(0));
        for (const auto& p : e.second.support) row[k.index_of(p.first)] = p.second;
        k.rows.push_back(std::move(row));
    }
    return k;
}

namespace detail {

// Strongly connected components (Kosaraju, iterative), returned as a
// component id per state.
inline std::vector<std::size_t> scc_ids(const std::vector<std::vector<Rational>>& rows,
                                        std::size_t& component_count) {
    const std::size_t n = rows.size();
    std::vector<std::vector<std::size_t>> fwd(n), rev(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (rows[i][j] > 0) {
                fwd[i].push_back(j);
                rev[j].push_back(i);
            }
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> order;
    for (std::size_t start = 0; start < n; ++start) {
        if (seen[start]) continue;
        // Iterative post-order.
        std::vector<std::pair<std::size_t, std::size_t>> stack{{start, 0}};
        seen[start] = true;
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < fwd[node].size()) {
                std::size_t to = fwd[node][next++];
                if (!seen[to]) {
                    seen[to] = true;
                    stack.emplace_back(to, 0);
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
    }
    std::vector<std::size_t> comp(n, SIZE_MAX);
    component_count = 0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (comp[*it] != SIZE_MAX) continue;
        std::vector<std::size_t> stack{*it};
        comp[*it] = component_count;
        while (!stack.empty()) {
            std::size_t node = stack.back();
            stack.pop_back();
            for (std::size_t to : rev[node])
                if (comp[to] == SIZE_MAX) {
                    comp[to] = component_count;
                    stack.push_back(to);
                }
        }
        ++component_count;
    }
    return comp;
}

// Period of a strongly connected class: gcd over its edges of
// depth(u) + 1 - depth(v) in a BFS layering.
inline unsigned long class_period(const std::vector<std::vector<Rational>>& rows,
                                  const std::vector<std::size_t>& members) {
    std::map<std::size_t, std::size_t> depth;
    std::vector<std::size_t> queue{members[0]};
    depth[members[0]] = 0;
    std::size_t head = 0;
    std::vector<bool> in_class(rows.size(), false);
    for (std::size_t m : members) in_class[m] = true;
    while (head < queue.size()) {
        std::size_t u = queue[head++];
        for (std::size_t v = 0; v < rows.size(); ++v)
            if (rows[u][v] > 0 && in_class[v] && !depth.count(v)) {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
    }
    unsigned long g = 0;
    for (std::size_t u : members)
        for (std::size_t v : members)
            if (rows[u][v] > 0)
                g = std::gcd(g, static_cast<unsigned long>(depth[u] + 1 - depth[v]));
    return g == 0 ? 1 : g;
}

}  // namespace detail

inline StatAnalysis stat_solve(const FiniteMeasure& init, const std::string& var,
                               const TermPtr& body, const Env& env, const Context& ctx,
                               const EvalLimits& lim) {
    StatAnalysis out;
    out.matrix = build_kernel_matrix(init, var, body, env, ctx, lim);
    const auto& rows = out.matrix.rows;
    const std::size_t n = out.matrix.states.size();
    TyPtr result_ty = ty_or_error(out.matrix.state_ty);

    std::size_t ncomp = 0;
    std::vector<std::size_t> comp = detail::scc_ids(rows, ncomp);
    std::vector<bool> is_bottom(ncomp, true);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (rows[i][j] > 0 && comp[i] != comp[j]) is_bottom[comp[i]] = false;
    std::vector<std::size_t> bottoms;
    for (std::size_t c = 0; c < ncomp; ++c)
        if (is_bottom[c]) bottoms.push_back(c);
    if (bottoms.size() != 1) {
        out.verdict = StatVerdict::MultipleRecurrentClasses;
        out.result = dirac(result_ty, value_inj(1, value_unit()));
        return out;
    }
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
        if (comp[i] == bottoms[0]) members.push_back(i);
    unsigned long period = detail::class_period(rows, members);
    out.period = static_cast<unsigned>(period);
    if (period != 1) {
        out.verdict = StatVerdict::Periodic;
        out.result = dirac(result_ty, value_inj(1, value_unit()));
        return out;
    }

    // Stationary distribution on the recurrent class: pi K = pi with
    // sum(pi) = 1.  Row 0 of the system is the normalization; the others
    // are the transposed balance equations.
    const std::size_t m = members.size();
    std::vector<std::vector<Rational>> a(m, std::vector<Rational>(m, Rational(0)));
    std::vector<Rational> b(m, Rational(0));
    for (std::size_t j = 0; j < m; ++j) a[0][j] = 1;
    b[0] = 1;
    for (std::size_t i = 1; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            a[i][j] = rows[members[j]][members[i]];
            if (i == j) a[i][j] -= 1;
        }
    auto pi = detail::solve_linear(std::move(a), std::move(b));
    if (!pi) throw std::logic_error("stat_solve: stationary system was singular");
    out.stationary.assign(n, Rational(0));
    for (std::size_t j = 0; j < m; ++j) {
        if ((*pi)[j] < 0) throw std::logic_error("stat_solve: negative stationary weight");
        out.stationary[members[j]] = (*pi)[j];
    }
    // Exact invariance check.
    for (std::size_t j = 0; j < n; ++j) {
        Rational acc(0);
        for (std::size_t i = 0; i < n; ++i) acc += out.stationary[i] * rows[i][j];
        if (acc != out.stationary[j]) throw std::logic_error("stat_solve: pi K != pi");
    }
    out.verdict = StatVerdict::UniqueLimit;
    MeasureBuilder res(result_ty);
    for (std::size_t i = 0; i < n; ++i)
        if (out.stationary[i] != 0) res.add(value_inj(0, out.matrix.states[i]), out.stationary[i]);
    out.result = std::move(res).build();
    return out;
}

namespace detail {

// Free variables memoized by node identity at every level (std::map keeps
// references stable across insertions), so shared subtrees — unrolled chains
// reusing one kernel body — are analysed once per run instead of once per
// enclosing layer.  Mirrors free_vars_into's binder handling.
inline const std::set<std::string>& cached_fv(const TermPtr& t,
                                              std::map<const Term*, std::set<std::string>>& memo) {
    auto it = memo.find(t.get());
    if (it != memo.end()) return it->second;
    std::set<std::string> out;
    switch (t->tag) {
        case TermTag::Var:
            out.insert(t->name);
            break;
        case TermTag::Let:
        case TermTag::Stat: {
            const auto& bound = cached_fv(t->kids[0], memo);
            out.insert(bound.begin(), bound.end());
            std::set<std::string> body = cached_fv(t->kids[1], memo);
            body.erase(t->name);
            out.insert(body.begin(), body.end());
            break;
        }
        case TermTag::Case: {
            const auto& scr = cached_fv(t->kids[0], memo);
            out.insert(scr.begin(), scr.end());
            for (const auto& br : t->branches) {
                std::set<std::string> body = cached_fv(br.body, memo);
                body.erase(br.var);
                out.insert(body.begin(), body.end());
            }
            break;
        }
        case TermTag::MhAccept: {
            std::set<std::string> w = cached_fv(t->kids[0], memo);
            w.erase(t->name);
            out.insert(w.begin(), w.end());
            const auto& prev = cached_fv(t->kids[1], memo);
            out.insert(prev.begin(), prev.end());
            const auto& prop = cached_fv(t->kids[2], memo);
            out.insert(prop.begin(), prop.end());
            break;
        }
        default:
            for (const auto& k : t->kids) {
                const auto& ks = cached_fv(k, memo);
                out.insert(ks.begin(), ks.end());
            }
            break;
    }
    return memo.emplace(t.get(), std::move(out)).first->second;
}

inline FiniteMeasure eval_prob_switch(const TermPtr& t, const Env& env, const Context& ctx,
                                      const EvalLimits& lim);

// Scoped installation of the ambient kind-check memo for one cached run.
struct KindMemoGuard {
    KindMemo* saved;
    explicit KindMemoGuard(KindMemo* m) : saved(kind_memo) { kind_memo = m; }
    ~KindMemoGuard() { kind_memo = saved; }
    KindMemoGuard(const KindMemoGuard&) = delete;
    KindMemoGuard& operator=(const KindMemoGuard&) = delete;
};

}  // namespace detail

inline FiniteMeasure eval_prob(const TermPtr& t, const Env& env, const Context& ctx,
                               const EvalLimits& lim) {
    if (lim.cache) {
        detail::KindMemoGuard memo_guard(&lim.cache->kinds);
        const std::set<std::string>& fv = detail::cached_fv(t, lim.cache->fv);
        if (fv.empty()) {
            auto hit = lim.cache->closed.find(t.get());
            if (hit != lim.cache->closed.end()) return hit->second;
            FiniteMeasure m = detail::eval_prob_switch(t, env, ctx, lim);
            lim.cache->closed.emplace(t.get(), m);
            return m;
        }
        // Open composites are keyed by the free variables' values and declared
        // types; leaves are cheaper to recompute than to key.
        if (t->tag == TermTag::Let || t->tag == TermTag::Case || t->tag == TermTag::Norm ||
            t->tag == TermTag::Stat) {
            std::string key;
            bool keyable = true;
            for (const std::string& name : fv) {
                const Value* v = env.lookup(name);
                const TyPtr* ty = ctx.lookup(name);
                if (!v || !ty) {
                    keyable = false;
                    break;
                }
                key += name;
                key += '=';
                key += value_to_string(*v);
                key += ':';
                key += ty_to_string(*ty);
                key += ';';
            }
            if (keyable) {
                auto slot = std::make_pair(t.get(), std::move(key));
                auto hit = lim.cache->open.find(slot);
                if (hit != lim.cache->open.end()) return hit->second;
                FiniteMeasure m = detail::eval_prob_switch(t, env, ctx, lim);
                lim.cache->open.emplace(std::move(slot), m);
                return m;
            }
        }
        return detail::eval_prob_switch(t, env, ctx, lim);
    }
    return detail::eval_prob_switch(t, env, ctx, lim);
}

inline FiniteMeasure detail::eval_prob_switch(const TermPtr& t, const Env& env,
                                              const Context& ctx, const EvalLimits& lim) {
    switch (t->tag) {
        case TermTag::Sample: {
            Value d = eval_det(t->kids[0], env, ctx);
            return *std::get<MeasurePtr>(d.rep);
        }
        case TermTag::Return: {
            TyPtr carrier = kind_check(ctx, t->kids[0]).ty;
            return dirac(carrier, eval_det(t->kids[0], env, ctx));
        }
        case TermTag::Score: {
            Rational w = rat_abs(detail::rat_of(eval_det(t->kids[0], env, ctx)));
            return scale(dirac(ty_unit(), value_unit()), w);
        }
        case TermTag::Let: {
            FiniteMeasure bound = eval_prob(t->kids[0], env, ctx, lim);
            Context body_ctx = ctx.extended(t->name, bound.carrier);
            TyPtr to = kind_check(body_ctx, t->kids[1]).ty;
            KernelFn k{bound.carrier, to, [&](const Value& v) {
                           return eval_prob(t->kids[1], env.extended(t->name, v), body_ctx, lim);
                       }};
            return bind(bound, k);
        }
        case TermTag::Norm:
            return normalize(eval_prob(t->kids[0], env, ctx, lim));
        case TermTag::Stat: {
            FiniteMeasure init = eval_prob(t->kids[0], env, ctx, lim);
            return stat_solve(init, t->name, t->kids[1], env, ctx, lim).result;
        }
        case TermTag::Case: {
            Value scr = eval_det(t->kids[0], env, ctx);
            const auto& inj = std::get<Value::InjRep>(scr.rep);
            if (inj.tag >= t->branches.size())
                throw std::logic_error("eval_prob: case tag out of range");
            KindTy scr_kt = kind_check(ctx, t->kids[0]);
            TyPtr binder_ty = scr_kt.ty->parts[inj.tag];
            const auto& br = t->branches[inj.tag];
            Env benv = env.extended(br.var, *inj.payload);
            Context bctx = ctx.extended(br.var, binder_ty);
            KindTy bkt = kind_check(bctx, br.body);
            // A det branch in a probabilistic case denotes its dirac.
            if (bkt.kind == Kind::Det) return dirac(bkt.ty, eval_det(br.body, benv, bctx));
            return eval_prob(br.body, benv, bctx, lim);
        }
        default:
            throw std::logic_error("eval_prob: term is not probabilistic");
    }
}

// Convenience entry point for closed probabilistic terms.
struct EvalOutcome {
    Kind kind;
    FiniteMeasure measure;
};

inline EvalOutcome eval_closed(const TermPtr& t, const EvalLimits& lim = {}) {
    EvalLimits run = lim;
    if (!run.cache) run.cache = std::make_shared<EvalCache>();
    detail::KindMemoGuard memo_guard(&run.cache->kinds);
    KindTy kt = kind_check(t);
    if (kt.kind == Kind::Det)
        throw TypeError("eval-prob", "", "a probabilistic term", "det term");
    return EvalOutcome{kt.kind, eval_prob(t, Env{}, Context{}, run)};
}

}  // namespace statl
