#pragma once

// Quantitative convergence machinery, all in exact rationals.
//
// A certificate (C, rho) for a kernel K with stationary pi asserts
// tv(mu K^N, nu K^N) <= C rho^N tv(mu, nu) for all N.  It is found by
// locating the smallest power m with Dobrushin coefficient delta(K^m) < 1
// and converting via submultiplicativity: delta(K^N) <= delta(K^m)^(N/m - 1),
// so C = 1/delta(K^m) and rho = an upper rational bound on delta(K^m)^(1/m).
//
// approximation_bound composes per-site certificates into a bound on the total
// variation distance between a stat-bearing program and its fully
// unrolled approximation: a site contributes mult * C * rho^N, and sites
// nested in its kernel body inherit the amplification factor C/(1-rho).

#include "eval.hpp"
#include "transforms.hpp"

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace statl {

inline Rational tv_vec(const std::vector<Rational>& a, const std::vector<Rational>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("tv_vec: length mismatch");
    Rational pos(0), neg(0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        Rational d = a[i] - b[i];
        if (d > 0) pos += d;
        else neg -= d;
    }
    return pos > neg ? pos : neg;
}

inline Rational dobrushin(const std::vector<std::vector<Rational>>& rows) {
    Rational best(0);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            Rational d = tv_vec(rows[i], rows[j]);
            if (d > best) best = d;
        }
    return best;
}

inline Rational dobrushin(const KernelMatrix& k) { return dobrushin(k.rows); }

namespace detail {

inline std::vector<std::vector<Rational>> mat_mul(const std::vector<std::vector<Rational>>& a,
                                                  const std::vector<std::vector<Rational>>& b) {
    const std::size_t n = a.size();
    std::vector<std::vector<Rational>> out(n, std::vector<Rational>(n, Rational(0)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            if (a[i][k] == 0) continue;
            for (std::size_t j = 0; j < n; ++j) out[i][j] += a[i][k] * b[k][j];
        }
    return out;
}

// Smallest rational r reachable by 32 bisection steps with r^m >= x and
// r <= 1; an upper bound on the real m-th root of x in [0, 1].
inline Rational root_upper_bound(const Rational& x, unsigned long m) {
    Rational lo(0), hi(1);
    for (int i = 0; i < 32; ++i) {
        Rational mid = (lo + hi) / 2;
        if (rat_pow(mid, m) >= x) hi = mid;
        else lo = mid;
    }
    return hi;
}

}  // namespace detail

struct ErgodicityCert {
    bool certified = false;
    unsigned long m = 0;  // power with delta(K^m) < 1
    Rational delta_m;
    Rational C;
    Rational rho;
};

inline ErgodicityCert certify(const KernelMatrix& k, const std::vector<Rational>& pi,
                              unsigned long m_max) {
    const std::size_t n = k.states.size();
    if (pi.size() != n) throw std::invalid_argument("certify: pi has wrong length");
    Rational total(0);
    for (const auto& p : pi) {
        if (p < 0) throw std::invalid_argument("certify: pi has a negative entry");
        total += p;
    }
    if (total != 1) throw std::invalid_argument("certify: pi is not a probability vector");
    for (std::size_t j = 0; j < n; ++j) {
        Rational acc(0);
        for (std::size_t i = 0; i < n; ++i) acc += pi[i] * k.rows[i][j];
        if (acc != pi[j]) throw std::invalid_argument("certify: pi is not invariant under k");
    }

    ErgodicityCert out;
    std::vector<std::vector<Rational>> power = k.rows;
    for (unsigned long m = 1; m <= m_max; ++m) {
        Rational d = dobrushin(power);
        if (d < 1) {
            out.m = m;
            out.delta_m = d;
            if (m == 1) {
                out.C = 1;
                out.rho = d;
            } else if (d == 0) {
                // Zero at a later power: fall back to rho = 1/2, scaling C
                // so the bound still dominates delta(K^N) <= 1 for N < m.
                out.C = rat_pow(Rational(2), m - 1);
                out.rho = Rational(1, 2);
            } else {
                out.rho = detail::root_upper_bound(d, m);
                out.C = 1 / d;
            }
            if (out.rho >= 1) break;  // bisection could not separate the root from 1
            out.certified = true;
            return out;
        }
        if (m < m_max) power = detail::mat_mul(power, k.rows);
    }
    out.certified = false;
    return out;
}

// ---------------------------------------------------------------------------
// Measure/vector conversions over a kernel's state list.

inline std::vector<Rational> vector_of(const KernelMatrix& k, const FiniteMeasure& m) {
    if (!ty_equal(k.state_ty, m.carrier))
        throw std::invalid_argument("vector_of: carrier does not match the kernel state type");
    std::vector<Rational> v(k.states.size(), Rational(0));
    for (const auto& e : m.support) v[k.index_of(e.first)] = e.second;
    return v;
}

inline FiniteMeasure measure_of(const KernelMatrix& k, const std::vector<Rational>& v) {
    MeasureBuilder b(k.state_ty);
    for (std::size_t i = 0; i < v.size(); ++i) b.add(k.states[i], v[i]);
    return std::move(b).build();
}

inline std::vector<Rational> step_vector(const std::vector<Rational>& v, const KernelMatrix& k) {
    std::vector<Rational> out(v.size(), Rational(0));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] == 0) continue;
        for (std::size_t j = 0; j < v.size(); ++j) out[j] += v[i] * k.rows[i][j];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Direct checks of the two quantitative statements behind the bound.

struct ContractionCheck {
    Rational lhs;  // tv(mu K^N, nu K^N)
    Rational rhs;  // C rho^N tv(mu, nu)
    bool holds = false;
};

inline ContractionCheck check_contraction(const KernelMatrix& k, const FiniteMeasure& mu,
                                          const FiniteMeasure& nu, unsigned long n,
                                          const ErgodicityCert& cert) {
    if (!cert.certified) throw std::invalid_argument("check_contraction: certificate is void");
    std::vector<Rational> a = vector_of(k, mu), b = vector_of(k, nu);
    Rational delta0 = tv_vec(a, b);
    for (unsigned long i = 0; i < n; ++i) {
        a = step_vector(a, k);
        b = step_vector(b, k);
    }
    ContractionCheck out;
    out.lhs = tv_vec(a, b);
    out.rhs = cert.C * rat_pow(cert.rho, n) * delta0;
    out.holds = out.lhs <= out.rhs;
    return out;
}

struct PerturbationCheck {
    Rational eps;           // rowwise tv bound between the kernels
    Rational drift_bound;   // eps C / (1 - rho)
    Rational lhs_vs_exact;  // tv(init Kp^N, init K^N)
    bool exact_holds = false;
    Rational limit_bound;  // eps C / (1 - rho) + C rho^N
    Rational lhs_vs_pi;    // tv(init Kp^N, pi)
    bool pi_holds = false;
};

inline PerturbationCheck check_perturbation(const KernelMatrix& k, const KernelMatrix& kp,
                                            const FiniteMeasure& init,
                                            const std::vector<Rational>& pi, unsigned long n,
                                            const ErgodicityCert& cert, const Rational& eps) {
    if (!cert.certified) throw std::invalid_argument("check_perturbation: certificate is void");
    if (k.states.size() != kp.states.size() || !ty_equal(k.state_ty, kp.state_ty))
        throw std::invalid_argument("check_perturbation: kernels disagree on states");
    for (std::size_t i = 0; i < k.states.size(); ++i)
        if (!value_equal(k.states[i], kp.states[i]))
            throw std::invalid_argument("check_perturbation: kernels disagree on states");
    for (std::size_t i = 0; i < k.rows.size(); ++i)
        if (tv_vec(k.rows[i], kp.rows[i]) > eps)
            throw std::invalid_argument("check_perturbation: rowwise distance exceeds eps");

    std::vector<Rational> exact = vector_of(k, init), perturbed = exact;
    for (unsigned long i = 0; i < n; ++i) {
        exact = step_vector(exact, k);
        perturbed = step_vector(perturbed, kp);
    }
    PerturbationCheck out;
    out.eps = eps;
    out.drift_bound = eps * cert.C / (Rational(1) - cert.rho);
    out.lhs_vs_exact = tv_vec(perturbed, exact);
    out.exact_holds = out.lhs_vs_exact <= out.drift_bound;
    out.limit_bound = out.drift_bound + cert.C * rat_pow(cert.rho, n);
    out.lhs_vs_pi = tv_vec(perturbed, pi);
    out.pi_holds = out.lhs_vs_pi <= out.limit_bound;
    return out;
}

// ---------------------------------------------------------------------------
// Per-site certification by exhaustive environment enumeration.

struct SiteCert {
    bool reachable = false;
    bool certified = false;
    Rational C;
    Rational rho;
    unsigned long m = 0;       // largest power used across environments
    Rational delta_m;          // largest contraction coefficient seen
    std::size_t env_count = 0;
    std::size_t max_states = 0;
    std::string verdict = "unreachable";
};

using SiteCertMap = std::map<std::string, SiteCert>;

namespace detail {

struct CertifyState {
    std::map<const Term*, std::string> labels;
    SiteCertMap certs;
    std::map<std::string, bool> failed;
    unsigned long m_max;
    EvalLimits lim;
};

inline void certify_visit(const TermPtr& t, const Env& env, const Context& ctx, CertifyState& st) {
    switch (t->tag) {
        case TermTag::Let: {
            certify_visit(t->kids[0], env, ctx, st);
            FiniteMeasure bound = eval_prob(t->kids[0], env, ctx, st.lim);
            Context bctx = ctx.extended(t->name, bound.carrier);
            for (const auto& e : bound.support)
                certify_visit(t->kids[1], env.extended(t->name, e.first), bctx, st);
            return;
        }
        case TermTag::Case: {
            Value scr = eval_det(t->kids[0], env, ctx);
            const auto& inj = std::get<Value::InjRep>(scr.rep);
            KindTy scr_kt = kind_check(ctx, t->kids[0]);
            const auto& br = t->branches[inj.tag];
            certify_visit(br.body, env.extended(br.var, *inj.payload),
                          ctx.extended(br.var, scr_kt.ty->parts[inj.tag]), st);
            return;
        }
        case TermTag::Norm:
            certify_visit(t->kids[0], env, ctx, st);
            return;
        case TermTag::Stat: {
            const std::string& label = st.labels.at(t.get());
            SiteCert& c = st.certs[label];
            c.reachable = true;
            c.env_count += 1;
            certify_visit(t->kids[0], env, ctx, st);
            FiniteMeasure init = eval_prob(t->kids[0], env, ctx, st.lim);
            StatAnalysis an = stat_solve(init, t->name, t->kids[1], env, ctx, st.lim);
            if (an.matrix.states.size() > c.max_states) c.max_states = an.matrix.states.size();
            if (an.verdict != StatVerdict::UniqueLimit) {
                st.failed[label] = true;
                c.verdict = verdict_name(an.verdict);
            } else {
                ErgodicityCert cert = certify(an.matrix, an.stationary, st.m_max);
                if (!cert.certified) {
                    st.failed[label] = true;
                    c.verdict = "no-contractive-power";
                } else {
                    if (cert.C > c.C) c.C = cert.C;
                    if (cert.rho > c.rho) c.rho = cert.rho;
                    if (cert.m > c.m) c.m = cert.m;
                    if (cert.delta_m > c.delta_m) c.delta_m = cert.delta_m;
                    if (!st.failed.count(label)) c.verdict = "unique-limit";
                }
            }
            Context bctx = ctx.extended(t->name, an.matrix.state_ty);
            for (const auto& s : an.matrix.states)
                certify_visit(t->kids[1], env.extended(t->name, s), bctx, st);
            return;
        }
        default:
            return;  // sample / return / score and deterministic forms hold no stat sites
    }
}

}  // namespace detail

// Certifies every stat site of t, enumerating all reachable environments
// (let supports, taken case branches, kernel state spaces) and merging the
// per-environment certificates by taking the worst C and rho.
inline SiteCertMap certify_sites(const TermPtr& t, unsigned long m_max,
                                 const EvalLimits& lim = {}, const Context& ctx = {}) {
    detail::CertifyState st;
    st.m_max = m_max;
    st.lim = lim;
    for (const auto& site : stat_sites(t)) {
        st.labels.emplace(site.node.get(), site.label);
        st.certs.emplace(site.label, SiteCert{});
    }
    detail::certify_visit(t, Env{}, ctx, st);
    for (auto& e : st.certs)
        e.second.certified = e.second.reachable && !st.failed.count(e.first);
    return st.certs;
}

// ---------------------------------------------------------------------------
// The compositional error bound and its empirical check.

struct SiteBound {
    std::string label;
    Rational C;
    Rational rho;
    unsigned long N = 0;
    Rational contribution;
};

struct BoundReport {
    std::vector<SiteBound> sites;
    Rational total;
    Rational empirical_tv;
    bool sound = false;
};

namespace detail {

inline void bound_walk(const TermPtr& t, const Rational& mult, const IterationPlan& plan,
                       const SiteCertMap& certs, std::size_t& counter, BoundReport& out) {
    if (t->tag == TermTag::Norm)
        throw std::invalid_argument("approximation_bound: norm must be compiled away first");
    if (t->tag == TermTag::Stat) {
        std::string label = "s" + std::to_string(counter++);
        auto cit = certs.find(label);
        if (cit == certs.end() || !cit->second.certified)
            throw std::invalid_argument("approximation_bound: no certificate for site " + label);
        auto pit = plan.find(label);
        if (pit == plan.end()) throw PlanError("no step count for stat site " + label);
        const SiteCert& c = cit->second;
        SiteBound sb;
        sb.label = label;
        sb.C = c.C;
        sb.rho = c.rho;
        sb.N = pit->second;
        sb.contribution = mult * c.C * rat_pow(c.rho, sb.N);
        out.sites.push_back(sb);
        bound_walk(t->kids[0], mult, plan, certs, counter, out);
        bound_walk(t->kids[1], mult * c.C / (Rational(1) - c.rho), plan, certs, counter, out);
        return;
    }
    for (const auto& k : t->kids) bound_walk(k, mult, plan, certs, counter, out);
    for (const auto& br : t->branches) bound_walk(br.body, mult, plan, certs, counter, out);
}

}  // namespace detail

// Total-variation bound between a closed stat-bearing program and its
// approx_all rewrite, together with the exact empirical distance.
inline BoundReport approximation_bound(const TermPtr& t, const IterationPlan& plan,
                                  const SiteCertMap& certs, const EvalLimits& lim = {}) {
    BoundReport out;
    out.total = 0;
    std::size_t counter = 0;
    detail::bound_walk(t, Rational(1), plan, certs, counter, out);
    for (const auto& s : out.sites) out.total += s.contribution;
    FiniteMeasure exact = eval_closed(t, lim).measure;
    FiniteMeasure approx = eval_closed(approx_all(t, plan), lim).measure;
    out.empirical_tv = tv(exact, approx);
    out.sound = out.empirical_tv <= out.total;
    return out;
}

}  // namespace statl
