#pragma once

// Values of the language and finite measures over them, all with exact
// rational weights.
//
// A Value is unit, a rational, a pair, a tagged injection, or a finite
// probability distribution (the contained values of type P(A)).  Values
// are ordered by a fixed structural order (constructor first, then
// components; rationals by numeric value; distributions by their sorted
// support), which makes every measure's support canonically sorted and
// every serialization deterministic.

#include "rational.hpp"
#include "ty.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace statl {

struct Value;
struct FiniteMeasure;
using ValuePtr = std::shared_ptr<const Value>;
using MeasurePtr = std::shared_ptr<const FiniteMeasure>;

struct Value {
    struct UnitRep {};
    struct PairRep {
        ValuePtr first, second;
    };
    struct InjRep {
        std::size_t tag;
        ValuePtr payload;
    };
    // Variant order fixes the canonical order across constructors.
    std::variant<UnitRep, Rational, PairRep, InjRep, MeasurePtr> rep;
};

// A finite measure: canonically sorted support with strictly positive
// weights, plus the carrier type it lives on.
struct FiniteMeasure {
    TyPtr carrier;
    std::vector<std::pair<Value, Rational>> support;
};

inline Value value_unit() { return Value{Value::UnitRep{}}; }
inline Value value_rat(Rational r) { return Value{std::move(r)}; }
inline Value value_pair(Value a, Value b) {
    return Value{Value::PairRep{std::make_shared<Value>(std::move(a)), std::make_shared<Value>(std::move(b))}};
}
inline Value value_inj(std::size_t tag, Value v) {
    return Value{Value::InjRep{tag, std::make_shared<Value>(std::move(v))}};
}
inline Value value_dist(FiniteMeasure m) { return Value{std::make_shared<FiniteMeasure>(std::move(m))}; }
inline Value value_tt() { return value_inj(0, value_unit()); }
inline Value value_ff() { return value_inj(1, value_unit()); }

int value_cmp(const Value& a, const Value& b);

inline int measure_cmp(const FiniteMeasure& a, const FiniteMeasure& b) {
    std::size_t n = std::min(a.support.size(), b.support.size());
    for (std::size_t i = 0; i < n; ++i) {
        int c = value_cmp(a.support[i].first, b.support[i].first);
        if (c != 0) return c;
        if (a.support[i].second != b.support[i].second)
            return a.support[i].second < b.support[i].second ? -1 : 1;
    }
    if (a.support.size() != b.support.size()) return a.support.size() < b.support.size() ? -1 : 1;
    return 0;
}

inline int value_cmp(const Value& a, const Value& b) {
    if (a.rep.index() != b.rep.index()) return a.rep.index() < b.rep.index() ? -1 : 1;
    switch (a.rep.index()) {
        case 0: return 0;
        case 1: {
            const auto& x = std::get<Rational>(a.rep);
            const auto& y = std::get<Rational>(b.rep);
            if (x == y) return 0;
            return x < y ? -1 : 1;
        }
        case 2: {
            const auto& x = std::get<Value::PairRep>(a.rep);
            const auto& y = std::get<Value::PairRep>(b.rep);
            int c = value_cmp(*x.first, *y.first);
            if (c != 0) return c;
            return value_cmp(*x.second, *y.second);
        }
        case 3: {
            const auto& x = std::get<Value::InjRep>(a.rep);
            const auto& y = std::get<Value::InjRep>(b.rep);
            if (x.tag != y.tag) return x.tag < y.tag ? -1 : 1;
            return value_cmp(*x.payload, *y.payload);
        }
        default: {
            const auto& x = std::get<MeasurePtr>(a.rep);
            const auto& y = std::get<MeasurePtr>(b.rep);
            return measure_cmp(*x, *y);
        }
    }
}

inline bool value_equal(const Value& a, const Value& b) { return value_cmp(a, b) == 0; }
inline bool value_less(const Value& a, const Value& b) { return value_cmp(a, b) < 0; }

inline bool value_is_unit(const Value& v) { return v.rep.index() == 0; }
inline bool value_is_pair(const Value& v) { return v.rep.index() == 2; }

// last(v): descend into second components until a non-pair is reached.
inline const Value& value_last(const Value& v) {
    const Value* cur = &v;
    while (cur->rep.index() == 2) cur = std::get<Value::PairRep>(cur->rep).second.get();
    return *cur;
}

// ---------------------------------------------------------------------------
// Measure construction.

// Collects (value, weight) entries in any order, then produces the
// canonical measure: sorted support, equal values merged, zero weights
// dropped.  Negative weights are rejected (measures are unsigned).
class MeasureBuilder {
  public:
    explicit MeasureBuilder(TyPtr carrier) : carrier_(std::move(carrier)) {}

    void add(Value v, Rational w) {
        if (w < 0) throw std::invalid_argument("measure weight must be nonnegative");
        if (w == 0) return;
        entries_.emplace_back(std::move(v), std::move(w));
    }

    FiniteMeasure build() && {
        std::stable_sort(entries_.begin(), entries_.end(),
                         [](const auto& a, const auto& b) { return value_less(a.first, b.first); });
        FiniteMeasure m{std::move(carrier_), {}};
        for (auto& e : entries_) {
            if (!m.support.empty() && value_equal(m.support.back().first, e.first))
                m.support.back().second += e.second;
            else
                m.support.push_back(std::move(e));
        }
        // Merging cannot create zeros from positive weights; nothing to drop.
        return m;
    }

  private:
    TyPtr carrier_;
    std::vector<std::pair<Value, Rational>> entries_;
};

inline FiniteMeasure measure_null(TyPtr carrier) { return FiniteMeasure{std::move(carrier), {}}; }

inline FiniteMeasure dirac(TyPtr carrier, Value v) {
    FiniteMeasure m{std::move(carrier), {}};
    m.support.emplace_back(std::move(v), Rational(1));
    return m;
}

inline Rational mass(const FiniteMeasure& m) {
    Rational total(0);
    for (const auto& e : m.support) total += e.second;
    return total;
}

inline bool is_probability(const FiniteMeasure& m) { return mass(m) == 1; }

inline Rational measure_at(const FiniteMeasure& m, const Value& v) {
    auto it = std::lower_bound(m.support.begin(), m.support.end(), v,
                               [](const auto& e, const Value& x) { return value_less(e.first, x); });
    if (it != m.support.end() && value_equal(it->first, v)) return it->second;
    return Rational(0);
}

inline bool measure_equal(const FiniteMeasure& a, const FiniteMeasure& b) {
    return ty_equal(a.carrier, b.carrier) && measure_cmp(a, b) == 0;
}

// ---------------------------------------------------------------------------
// Measure operations.

// Total variation distance.  For equal total masses this is the usual
// (1/2) * sum |mu - nu|; in general it is the supremum over events,
// max(sum over {mu > nu} of the excess, sum over {nu > mu} of the excess).
inline Rational tv(const FiniteMeasure& mu, const FiniteMeasure& nu) {
    if (!ty_equal(mu.carrier, nu.carrier)) throw std::invalid_argument("tv: carrier mismatch");
    Rational pos(0), neg(0);
    std::size_t i = 0, j = 0;
    while (i < mu.support.size() || j < nu.support.size()) {
        int c;
        if (i == mu.support.size()) c = 1;
        else if (j == nu.support.size()) c = -1;
        else c = value_cmp(mu.support[i].first, nu.support[j].first);
        if (c < 0) {
            pos += mu.support[i].second;
            ++i;
        } else if (c > 0) {
            neg += nu.support[j].second;
            ++j;
        } else {
            Rational d = mu.support[i].second - nu.support[j].second;
            if (d > 0) pos += d;
            else neg += -d;
            ++i;
            ++j;
        }
    }
    return pos > neg ? pos : neg;
}

inline FiniteMeasure scale(const FiniteMeasure& m, const Rational& c) {
    if (c < 0) throw std::invalid_argument("scale: factor must be nonnegative");
    FiniteMeasure out{m.carrier, {}};
    if (c == 0) return out;
    out.support = m.support;
    for (auto& e : out.support) e.second *= c;
    return out;
}

// An opaque kernel: a function from values to measures together with its
// carrier types.
struct KernelFn {
    TyPtr from, to;
    std::function<FiniteMeasure(const Value&)> fn;
};

// Monadic bind: integrate the kernel against the measure.
inline FiniteMeasure bind(const FiniteMeasure& m, const KernelFn& k) {
    if (!ty_equal(m.carrier, k.from)) throw std::invalid_argument("bind: carrier mismatch");
    MeasureBuilder out(k.to);
    for (const auto& e : m.support) {
        FiniteMeasure piece = k.fn(e.first);
        if (!ty_equal(piece.carrier, k.to)) throw std::invalid_argument("bind: kernel produced wrong carrier");
        for (const auto& p : piece.support) out.add(p.first, e.second * p.second);
    }
    return std::move(out).build();
}

// Pushforward along a value map; carrier supplied by the caller.
inline FiniteMeasure pushforward(const FiniteMeasure& m, TyPtr carrier,
                                 const std::function<Value(const Value&)>& f) {
    MeasureBuilder out(std::move(carrier));
    for (const auto& e : m.support) out.add(f(e.first), e.second);
    return std::move(out).build();
}

// norm's semantics on measures: positive mass gives the inj0-pushforward
// of the normalization, a null measure gives a point mass on inj1 ().
// The carrier becomes sum[A, unit].
inline FiniteMeasure normalize(const FiniteMeasure& m) {
    TyPtr carrier = ty_or_error(m.carrier);
    Rational total = mass(m);
    if (total == 0) return dirac(std::move(carrier), value_inj(1, value_unit()));
    FiniteMeasure out{std::move(carrier), {}};
    for (const auto& e : m.support)
        out.support.emplace_back(value_inj(0, e.first), e.second / total);
    return out;
}

// ---------------------------------------------------------------------------
// Canonical literal rendering of values and measures.  The same syntax is
// accepted back by the surface parser (inside dist literals), so a value
// can round-trip through text.

std::string value_to_string(const Value& v);

inline std::string measure_to_dist_string(const FiniteMeasure& m) {
    std::string out = "dist<" + ty_to_string(m.carrier) + ">(";
    for (std::size_t i = 0; i < m.support.size(); ++i) {
        if (i) out += ", ";
        out += "(" + value_to_string(m.support[i].first) + ", " +
               rat_to_fraction_string(m.support[i].second) + ")";
    }
    return out + ")";
}

inline std::string value_to_string(const Value& v) {
    switch (v.rep.index()) {
        case 0: return "()";
        case 1: return rat_to_string(std::get<Rational>(v.rep));
        case 2: {
            const auto& p = std::get<Value::PairRep>(v.rep);
            // A bare nonnegative integer in first position would read as an
            // injection tag; force the fraction form there.
            std::string first;
            if (p.first->rep.index() == 1) {
                const Rational& r = std::get<Rational>(p.first->rep);
                if (r >= 0 && denominator(r) == 1) first = rat_to_fraction_string(r);
                else first = rat_to_string(r);
            } else {
                first = value_to_string(*p.first);
            }
            return "(" + first + ", " + value_to_string(*p.second) + ")";
        }
        case 3: {
            const auto& inj = std::get<Value::InjRep>(v.rep);
            return "(" + std::to_string(inj.tag) + ", " + value_to_string(*inj.payload) + ")";
        }
        default: return measure_to_dist_string(*std::get<MeasurePtr>(v.rep));
    }
}

// Does the value inhabit the type?  Used to validate dist literals and as
// a debug check on evaluation results.
inline bool inhabits(const Value& v, const TyPtr& ty) {
    switch (ty->tag) {
        case TyTag::Real: return v.rep.index() == 1;
        case TyTag::Unit: return v.rep.index() == 0;
        case TyTag::Product: {
            if (v.rep.index() != 2) return false;
            const auto& p = std::get<Value::PairRep>(v.rep);
            return inhabits(*p.first, ty->parts[0]) && inhabits(*p.second, ty->parts[1]);
        }
        case TyTag::Sum: {
            if (v.rep.index() != 3) return false;
            const auto& inj = std::get<Value::InjRep>(v.rep);
            return inj.tag < ty->parts.size() && inhabits(*inj.payload, ty->parts[inj.tag]);
        }
        case TyTag::Prob: {
            if (v.rep.index() != 4) return false;
            const auto& m = *std::get<MeasurePtr>(v.rep);
            if (!ty_equal(m.carrier, ty->parts[0]) || !is_probability(m)) return false;
            for (const auto& e : m.support)
                if (!inhabits(e.first, ty->parts[0])) return false;
            return true;
        }
    }
    return false;
}

}  // namespace statl
