#pragma once

// The type grammar: real, unit, P(A) (probability distributions on A),
// products A * B, and finite non-empty sums sum[A0, ..., An-1].
// bool is surface sugar for sum[unit, unit] with tag 0 = true.

#include <memory>
#include <string>
#include <vector>

namespace statl {

struct Ty;
using TyPtr = std::shared_ptr<const Ty>;

enum class TyTag { Real, Unit, Prob, Product, Sum };

struct Ty {
    TyTag tag;
    std::vector<TyPtr> parts;  // Prob: 1, Product: 2, Sum: >= 1

    explicit Ty(TyTag t, std::vector<TyPtr> ps = {}) : tag(t), parts(std::move(ps)) {}
};

inline TyPtr ty_real() {
    static const TyPtr t = std::make_shared<Ty>(TyTag::Real);
    return t;
}
inline TyPtr ty_unit() {
    static const TyPtr t = std::make_shared<Ty>(TyTag::Unit);
    return t;
}
inline TyPtr ty_prob(TyPtr a) { return std::make_shared<Ty>(TyTag::Prob, std::vector<TyPtr>{std::move(a)}); }
inline TyPtr ty_product(TyPtr a, TyPtr b) {
    return std::make_shared<Ty>(TyTag::Product, std::vector<TyPtr>{std::move(a), std::move(b)});
}
inline TyPtr ty_sum(std::vector<TyPtr> parts) {
    return std::make_shared<Ty>(TyTag::Sum, std::move(parts));
}
inline TyPtr ty_bool() {
    static const TyPtr t = ty_sum({ty_unit(), ty_unit()});
    return t;
}
// The result type of norm and stat: the value or an error marker.
inline TyPtr ty_or_error(TyPtr a) { return ty_sum({std::move(a), ty_unit()}); }

inline bool ty_equal(const TyPtr& a, const TyPtr& b) {
    if (a.get() == b.get()) return true;
    if (a->tag != b->tag) return false;
    if (a->parts.size() != b->parts.size()) return false;
    for (std::size_t i = 0; i < a->parts.size(); ++i)
        if (!ty_equal(a->parts[i], b->parts[i])) return false;
    return true;
}

inline bool is_product(const TyPtr& a) { return a->tag == TyTag::Product; }

// Static type of last(e): descend into the second component of products
// until a non-product is reached.  Mirrors the value-level projection.
inline TyPtr ty_last(TyPtr a) {
    while (a->tag == TyTag::Product) a = a->parts[1];
    return a;
}

inline std::string ty_to_string(const TyPtr& a) {
    switch (a->tag) {
        case TyTag::Real: return "real";
        case TyTag::Unit: return "unit";
        case TyTag::Prob: return "P(" + ty_to_string(a->parts[0]) + ")";
        case TyTag::Product:
            return "(" + ty_to_string(a->parts[0]) + " * " + ty_to_string(a->parts[1]) + ")";
        case TyTag::Sum: {
            std::string out = "sum[";
            for (std::size_t i = 0; i < a->parts.size(); ++i) {
                if (i) out += ", ";
                out += ty_to_string(a->parts[i]);
            }
            return out + "]";
        }
    }
    return "?";
}

}  // namespace statl
