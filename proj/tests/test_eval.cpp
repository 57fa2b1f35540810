// Exact evaluation: deterministic primitives, measure semantics for the
// probabilistic forms, the stat solver's chain classification, the state
// budget, and differential agreement with the path-enumeration oracle.

#include <catch2/catch_amalgamated.hpp>

#include "support/fuzz.hpp"
#include "support/naive_eval.hpp"
#include "support/testutil.hpp"

using namespace statl;
using testutil::parse_ok;

namespace {

FiniteMeasure eval_str(const std::string& src, std::size_t budget = 10000) {
    return eval_prob(parse_ok(src), Env{}, Context{}, EvalLimits{budget});
}

Rational weight_at(const FiniteMeasure& m, const Value& v) { return measure_at(m, v); }

}  // namespace

TEST_CASE("deterministic primitives") {
    Context ctx;
    Env env;
    auto det = [&](const std::string& src) {
        return eval_det(parse_ok("return (" + src + ")")->kids[0], env, ctx);
    };
    CHECK(value_equal(det("add(1/2, 1/3)"), value_rat(Rational(5, 6))));
    CHECK(value_equal(det("mul(-2, 3/4)"), value_rat(Rational(-3, 2))));
    CHECK(value_equal(det("min(2, 3)"), value_rat(Rational(2))));
    CHECK(value_equal(det("max(2, 3)"), value_rat(Rational(3))));
    CHECK(value_equal(det("abs(-5/7)"), value_rat(Rational(5, 7))));
    CHECK(value_equal(det("lt(1, 2)"), value_tt()));
    CHECK(value_equal(det("ge(1, 2)"), value_ff()));
    CHECK(value_equal(det("eq(2/4, 1/2)"), value_tt()));
    CHECK(value_equal(det("fst((1/1, tt))"), value_rat(Rational(1))));
    CHECK(value_equal(det("snd((1/1, tt))"), value_tt()));
    CHECK(value_equal(det("last((1/1, (2/1, 3/1)))"), value_rat(Rational(3))));
    CHECK(value_equal(det("if ff then 1 else 2"), value_rat(Rational(2))));
}

TEST_CASE("bern clamps; categorical normalizes literal weights") {
    FiniteMeasure hi = eval_str("sample(bern 3/2)");
    REQUIRE(hi.support.size() == 1);
    CHECK(value_equal(hi.support[0].first, value_tt()));
    FiniteMeasure lo = eval_str("sample(bern(-1))");
    REQUIRE(lo.support.size() == 1);
    CHECK(value_equal(lo.support[0].first, value_ff()));

    FiniteMeasure cat = eval_str("sample(categorical((1/1, 2), (2/1, 1), (1/1, 1)))");
    CHECK(weight_at(cat, value_rat(Rational(1))) == Rational(3, 4));
    CHECK(weight_at(cat, value_rat(Rational(2))) == Rational(1, 4));
    CHECK(is_probability(cat));
}

TEST_CASE("dirac is polymorphic in its argument type") {
    FiniteMeasure m = eval_str("sample(dirac((1/2, tt)))");
    REQUIRE(m.support.size() == 1);
    CHECK(value_equal(m.support[0].first, value_pair(value_rat(Rational(1, 2)), value_tt())));
    CHECK(ty_equal(m.carrier, ty_product(ty_real(), ty_bool())));
}

TEST_CASE("score weights the unit mass; let multiplies weights") {
    FiniteMeasure m = eval_str(
        "let x = sample(bern 1/2) in let u = score(if x then 2 else 1) in return x");
    CHECK(mass(m) == Rational(3, 2));
    CHECK(weight_at(m, value_tt()) == Rational(1));
    CHECK(weight_at(m, value_ff()) == Rational(1, 2));
    CHECK(mass(eval_str("score(-3)")) == Rational(3));  // absolute value
}

TEST_CASE("norm renormalizes onto the success branch; empty mass errors") {
    FiniteMeasure post = eval_str(
        "norm(let x = sample(bern 1/2) in let u = score(if x then 2 else 1) in return x)");
    CHECK(weight_at(post, value_inj(0, value_tt())) == Rational(2, 3));
    CHECK(weight_at(post, value_inj(0, value_ff())) == Rational(1, 3));
    CHECK(is_probability(post));

    FiniteMeasure err = eval_str("norm(let x = sample(bern 1/2) in let u = score(0) in return x)");
    REQUIRE(err.support.size() == 1);
    CHECK(value_equal(err.support[0].first, value_inj(1, value_unit())));
}

TEST_CASE("probabilistic case evaluates only the taken branch, lifting det bodies") {
    FiniteMeasure m = eval_str("case tt of { (0, _) => 3 | (1, _) => return 4 }");
    REQUIRE(m.support.size() == 1);
    CHECK(value_equal(m.support[0].first, value_rat(Rational(3))));
    CHECK(is_probability(m));
}

TEST_CASE("stat: ergodic chain converges to the exact stationary distribution") {
    FiniteMeasure m = eval_str(
        "stat(return tt, fn x => if x then sample(bern 1/2) else sample(bern 1/4))");
    CHECK(weight_at(m, value_inj(0, value_tt())) == Rational(1, 3));
    CHECK(weight_at(m, value_inj(0, value_ff())) == Rational(2, 3));

    TermPtr t = parse_ok(
        "stat(return tt, fn x => if x then sample(bern 1/2) else sample(bern 1/4))");
    FiniteMeasure init = eval_prob(t->kids[0], Env{}, Context{}, EvalLimits{});
    StatAnalysis an = stat_solve(init, t->name, t->kids[1], Env{}, Context{}, EvalLimits{});
    CHECK(an.verdict == StatVerdict::UniqueLimit);
    CHECK(an.period == 1);
    REQUIRE(an.matrix.states.size() == 2);
    // Canonical state order: tt = (0, ()) sorts before ff = (1, ()).
    CHECK(an.matrix.rows[0] == std::vector<Rational>{Rational(1, 2), Rational(1, 2)});
    CHECK(an.matrix.rows[1] == std::vector<Rational>{Rational(1, 4), Rational(3, 4)});
    CHECK(an.stationary == std::vector<Rational>{Rational(1, 3), Rational(2, 3)});
}

TEST_CASE("stat: transient states feed a unique absorbing class") {
    FiniteMeasure m = eval_str("stat(sample(bern 1/2), fn x => if x then sample(bern 1/2) else return ff)");
    REQUIRE(m.support.size() == 1);
    CHECK(value_equal(m.support[0].first, value_inj(0, value_ff())));
}

TEST_CASE("stat: periodic and reducible chains take the error branch") {
    FiniteMeasure flip = eval_str("stat(return tt, fn x => if x then return ff else return tt)");
    REQUIRE(flip.support.size() == 1);
    CHECK(value_equal(flip.support[0].first, value_inj(1, value_unit())));

    FiniteMeasure frozen = eval_str("stat(sample(bern 1/2), fn x => return x)");
    REQUIRE(frozen.support.size() == 1);
    CHECK(value_equal(frozen.support[0].first, value_inj(1, value_unit())));

    // Period is computed, not just detected: a 3-cycle.
    TermPtr t = parse_ok(
        "stat(return 0, fn x => if eq(x, 0) then return 1 else (if eq(x, 1) then return 2 else "
        "return 0))");
    FiniteMeasure init = eval_prob(t->kids[0], Env{}, Context{}, EvalLimits{});
    StatAnalysis an = stat_solve(init, t->name, t->kids[1], Env{}, Context{}, EvalLimits{});
    CHECK(an.verdict == StatVerdict::Periodic);
    CHECK(an.period == 3);
}

TEST_CASE("state budget cuts off unbounded chains") {
    std::string growing =
        "stat(return 0, fn x => sample(categorical((add(x, 1), 1/2), (add(x, 2), 1/2))))";
    CHECK_THROWS_AS(eval_str(growing, 50), StateBudgetExceeded);
    try {
        eval_str(growing, 50);
    } catch (const StateBudgetExceeded& e) {
        CHECK(e.budget == 50);
    }
}

TEST_CASE("differential oracle agrees on the stat-free corpus programs") {
    for (const char* name : {"prior_only", "bern_score", "nested_norm", "mass_zero_norm",
                             "case_prior", "categorical_norm", "dist_literal", "case_norm",
                             "two_norms", "norm_no_score"}) {
        INFO(name);
        TermPtr t = testutil::parse_file(
            testutil::source_path("corpus/" + std::string(name) + ".statl"));
        CHECK(oracle::agrees_closed(t));
    }
}

TEST_CASE("differential oracle agrees on fuzzed norm-bearing programs") {
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 150; ++seed) {
        fuzz::Fuzzer f(202608230 + seed);
        TermPtr t = f.program(/*with_norm=*/true, /*with_stat=*/false);
        INFO("seed " << seed << ": " << print_term(t));
        REQUIRE(kind_check(t).kind == Kind::PureProb);
        CHECK(oracle::agrees_closed(t));
        ++checked;
    }
    CHECK(checked == 150);
}

TEST_CASE("purely probabilistic programs have mass exactly one") {
    for (std::uint64_t seed = 0; seed < 80; ++seed) {
        fuzz::Fuzzer f(99000 + seed);
        TermPtr t = f.program(true, false);
        FiniteMeasure m = eval_prob(t, Env{}, Context{}, EvalLimits{});
        INFO("seed " << seed << ": " << print_term(t));
        CHECK(mass(m) == Rational(1));
        for (const auto& e : m.support) CHECK(inhabits(e.first, m.carrier));
    }
}
