// The bundled program corpus: manifest integrity, printer stability, and
// frozen exact results for every program.

#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "support/testutil.hpp"

using namespace statl;

namespace {

const std::map<std::string, std::string> kExpected = {
    {"bern_score", "dist<sum[sum[unit, unit], unit]>(((0, (0, ())), 2/3), ((0, (1, ())), 1/3))"},
    {"case_norm", "dist<sum[sum[unit, unit], unit]>(((0, (0, ())), 3/4), ((0, (1, ())), 1/4))"},
    {"case_prior", "dist<sum[unit, unit]>(((0, ()), 1/4), ((1, ()), 3/4))"},
    {"categorical_norm", "dist<sum[real, unit]>(((0, 1), 3/10), ((0, 2), 2/5), ((0, 3), 3/10))"},
    {"compiled_bern_score",
     "dist<sum[sum[unit, unit], unit]>(((0, (0, ())), 2/3), ((0, (1, ())), 1/3))"},
    {"dist_literal", "dist<(real * sum[unit, unit])>(((1/1, (0, ())), 2/3), ((2/1, (1, ())), 1/3))"},
    {"identity_chain", "dist<sum[unit, unit]>(((0, ()), 1/1))"},
    {"mass_zero_norm", "dist<sum[sum[unit, unit], unit]>(((1, ()), 1/1))"},
    {"nested_norm",
     "dist<sum[sum[sum[unit, unit], unit], unit]>(((0, (0, (0, ()))), 6/7), ((0, (0, (1, ()))), "
     "1/7))"},
    {"nested_stat", "dist<sum[sum[unit, unit], unit]>(((0, (0, ())), 2/3), ((0, (1, ())), 1/3))"},
    {"norm_inside_stat",
     "dist<sum[sum[unit, unit], unit]>(((0, (0, ())), 5/7), ((0, (1, ())), 2/7))"},
    {"norm_no_score", "dist<sum[sum[unit, unit], unit]>(((0, (0, ())), 1/3), ((0, (1, ())), 2/3))"},
    {"periodic_stat", "dist<sum[sum[unit, unit], unit]>(((1, ()), 1/1))"},
    {"prior_only", "dist<sum[unit, unit]>(((0, ()), 1/2), ((1, ()), 1/2))"},
    {"reducible_stat", "dist<sum[sum[unit, unit], unit]>(((1, ()), 1/1))"},
    {"stat_chain", "dist<sum[sum[unit, unit], unit]>(((0, (0, ())), 1/3), ((0, (1, ())), 2/3))"},
    {"two_norms",
     "dist<(sum[sum[unit, unit], unit] * sum[sum[unit, unit], unit])>((((0, (0, ())), (0, (0, "
     "()))), 3/28), (((0, (0, ())), (0, (1, ()))), 9/14), (((0, (1, ())), (0, (0, ()))), 1/28), "
     "(((0, (1, ())), (0, (1, ()))), 3/14))"},
};

}  // namespace

TEST_CASE("manifest matches the checked-in programs") {
    auto entries = corpus_manifest(testutil::source_path("corpus/manifest.json"));
    REQUIRE(entries.size() == kExpected.size());
    std::map<std::string, bool> seen;
    for (const auto& e : entries) {
        INFO(e.name);
        CHECK_FALSE(seen[e.name]);
        seen[e.name] = true;
        TermPtr t = testutil::parse_file(testutil::source_path("corpus/" + e.file));
        KindTy kt = kind_check(t);
        CHECK(kind_name(kt.kind) == e.kind);
        CHECK(free_vars(t).empty());
        CHECK(term_digest(t) == e.digest);
        // Printing is a fixed point: reparse and reprint reproduce the digest.
        TermPtr again = testutil::parse_ok(print_term(t));
        CHECK(term_digest(again) == e.digest);
        CHECK(term_equal(again, t));
    }
}

TEST_CASE("every corpus program evaluates to its frozen exact distribution") {
    auto entries = corpus_manifest(testutil::source_path("corpus/manifest.json"));
    for (const auto& e : entries) {
        INFO(e.name);
        TermPtr t = testutil::parse_file(testutil::source_path("corpus/" + e.file));
        FiniteMeasure m = eval_prob(t, Env{}, Context{}, EvalLimits{});
        REQUIRE(kExpected.count(e.name) == 1);
        CHECK(measure_to_dist_string(m) == kExpected.at(e.name));
        CHECK(is_probability(m));
    }
}

TEST_CASE("the bundled compiled program is the compiler's own output") {
    TermPtr source = testutil::parse_file(testutil::source_path("corpus/bern_score.statl"));
    TermPtr bundled = testutil::parse_file(testutil::source_path("corpus/compiled_bern_score.statl"));
    TermPtr compiled = compile(source);
    CHECK(term_equal(bundled, compiled));
    CHECK(term_digest(bundled) == term_digest(compiled));
    CHECK(term_digest(compiled) == "17dccfcdc00809e4");
    CHECK(measure_equal(eval_prob(bundled, Env{}, Context{}, EvalLimits{}),
                        eval_prob(source, Env{}, Context{}, EvalLimits{})));
}

TEST_CASE("corpus spans the behaviours the tool distinguishes") {
    auto entries = corpus_manifest(testutil::source_path("corpus/manifest.json"));
    std::size_t with_norm = 0, with_stat = 0, with_score = 0, error_results = 0;
    for (const auto& e : entries) {
        TermPtr t = testutil::parse_file(testutil::source_path("corpus/" + e.file));
        std::string s = print_term(t);
        if (s.find("norm(") != std::string::npos) ++with_norm;
        if (s.find("stat(") != std::string::npos) ++with_stat;
        if (s.find("score(") != std::string::npos) ++with_score;
        FiniteMeasure m = eval_prob(t, Env{}, Context{}, EvalLimits{});
        if (m.support.size() == 1 && m.support[0].first.rep.index() == 3 &&
            std::get<Value::InjRep>(m.support[0].first.rep).tag == 1 &&
            !m.carrier->parts.empty() && ty_equal(m.carrier->parts.back(), ty_unit()))
            ++error_results;
    }
    CHECK(with_norm >= 7);
    CHECK(with_stat >= 4);
    CHECK(with_score >= 5);
    CHECK(error_results >= 3);  // mass-zero norm, periodic and reducible chains
}
