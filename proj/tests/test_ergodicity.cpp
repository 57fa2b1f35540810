// Contraction certificates: Dobrushin coefficients, m-th-power fallbacks,
// the geometric contraction and perturbation inequalities, per-site
// certification, and the compositional error bound.

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support/testutil.hpp"

using namespace statl;
using testutil::parse_ok;

namespace {

Rational rr(std::mt19937_64& g, int max_den = 16) {
    std::uniform_int_distribution<int> dd(2, max_den);
    int den = dd(g);
    std::uniform_int_distribution<int> dn(1, den - 1);
    return Rational(dn(g), den);  // strictly inside (0, 1)
}

// Two-state kernel over bool with rows [a, 1-a], [b, 1-b]; its stationary
// distribution is (b, 1-a) / (b + 1 - a).
struct BoolChain {
    KernelMatrix k;
    std::vector<Rational> pi;
};

BoolChain bool_chain(const Rational& a, const Rational& b) {
    BoolChain out;
    out.k = KernelMatrix{ty_bool(),
                         {value_tt(), value_ff()},
                         {{a, Rational(1) - a}, {b, Rational(1) - b}}};
    Rational denom = b + Rational(1) - a;
    out.pi = {b / denom, (Rational(1) - a) / denom};
    return out;
}

FiniteMeasure bool_measure(const Rational& w_tt) {
    MeasureBuilder b(ty_bool());
    b.add(value_tt(), w_tt);
    b.add(value_ff(), Rational(1) - w_tt);
    return std::move(b).build();
}

}  // namespace

TEST_CASE("total variation and the Dobrushin coefficient") {
    CHECK(tv_vec({Rational(1), Rational(0)}, {Rational(0), Rational(1)}) == Rational(1));
    CHECK(tv_vec({Rational(1, 2), Rational(1, 2)}, {Rational(1, 4), Rational(3, 4)}) ==
          Rational(1, 4));
    CHECK(dobrushin({{Rational(1, 2), Rational(1, 2)}, {Rational(1, 4), Rational(3, 4)}}) ==
          Rational(1, 4));
    CHECK(dobrushin({{Rational(1), Rational(0)}, {Rational(0), Rational(1)}}) == Rational(1));
    CHECK(dobrushin({{Rational(0), Rational(1)}, {Rational(1), Rational(0)}}) == Rational(1));
    CHECK(dobrushin({{Rational(1, 3), Rational(2, 3)}, {Rational(1, 3), Rational(2, 3)}}) ==
          Rational(0));
    CHECK(dobrushin({{Rational(1)}}) == Rational(0));  // one state: no pairs
}

TEST_CASE("Dobrushin coefficients are submultiplicative under kernel powers") {
    std::mt19937_64 g(7101);
    for (int trial = 0; trial < 50; ++trial) {
        BoolChain c = bool_chain(rr(g), rr(g));
        std::vector<std::vector<std::vector<Rational>>> pow{c.k.rows};
        for (int m = 1; m < 8; ++m) pow.push_back(detail::mat_mul(pow.back(), c.k.rows));
        for (int a = 1; a <= 4; ++a)
            for (int b = 1; a + b <= 8; ++b)
                CHECK(dobrushin(pow[a + b - 1]) <= dobrushin(pow[a - 1]) * dobrushin(pow[b - 1]));
    }
}

TEST_CASE("bisection root bounds are tight upper bounds") {
    std::mt19937_64 g(7102);
    Rational step(1, 1LL << 32);
    for (int trial = 0; trial < 60; ++trial) {
        Rational x = rr(g, 50);
        std::uniform_int_distribution<unsigned long> dm(1, 6);
        unsigned long m = dm(g);
        Rational r = detail::root_upper_bound(x, m);
        CHECK(rat_pow(r, m) >= x);
        CHECK(rat_pow(r - step, m) < x);  // one bisection grid point lower fails
    }
}

TEST_CASE("certificates: contractive at the first power") {
    BoolChain c = bool_chain(Rational(1, 2), Rational(1, 4));
    CHECK(c.pi == std::vector<Rational>{Rational(1, 3), Rational(2, 3)});
    ErgodicityCert cert = certify(c.k, c.pi, 8);
    REQUIRE(cert.certified);
    CHECK(cert.m == 1);
    CHECK(cert.delta_m == Rational(1, 4));
    CHECK(cert.C == Rational(1));
    CHECK(cert.rho == Rational(1, 4));

    // A single absorbing state contracts instantly with rho = 0.
    KernelMatrix one{ty_unit(), {value_unit()}, {{Rational(1)}}};
    ErgodicityCert c1 = certify(one, {Rational(1)}, 8);
    REQUIRE(c1.certified);
    CHECK(c1.m == 1);
    CHECK(c1.rho == Rational(0));
    CHECK(c1.C == Rational(1));
}

TEST_CASE("certificates: exact zero at a later power falls back to rho one-half") {
    KernelMatrix k{ty_real(),
                   {value_rat(Rational(0)), value_rat(Rational(1)), value_rat(Rational(2))},
                   {{Rational(0), Rational(1), Rational(0)},
                    {Rational(0), Rational(0), Rational(1)},
                    {Rational(0), Rational(0), Rational(1)}}};
    ErgodicityCert cert = certify(k, {Rational(0), Rational(0), Rational(1)}, 8);
    REQUIRE(cert.certified);
    CHECK(cert.m == 2);
    CHECK(cert.delta_m == Rational(0));
    CHECK(cert.C == Rational(2));
    CHECK(cert.rho == Rational(1, 2));
}

TEST_CASE("certificates: contraction only at a later power takes an m-th root") {
    KernelMatrix k{ty_real(),
                   {value_rat(Rational(0)), value_rat(Rational(1)), value_rat(Rational(2))},
                   {{Rational(0), Rational(1), Rational(0)},
                    {Rational(0), Rational(0), Rational(1)},
                    {Rational(1, 2), Rational(0), Rational(1, 2)}}};
    std::vector<Rational> pi{Rational(1, 4), Rational(1, 4), Rational(1, 2)};
    ErgodicityCert cert = certify(k, pi, 8);
    REQUIRE(cert.certified);
    CHECK(cert.m == 2);
    CHECK(cert.delta_m == Rational(3, 4));
    CHECK(cert.C == Rational(4, 3));
    CHECK(cert.rho * cert.rho >= Rational(3, 4));
    CHECK(cert.rho < Rational(7, 8));  // close above sqrt(3)/2 ~ 0.866

    // Validity at powers not a multiple of m: delta(K^N) <= C rho^N for a few N.
    std::vector<std::vector<Rational>> pow = k.rows;
    for (unsigned long n = 1; n <= 10; ++n) {
        CHECK(dobrushin(pow) <= cert.C * rat_pow(cert.rho, n));
        pow = detail::mat_mul(pow, k.rows);
    }
}

TEST_CASE("certificates: a period-two chain has no contractive power") {
    KernelMatrix flip{ty_bool(),
                      {value_tt(), value_ff()},
                      {{Rational(0), Rational(1)}, {Rational(1), Rational(0)}}};
    ErgodicityCert cert = certify(flip, {Rational(1, 2), Rational(1, 2)}, 8);
    CHECK_FALSE(cert.certified);
}

TEST_CASE("certificates reject malformed or non-invariant stationary vectors") {
    BoolChain c = bool_chain(Rational(1, 2), Rational(1, 4));
    CHECK_THROWS_AS(certify(c.k, {Rational(1)}, 8), std::invalid_argument);
    CHECK_THROWS_AS(certify(c.k, {Rational(1, 2), Rational(1, 2)}, 8), std::invalid_argument);
    CHECK_THROWS_AS(certify(c.k, {Rational(3, 2), Rational(-1, 2)}, 8), std::invalid_argument);
}

TEST_CASE("geometric contraction holds on random two-state chains") {
    std::mt19937_64 g(7103);
    std::uniform_int_distribution<unsigned long> dn(0, 20);
    for (int trial = 0; trial < 200; ++trial) {
        BoolChain c = bool_chain(rr(g), rr(g));
        ErgodicityCert cert = certify(c.k, c.pi, 8);
        REQUIRE(cert.certified);  // interior rows always overlap
        FiniteMeasure mu = bool_measure(rr(g));
        FiniteMeasure nu = bool_measure(rr(g));
        unsigned long n = dn(g);
        ContractionCheck chk = check_contraction(c.k, mu, nu, n, cert);
        INFO("trial " << trial << " n=" << n << " lhs=" << rat_to_string(chk.lhs)
                      << " rhs=" << rat_to_string(chk.rhs));
        CHECK(chk.holds);
    }
}

TEST_CASE("contraction is tight for lazy rank-one mixtures") {
    // K = alpha I + (1 - alpha) 1 pi^T contracts by exactly alpha each step.
    Rational alpha(2, 5);
    std::vector<Rational> pi{Rational(1, 6), Rational(1, 3), Rational(1, 2)};
    std::vector<std::vector<Rational>> rows(3, std::vector<Rational>(3));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            rows[i][j] = (i == j ? alpha : Rational(0)) + (Rational(1) - alpha) * pi[j];
    KernelMatrix k{ty_real(),
                   {value_rat(Rational(0)), value_rat(Rational(1)), value_rat(Rational(2))},
                   rows};
    ErgodicityCert cert = certify(k, pi, 8);
    REQUIRE(cert.certified);
    CHECK(cert.rho == alpha);
    MeasureBuilder mb(ty_real());
    mb.add(value_rat(Rational(0)), Rational(1));
    FiniteMeasure mu = std::move(mb).build();
    MeasureBuilder nb(ty_real());
    nb.add(value_rat(Rational(2)), Rational(1));
    FiniteMeasure nu = std::move(nb).build();
    ContractionCheck chk = check_contraction(k, mu, nu, 6, cert);
    CHECK(chk.holds);
    CHECK(chk.lhs == chk.rhs);  // equality: the bound cannot be improved
}

TEST_CASE("perturbation bound: the frozen two-state family") {
    BoolChain c = bool_chain(Rational(1, 2), Rational(1, 4));
    ErgodicityCert cert = certify(c.k, c.pi, 8);
    KernelMatrix kp{ty_bool(),
                    {value_tt(), value_ff()},
                    {{Rational(11, 20), Rational(9, 20)}, {Rational(1, 5), Rational(4, 5)}}};
    PerturbationCheck chk = check_perturbation(c.k, kp, bool_measure(Rational(1)), c.pi, 20,
                                               cert, Rational(1, 20));
    CHECK(chk.eps == Rational(1, 20));
    CHECK(chk.drift_bound == Rational(1, 15));
    CHECK(chk.exact_holds);
    CHECK(chk.pi_holds);
    // The perturbed chain's true stationary distribution is (4/13, 9/13),
    // at distance 1/39 from pi -- safely inside the 1/15 envelope.
    CHECK(chk.lhs_vs_pi >= Rational(1, 39) - Rational(1, 1000000));

    // Overstating the rowwise distance is rejected.
    CHECK_THROWS_AS(check_perturbation(c.k, kp, bool_measure(Rational(1)), c.pi, 5, cert,
                                       Rational(1, 40)),
                    std::invalid_argument);
}

TEST_CASE("perturbation bound holds on random perturbed families") {
    std::mt19937_64 g(7104);
    std::uniform_int_distribution<unsigned long> dn(0, 20);
    std::uniform_int_distribution<int> sign(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        Rational a = rr(g), b = rr(g);
        BoolChain c = bool_chain(a, b);
        ErgodicityCert cert = certify(c.k, c.pi, 8);
        // Shift each row by its own offset, capped to keep entries in [0, 1].
        Rational cap = Rational(1, 64);
        auto clampshift = [&](const Rational& p, const Rational& d) {
            Rational q = p + d;
            if (q < 0) return Rational(0);
            if (q > 1) return Rational(1);
            return q;
        };
        Rational da = (sign(g) ? cap : -cap) / (1 + trial % 3);
        Rational db = (sign(g) ? cap : -cap) / (1 + trial % 5);
        Rational ap = clampshift(a, da), bp = clampshift(b, db);
        KernelMatrix kp{ty_bool(),
                        {value_tt(), value_ff()},
                        {{ap, Rational(1) - ap}, {bp, Rational(1) - bp}}};
        Rational eps = cap;  // dominates both |ap-a| and |bp-b|
        unsigned long n = dn(g);
        PerturbationCheck chk =
            check_perturbation(c.k, kp, bool_measure(rr(g)), c.pi, n, cert, eps);
        INFO("trial " << trial << " n=" << n);
        CHECK(chk.exact_holds);
        CHECK(chk.pi_holds);
    }
}

TEST_CASE("per-site certification of the two-state chain program") {
    TermPtr chain = testutil::parse_file(testutil::source_path("corpus/stat_chain.statl"));
    SiteCertMap certs = certify_sites(chain, 8);
    REQUIRE(certs.size() == 1);
    const SiteCert& c = certs.at("s0");
    CHECK(c.reachable);
    CHECK(c.certified);
    CHECK(c.C == Rational(1));
    CHECK(c.rho == Rational(1, 4));
    CHECK(c.m == 1);
    CHECK(c.delta_m == Rational(1, 4));
    CHECK(c.env_count == 1);
    CHECK(c.max_states == 2);
    CHECK(c.verdict == "unique-limit");
}

TEST_CASE("per-site certification merges environments of a sampler inside a chain") {
    TermPtr t = testutil::parse_file(testutil::source_path("corpus/norm_inside_stat.statl"));
    TermPtr c = compile(t);
    SiteCertMap certs = certify_sites(c, 8);
    REQUIRE(certs.size() == 2);
    const SiteCert& outer = certs.at("s0");
    CHECK(outer.certified);
    CHECK(outer.rho == Rational(3, 10));
    CHECK(outer.env_count == 1);
    const SiteCert& inner = certs.at("s1");
    CHECK(inner.certified);
    CHECK(inner.env_count == 2);             // one run per outer kernel state
    CHECK(inner.rho == Rational(1, 3));      // worst of the per-state kernels
    CHECK(inner.verdict == "unique-limit");
}

TEST_CASE("per-site certification reports failure verdicts") {
    TermPtr periodic = testutil::parse_file(testutil::source_path("corpus/periodic_stat.statl"));
    SiteCertMap pm = certify_sites(periodic, 8);
    REQUIRE(pm.size() == 1);
    CHECK_FALSE(pm.at("s0").certified);
    CHECK(pm.at("s0").reachable);
    CHECK(pm.at("s0").verdict == "periodic");

    TermPtr frozen = parse_ok("stat(sample(bern 1/2), fn x => return x)");
    SiteCertMap fm = certify_sites(frozen, 8);
    CHECK_FALSE(fm.at("s0").certified);
    CHECK(fm.at("s0").verdict == "multiple-recurrent-classes");

    // Aperiodic and irreducible, but m_max = 1 is too small to see overlap.
    TermPtr slow = parse_ok(
        "stat(return 0, fn x => if eq(x, 0) then return 1 else (if eq(x, 1) then return 2 else "
        "sample(categorical((0/1, 1/2), (2/1, 1/2)))))");
    SiteCertMap sm = certify_sites(slow, 1);
    CHECK_FALSE(sm.at("s0").certified);
    CHECK(sm.at("s0").verdict == "no-contractive-power");
    // With room to take powers the same chain certifies.
    SiteCertMap sm8 = certify_sites(slow, 8);
    CHECK(sm8.at("s0").certified);

    TermPtr unreachable = parse_ok(
        "case tt of { (0, _) => return 0 | (1, _) => stat(return 0, fn x => return x) }");
    SiteCertMap um = certify_sites(unreachable, 8);
    REQUIRE(um.size() == 1);
    CHECK_FALSE(um.at("s0").reachable);
    CHECK_FALSE(um.at("s0").certified);
    CHECK(um.at("s0").verdict == "unreachable");
}

TEST_CASE("compositional bound on the two-state chain") {
    TermPtr chain = testutil::parse_file(testutil::source_path("corpus/stat_chain.statl"));
    SiteCertMap certs = certify_sites(chain, 8);
    BoundReport r = approximation_bound(chain, IterationPlan{{"s0", 3}}, certs);
    REQUIRE(r.sites.size() == 1);
    CHECK(r.sites[0].label == "s0");
    CHECK(r.sites[0].contribution == Rational(1, 64));
    CHECK(r.total == Rational(1, 64));
    CHECK(r.empirical_tv == Rational(1, 96));
    CHECK(r.sound);
}

TEST_CASE("compositional bound compounds through nested chains") {
    TermPtr nested = testutil::parse_file(testutil::source_path("corpus/nested_stat.statl"));
    SiteCertMap certs = certify_sites(nested, 8);
    REQUIRE(certs.at("s0").certified);
    REQUIRE(certs.at("s1").certified);
    CHECK(certs.at("s0").C == Rational(1));
    CHECK(certs.at("s0").rho == Rational(1, 2));
    CHECK(certs.at("s1").C == Rational(1));
    CHECK(certs.at("s1").rho == Rational(1, 2));

    BoundReport r = approximation_bound(nested, IterationPlan{{"s0", 10}, {"s1", 10}}, certs);
    REQUIRE(r.sites.size() == 2);
    // Outer site at multiplier 1; inner site inside the body picks up C/(1-rho) = 2.
    CHECK(r.sites[0].contribution == Rational(1, 1024));
    CHECK(r.sites[1].contribution == Rational(1, 512));
    CHECK(r.total == Rational(3, 1024));
    CHECK(r.sound);
}

TEST_CASE("the bound refuses uncompiled and uncertified inputs") {
    TermPtr norm = parse_ok(testutil::read_file(testutil::source_path("corpus/bern_score.statl")));
    CHECK_THROWS_AS(approximation_bound(norm, IterationPlan{}, SiteCertMap{}),
                    std::invalid_argument);

    TermPtr chain = testutil::parse_file(testutil::source_path("corpus/stat_chain.statl"));
    CHECK_THROWS_AS(approximation_bound(chain, IterationPlan{{"s0", 3}}, SiteCertMap{}),
                    std::invalid_argument);
    SiteCertMap certs = certify_sites(chain, 8);
    CHECK_THROWS_AS(approximation_bound(chain, IterationPlan{}, certs), PlanError);
}
