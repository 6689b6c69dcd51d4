#include "riskconv/infconv.hpp"
#include "riskconv/random.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace riskconv;

namespace {

RandomVariable<double> fixture() {
    return {uniform_space<double>(4), {-4.0, -2.0, 1.0, 3.0}};
}

RandomVariable<Rational> fixture_rational() {
    return {uniform_space<Rational>(4),
            {Rational(-4), Rational(-2), Rational(1), Rational(3)}};
}

} // namespace

TEST_CASE("expected shortfall pair attains the higher-level shortfall") {
    const auto x = fixture();
    const std::vector<RiskMeasure> ms = {make_es(0.3), make_es(0.6)};
    const auto res = infconv_law_invariant(ms, x);
    REQUIRE(res.allocation.has_value());
    CHECK(res.converged);
    // the pair infimum equals the single measure at the larger level
    CHECK(res.value == Catch::Approx(es_alpha(x, 0.6)).margin(1e-4));
    CHECK(res.gap <= 1e-3);

    const auto cert = certify_exactness(res, ms, x);
    CHECK(cert.ok);
    CHECK(cert.failed.empty());
    CHECK(cert.value_recomputed == Catch::Approx(res.value).margin(1e-6));
}

TEST_CASE("entropic pair adds the aversion parameters") {
    const auto x = fixture();
    const std::vector<RiskMeasure> ms = {make_entropic(0.5), make_entropic(1.5)};
    const auto res = infconv_law_invariant(ms, x);
    CHECK(res.converged);
    CHECK(res.value == Catch::Approx(entropic(x, 2.0)).margin(1e-4));
    CHECK(certify_exactness(res, ms, x).ok);
}

TEST_CASE("three entropic agents still add the aversions") {
    const auto x = fixture();
    const std::vector<RiskMeasure> ms = {make_entropic(0.5), make_entropic(1.0),
                                         make_entropic(1.5)};
    const auto res = infconv_law_invariant(ms, x);
    CHECK(res.converged);
    CHECK(res.value == Catch::Approx(entropic(x, 3.0)).margin(1e-3));
    CHECK(certify_exactness(res, ms, x).ok);
}

TEST_CASE("sharing with the linear measure reproduces it") {
    const auto x = fixture();
    const std::vector<RiskMeasure> ms = {make_neg_expectation(), make_neg_expectation()};
    const auto res = infconv_law_invariant(ms, x);
    CHECK(res.value == Catch::Approx(0.5).margin(1e-6));
}

TEST_CASE("pair value is cash invariant") {
    const auto x = fixture();
    const std::vector<RiskMeasure> ms = {make_es(0.4), make_entropic(1.0)};
    const double base = infconv_law_invariant(ms, x).value;
    const double shifted = infconv_law_invariant(ms, x + 1.25).value;
    CHECK(shifted == Catch::Approx(base - 1.25).margin(5e-4));
}

TEST_CASE("constant positions split into constants") {
    const auto one = RandomVariable<double>::constant(uniform_space<double>(4), 2.5);
    const std::vector<RiskMeasure> ms = {make_es(0.3), make_es(0.6)};
    const auto res = infconv_law_invariant(ms, one);
    CHECK(res.value == Catch::Approx(-2.5).margin(1e-6));
}

TEST_CASE("solver matches the exhaustive grid on small instances") {
    Rng rng(19);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t n = 3;
        const auto sp = uniform_space<double>(n);
        std::vector<double> vals(n);
        for (auto& v : vals) v = rng.uniform(-3.0, 3.0);
        const RandomVariable<double> x(sp, vals);
        const double a1 = rng.uniform(0.1, 0.9), a2 = rng.uniform(0.1, 1.0);
        const std::vector<RiskMeasure> ms = {make_es(a1), make_es(a2)};

        const auto res = infconv_law_invariant(ms, x);
        const double grid = infconv_bruteforce(ms[0], ms[1], x, 41);
        const double resolution = bruteforce_resolution(x, 41);
        CHECK(res.value <= grid + 1e-6);      // the witness is feasible for the grid
        CHECK(res.value >= grid - resolution - 1e-4);
    }
}

TEST_CASE("allocation witness is a valid split of the identity") {
    const auto x = fixture();
    const std::vector<RiskMeasure> ms = {make_es(0.3), make_entropic(1.0)};
    const auto res = infconv_law_invariant(ms, x);
    REQUIRE(res.allocation.has_value());
    const auto& a = *res.allocation;

    CHECK(a.agents() == 2);
    CHECK(a.violations(1e-6).empty());

    // parts recombine into x and the values match the measures' total
    const auto y0 = a.apply(0, x), y1 = a.apply(1, x);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(y0[i] + y1[i] == Catch::Approx(x[i]).margin(1e-9));
    CHECK(ms[0](y0) + ms[1](y1) == Catch::Approx(res.value).margin(1e-6));

    // interpolation hits the stored values at the knots
    for (std::size_t k = 0; k < a.knot_count(); ++k)
        CHECK(a.evaluate(0, a.knots()[k]) == Catch::Approx(a.values()[0][k]).margin(1e-12));
}

TEST_CASE("certificate rejects ill-formed witnesses") {
    const auto x = fixture();
    const std::vector<RiskMeasure> ms = {make_es(0.3), make_es(0.6)};
    auto res = infconv_law_invariant(ms, x);
    REQUIRE(res.allocation.has_value());

    // value understated: recomputation exposes the mismatch
    auto lied = res;
    lied.value -= 0.5;
    CHECK_FALSE(certify_exactness(lied, ms, x).ok);

    // non-monotone hand-built allocation: named violation reported
    std::vector<double> knots = {-4.0, -2.0, 0.0, 1.0, 3.0};
    std::vector<std::vector<double>> values = {{-5.0, -2.0, 0.0, 1.0, 0.5},
                                               {1.0, 0.0, 0.0, 0.0, 2.5}};
    auto broken = res;
    broken.allocation = Allocation<double>(knots, values);
    const auto cert = certify_exactness(broken, ms, x);
    CHECK_FALSE(cert.ok);
    CHECK_FALSE(cert.failed.empty());

    // missing allocation cannot certify
    auto bare = res;
    bare.allocation.reset();
    CHECK_FALSE(certify_exactness(bare, ms, x).ok);
}

TEST_CASE("snapped witness satisfies the invariants with zero tolerance") {
    const auto x = fixture();
    const std::vector<RiskMeasure> ms = {make_es(0.3), make_entropic(1.0)};
    const auto res = infconv_law_invariant(ms, x);
    REQUIRE(res.allocation.has_value());

    const std::vector<Rational> knots = {Rational(-4), Rational(-2), Rational(0),
                                         Rational(1), Rational(3)};
    const auto exact = snap_allocation(*res.allocation, knots);
    CHECK(exact.violations(0.0).empty());

    // the exact allocation still recombines to the identity at the knots
    for (std::size_t k = 0; k < knots.size(); ++k) {
        Rational total(0);
        for (std::size_t i = 0; i < exact.agents(); ++i) total += exact.values()[i][k];
        CHECK(total == knots[k]);
    }
}

TEST_CASE("solver input validation") {
    const auto x = fixture();
    CHECK_THROWS_AS(infconv_law_invariant({make_es(0.5)}, x), std::invalid_argument);
    MeasureFlags flags;
    flags.cash_additive = true;
    const RiskMeasure not_law("first_atom",
                              [](const RandomVariable<double>& v) { return -v[0]; }, flags);
    CHECK_THROWS_AS(infconv_law_invariant({make_es(0.5), not_law}, x),
                    std::invalid_argument);
}

TEST_CASE("grid resolution scales with the outcome range") {
    const auto x = fixture();
    CHECK(bruteforce_resolution(x, 41) > 0.0);
    CHECK(bruteforce_resolution(x, 81) < bruteforce_resolution(x, 41));
}

TEST_CASE("equal-weight budget sharing merges the capacities") {
    const auto x = fixture();
    const auto a1 = AcceptanceSet<double>::shortfall_budget(
        SolidPositiveSet<double>::budget(1.0, 0.3));
    const auto a2 = AcceptanceSet<double>::shortfall_budget(
        SolidPositiveSet<double>::budget(1.0, 0.2));
    const auto res = infconv_surplus(a1, a2, x);

    CHECK(res.merged_closed_form);
    REQUIRE(res.merged_capacity.has_value());
    CHECK(*res.merged_capacity == Catch::Approx(0.5).margin(1e-12));

    // merged capacity 0.5 on the fixture prices exactly like the single budget
    const auto merged = AcceptanceSet<double>::shortfall_budget(
        SolidPositiveSet<double>::budget(1.0, 0.5));
    CHECK(res.value == Catch::Approx(acceptance_threshold(merged, x)).margin(1e-10));
    CHECK(res.value == Catch::Approx(2.0).margin(1e-10));

    // the two parts recombine into x and their shortfalls respect the budgets
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(res.part1[i] + res.part2[i] == Catch::Approx(x[i]).margin(1e-12));
    CHECK(expectation(res.shortfall1) <= 0.3 + 1e-9);
    CHECK(expectation(res.shortfall2) <= 0.2 + 1e-9);
    // shortfalls split the pooled shortfall at the certified level
    const auto pooled = neg_part(x + res.value);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(res.shortfall1[i] + res.shortfall2[i] == Catch::Approx(pooled[i]).margin(1e-9));
}

TEST_CASE("budget sharing is exact in rational arithmetic") {
    const auto x = fixture_rational();
    const auto a1 = AcceptanceSet<Rational>::shortfall_budget(
        SolidPositiveSet<Rational>::budget(Rational(1), Rational(3, 10)));
    const auto a2 = AcceptanceSet<Rational>::shortfall_budget(
        SolidPositiveSet<Rational>::budget(Rational(1), Rational(1, 5)));
    const auto res = infconv_surplus(a1, a2, x);

    CHECK(res.value == Rational(2));
    CHECK(res.merged_closed_form);
    REQUIRE(res.merged_capacity.has_value());
    CHECK(*res.merged_capacity == Rational(1, 2));
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(res.part1[i] + res.part2[i] == x[i]);

    // exact budget feasibility of the certified shortfall split
    Rational charge1(0), charge2(0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        charge1 += x.space()->prob(i) * res.shortfall1[i];
        charge2 += x.space()->prob(i) * res.shortfall2[i];
    }
    CHECK(charge1 <= Rational(3, 10));
    CHECK(charge2 <= Rational(1, 5));
}

TEST_CASE("nonproportional weights route through bisection") {
    const auto sp = uniform_space<double>(4);
    const RandomVariable<double> x(sp, {-4.0, -2.0, 1.0, 3.0});
    const RandomVariable<double> w2(sp, {2.0, 1.0, 1.0, 0.5});
    const auto a1 = AcceptanceSet<double>::shortfall_budget(
        SolidPositiveSet<double>::budget(1.0, 0.4));
    const auto a2 = AcceptanceSet<double>::shortfall_budget(
        SolidPositiveSet<double>::budget(w2, 0.3));
    const auto res = infconv_surplus(a1, a2, x);

    CHECK_FALSE(res.merged_closed_form);
    CHECK(res.iterations > 0);

    // the certified level is feasible: the pooled shortfall splits within budget
    const auto merged = sum_acceptance(a1, a2);
    CHECK(merged.contains(x + res.value));
    // and one step below it is not
    CHECK_FALSE(merged.contains(x + (res.value - 1e-6)));

    // the split certificate is budget-feasible
    double charge1 = 0.0, charge2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        charge1 += sp->prob(i) * res.shortfall1[i];
        charge2 += sp->prob(i) * w2[i] * res.shortfall2[i];
    }
    CHECK(charge1 <= 0.4 + 1e-9);
    CHECK(charge2 <= 0.3 + 1e-9);
}

TEST_CASE("merged membership matches the summed budget definition") {
    Rng rng(59);
    const auto sp = uniform_space<double>(8);
    const auto a1 = AcceptanceSet<double>::shortfall_budget(
        SolidPositiveSet<double>::budget(1.0, 0.25));
    const auto a2 = AcceptanceSet<double>::shortfall_budget(
        SolidPositiveSet<double>::budget(1.0, 0.15));
    const auto merged = sum_acceptance(a1, a2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> vals(8);
        for (auto& v : vals) v = rng.uniform(-2.0, 2.0);
        const RandomVariable<double> x(sp, vals);
        // with equal weights the pooled budget charges E[X^-] against 0.4
        const bool direct = expectation(neg_part(x)) <= 0.4;
        CHECK(merged.contains(x) == direct);
    }
}
