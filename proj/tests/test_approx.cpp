#include "riskconv/approx.hpp"
#include "riskconv/measures.hpp"
#include "riskconv/random.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace riskconv;

namespace {

RandomVariable<double> fixture() {
    return {uniform_space<double>(4), {-4.0, -2.0, 1.0, 3.0}};
}

RandomVariable<double> random_uniform_variable(Rng& rng, std::size_t n) {
    std::vector<double> vals(n);
    for (auto& v : vals) v = rng.uniform(-5.0, 5.0);
    return {uniform_space<double>(n), vals};
}

std::vector<Rational> sorted_values(const RandomVariable<Rational>& x) {
    std::vector<Rational> v = x.values();
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST_CASE("refinement scheme reproduces a small variable exactly") {
    const auto x = fixture();
    const RefineResult r = refine_scheme(x, RiNorm::lp(2.0), 16);
    REQUIRE_FALSE(r.steps.empty());
    CHECK(r.exact);
    CHECK(r.steps.back().error == 0.0);
    // errors trend down to zero and each step is a partition of the space
    CHECK(r.steps.back().error <= r.steps.front().error);
    for (const Partition& pi : r.partitions) CHECK(pi.atom_count() == 4);
    // final partition separates all distinct values
    CHECK(cond_expect(x, r.partitions.back()).values() == x.values());
}

TEST_CASE("refinement scheme contracts the error on larger spaces") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = random_uniform_variable(rng, 64);
        const auto norm = trial % 2 == 0
                              ? RiNorm::lp(2.0)
                              : RiNorm::orlicz(OrliczFunction::exp_minus_one());
        const RefineResult r = refine_scheme(x, norm, 16);
        REQUIRE(r.steps.size() >= 2);
        // the scheme must end exact on a finite space once cells separate values
        CHECK(r.exact);
        for (std::size_t i = 0; i + 1 < r.steps.size(); ++i)
            CHECK(r.steps[i + 1].error <= r.steps[i].error + 1e-12);
    }
}

TEST_CASE("equidistributed average recovers the conditional expectation") {
    const auto sp = uniform_space<Rational>(6);
    const RandomVariable<Rational> x(
        sp, {Rational(3), Rational(-1), Rational(4), Rational(1), Rational(-5), Rational(9)});
    const Partition pi(6, {{0, 1, 2}, {3, 4, 5}});

    const auto res = equidistributed_average(x, pi);
    CHECK(res.exact);
    CHECK(res.copies == 3);
    CHECK(res.deviation == 0.0);
    CHECK(res.average.values() == cond_expect(x, pi).values());
}

TEST_CASE("equidistributed copies are rearrangements with the right mean") {
    const auto sp = uniform_space<Rational>(5);
    const RandomVariable<Rational> x(
        sp, {Rational(2), Rational(-3), Rational(7, 2), Rational(0), Rational(1)});
    const Partition pi(5, {{0, 1}, {2, 3, 4}});

    const auto copies = equidistributed_copies(x, pi);
    REQUIRE(copies.size() == 6); // lcm(2,3)
    const auto base = sorted_values(x);
    for (const auto& c : copies) {
        CHECK(sorted_values(c) == base); // every copy is a rearrangement of x
        CHECK(same_distribution(c, x));
    }
    // the running average of all copies is exactly E[X|pi]
    RandomVariable<Rational> sum = copies.front();
    for (std::size_t i = 1; i < copies.size(); ++i) sum = sum + copies[i];
    const auto avg = Rational(1, 6) * sum;
    CHECK(avg.values() == cond_expect(x, pi).values());
}

TEST_CASE("equidistributed construction rejects unequal atom weights") {
    const auto sp = make_space<Rational>({Rational(1, 2), Rational(1, 4), Rational(1, 4)});
    const RandomVariable<Rational> x(sp, {Rational(1), Rational(2), Rational(3)});
    CHECK_THROWS_AS(equidistributed_average(x, Partition(3, {{0, 1}, {2}})),
                    std::invalid_argument);
    CHECK_THROWS_AS(equidistributed_copies(x, Partition(3, {{0, 1}, {2}})),
                    std::invalid_argument);
    // equal weights inside each block are fine even when blocks differ
    CHECK_NOTHROW(equidistributed_average(x, Partition(3, {{0}, {1, 2}})));
    CHECK_THROWS_AS(equidistributed_average(x, Partition(2, {{0}, {1}})),
                    std::invalid_argument);
}

TEST_CASE("capped lcm forces the randomized fallback") {
    // block sizes 9, 8, 7, 5 have lcm 2520 > cap, so copies are sampled
    Rng rng(17);
    const std::size_t sizes[] = {9, 8, 7, 5};
    const std::size_t n = 29;
    const auto x = random_uniform_variable(rng, n);
    std::vector<std::vector<std::size_t>> blocks(4);
    std::size_t at = 0;
    for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t k = 0; k < sizes[b]; ++k) blocks[b].push_back(at++);
    const Partition pi(n, blocks);

    const auto res = equidistributed_average(x, pi, 100, 5);
    CHECK_FALSE(res.exact);
    CHECK(res.copies == 100);
    CHECK(res.deviation > 0.0);
    CHECK(res.deviation < 1.5); // averaging 100 shuffles gets close

    CHECK_THROWS_AS(equidistributed_copies(x, pi, 100), std::invalid_argument);
}

TEST_CASE("localization trace converges from below for convex measures") {
    Rng rng(23);
    for (const auto& rho : {make_es(0.3), make_entropic(1.0)}) {
        for (int trial = 0; trial < 5; ++trial) {
            const auto x = random_uniform_variable(rng, 256);
            const auto res = localization_limit(rho, x, RiNorm::lp(2.0), 1e-8);
            CHECK(res.converged);
            CHECK(std::abs(res.trace.back() - res.target) <= 1e-8);
            // conditioning can only reduce a convex law-invariant measure
            for (double v : res.trace) CHECK(v <= res.target + 1e-9);
        }
    }
}

TEST_CASE("localization rejects measures without law invariance") {
    MeasureFlags flags;
    flags.monotone = flags.cash_additive = true;
    const RiskMeasure weird("first_atom",
                            [](const RandomVariable<double>& x) { return -x[0]; }, flags);
    CHECK_THROWS_AS(localization_limit(weird, fixture(), RiNorm::lp(2.0)),
                    std::invalid_argument);
}

TEST_CASE("localization reports the gap when the budget runs out") {
    // a single step cannot reproduce a 4-value variable
    CHECK_THROWS_AS(localization_limit(make_es(0.3), fixture(), RiNorm::lp(2.0), 1e-12, 1),
                    std::runtime_error);
}

TEST_CASE("cesaro means average prefixes on the common space") {
    const auto sp = uniform_space<double>(2);
    const std::vector<RandomVariable<double>> xs = {
        RandomVariable<double>(sp, {1.0, 0.0}),
        RandomVariable<double>(sp, {3.0, 2.0}),
        RandomVariable<double>(sp, {5.0, 4.0})};
    const auto means = cesaro_means(xs);
    REQUIRE(means.size() == 3);
    CHECK(means[0].values() == std::vector<double>{1.0, 0.0});
    CHECK(means[1].values() == std::vector<double>{2.0, 1.0});
    CHECK(means[2].values() == std::vector<double>{3.0, 2.0});
}
