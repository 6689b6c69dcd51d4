#include "riskconv/norms.hpp"
#include "riskconv/random.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace riskconv;

namespace {

RandomVariable<double> fixture() {
    return {uniform_space<double>(4), {-4.0, -2.0, 1.0, 3.0}};
}

RandomVariable<double> random_variable(Rng& rng, std::size_t max_atoms = 12) {
    const std::size_t n = 2 + rng.index(max_atoms - 1);
    const auto sp = random_space(rng, n, rng.index(2) == 0);
    std::vector<double> vals(n);
    for (auto& v : vals) v = rng.uniform(-5.0, 5.0);
    return {sp, vals};
}

const std::vector<RiNorm>& norm_zoo() {
    static const std::vector<RiNorm> zoo = {
        RiNorm::lp(1.0),  RiNorm::lp(1.5),
        RiNorm::lp(2.0),  RiNorm::lp(4.0),
        RiNorm::linf(),   RiNorm::orlicz(OrliczFunction::exp_minus_one()),
        RiNorm::orlicz(OrliczFunction::square())};
    return zoo;
}

} // namespace

TEST_CASE("lp norms match closed forms on the fixture") {
    const auto x = fixture();
    CHECK(RiNorm::lp(1.0)(x) == 2.5);
    CHECK(RiNorm::lp(2.0)(x) == Catch::Approx(std::sqrt(7.5)).epsilon(1e-14));
    CHECK(RiNorm::linf()(x) == 4.0);

    const RandomVariable<double> y(uniform_space<double>(2), {3.0, -4.0});
    CHECK(RiNorm::lp(2.0)(y) == Catch::Approx(std::sqrt(12.5)).epsilon(1e-14));
    CHECK_THROWS_AS(RiNorm::lp(0.5), std::invalid_argument);
}

TEST_CASE("orlicz luxemburg norms match hand-solved values") {
    const auto exp_norm = RiNorm::orlicz(OrliczFunction::exp_minus_one());

    // indicator of mass 1/4: solve t*(e^{1/l}-1) = 1, so l = 1/log(1+1/t)
    CHECK(indicator_norm(exp_norm, 0.25) ==
          Catch::Approx(1.0 / std::log(5.0)).epsilon(1e-9));

    // two-point {3 w.p. 1/2, 0}: 0.5*(e^{3/l}-1) = 1 gives l = 3/log 3
    const RandomVariable<double> y(uniform_space<double>(2), {3.0, 0.0});
    CHECK(exp_norm(y) == Catch::Approx(3.0 / std::log(3.0)).epsilon(1e-9));

    // phi(t) = t^2 reproduces L2 exactly
    const auto square = RiNorm::orlicz(OrliczFunction::square());
    const auto x = fixture();
    CHECK(square(x) == Catch::Approx(RiNorm::lp(2.0)(x)).epsilon(1e-9));
}

TEST_CASE("norms depend only on the law") {
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng.index(9);
        const auto sp = uniform_space<double>(n);
        std::vector<double> vals(n);
        for (auto& v : vals) v = rng.uniform(-4.0, 4.0);
        std::vector<double> shuffled = vals;
        for (std::size_t i = n; i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
        const RandomVariable<double> x(sp, vals), y(sp, shuffled);
        for (const auto& nrm : norm_zoo())
            CHECK(nrm(x) == Catch::Approx(nrm(y)).margin(1e-12));
    }
}

TEST_CASE("norm axioms hold on random inputs") {
    Rng rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        const auto x = random_variable(rng);
        std::vector<double> other(x.size());
        for (auto& v : other) v = rng.uniform(-5.0, 5.0);
        const RandomVariable<double> y(x.space(), other);
        const double c = rng.uniform(-3.0, 3.0);
        for (const auto& nrm : norm_zoo()) {
            const double nx = nrm(x), ny = nrm(y);
            CHECK(nx >= 0.0);
            CHECK(nrm(x + y) <= nx + ny + 1e-9);              // triangle
            CHECK(nrm(c * x) == Catch::Approx(std::fabs(c) * nx).margin(1e-9));
            // solidity: |X| <= |Y| pointwise forces ||X|| <= ||Y||
            const auto shrunk = x.map([&](double v) { return 0.5 * v; });
            CHECK(nrm(shrunk) <= nx + 1e-9);
        }
        const auto zero = RandomVariable<double>::constant(x.space(), 0.0);
        for (const auto& nrm : norm_zoo()) CHECK(nrm(zero) == 0.0);
    }
}

TEST_CASE("lp associate norms are the conjugate exponent norms") {
    const auto x = fixture();
    CHECK(associate_norm(RiNorm::lp(1.0), x) == 4.0);  // conjugate is linf
    CHECK(associate_norm(RiNorm::linf(), x) == 2.5);   // conjugate is l1
    CHECK(associate_norm(RiNorm::lp(2.0), x) ==
          Catch::Approx(RiNorm::lp(2.0)(x)).epsilon(1e-12));
    const double q = 4.0 / 3.0;
    CHECK(associate_norm(RiNorm::lp(4.0), x) ==
          Catch::Approx(RiNorm::lp(q)(x)).epsilon(1e-12));
}

TEST_CASE("orlicz associate norm matches the hand value on indicators") {
    // for phi(t) = e^t - 1 the associate norm of an indicator of mass t is
    // t * log(1 + 1/t): pair the indicator with the extremal X on the ball
    const auto exp_norm = RiNorm::orlicz(OrliczFunction::exp_minus_one());
    const double got = associate_norm(exp_norm, indicator_variable(0.25));
    CHECK(got == Catch::Approx(0.25 * std::log(5.0)).epsilon(1e-6));
}

TEST_CASE("associate norm agrees with the direct ball search") {
    Rng rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        const auto x = random_variable(rng, 8);
        for (const auto& nrm : norm_zoo()) {
            const double formula = associate_norm(nrm, x);
            const double search = associate_norm_ball_search(nrm, x);
            // the search optimizes within the ball, so it can only fall short
            CHECK(search <= formula * (1.0 + 1e-6) + 1e-9);
            CHECK(search >= formula * (1.0 - 1e-3) - 1e-9);
        }
    }
}

TEST_CASE("holder inequality holds across the associate pairing") {
    Rng rng(47);
    for (int trial = 0; trial < 40; ++trial) {
        const auto x = random_variable(rng, 8);
        std::vector<double> other(x.size());
        for (auto& v : other) v = rng.uniform(-5.0, 5.0);
        const RandomVariable<double> y(x.space(), other);
        for (const auto& nrm : norm_zoo()) {
            const double lhs = std::fabs(expectation(x * y));
            CHECK(lhs <= nrm(x) * associate_norm(nrm, y) * (1.0 + 1e-6) + 1e-9);
        }
    }
}

TEST_CASE("fundamental function decays like t^{1/p}") {
    for (double p : {1.0, 1.5, 2.0, 4.0}) {
        const auto nrm = RiNorm::lp(p);
        for (double t : {0.5, 0.125, 1.0 / 64}) {
            const auto fv = fundamental_function(nrm, t);
            CHECK(fv.exact);
            CHECK(fv.value == Catch::Approx(std::pow(t, 1.0 / p)).epsilon(1e-12));
        }
    }
    CHECK(fundamental_function(RiNorm::linf(), 1.0 / 64).value == 1.0);
    // off-grid requests round to the nearest representable mass
    const auto fv = fundamental_function(RiNorm::lp(1.0), 0.33, 10);
    CHECK_FALSE(fv.exact);
    CHECK(fv.achieved_t == 0.3);
}

TEST_CASE("small-set decay probe separates p > 1 from p = 1") {
    const std::vector<double> grid = {0.5, 1.0 / 8, 1.0 / 64, 1.0 / 512, 1.0 / 4096};
    for (double p : {1.5, 2.0, 4.0}) {
        const auto rep = property_star_probe(RiNorm::lp(p), grid);
        CHECK(rep.holds);
        const double q = p / (p - 1.0);
        CHECK(rep.loglog_slope == Catch::Approx(1.0 / q).epsilon(1e-9));
        for (const auto& [t, v] : rep.samples)
            CHECK(v == Catch::Approx(std::pow(t, 1.0 / q)).epsilon(1e-9));
    }
    // L1 pairs with Linf, whose indicators all have norm one
    const auto rep1 = property_star_probe(RiNorm::lp(1.0), grid);
    CHECK_FALSE(rep1.holds);
    for (const auto& [t, v] : rep1.samples) CHECK(v == Catch::Approx(1.0).margin(1e-12));
    // the Orlicz exp norm pairs with a slowly vanishing associate: still holds
    const auto repo =
        property_star_probe(RiNorm::orlicz(OrliczFunction::exp_minus_one()), grid);
    CHECK(repo.holds);

    CHECK_THROWS_AS(property_star_probe(RiNorm::lp(2.0), {0.5}), std::invalid_argument);
    CHECK_THROWS_AS(property_star_probe(RiNorm::lp(2.0), {0.125, 0.5}),
                    std::invalid_argument);
}

TEST_CASE("conditional expectation contracts every norm in the zoo") {
    Rng rng(61);
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = random_variable(rng);
        const std::size_t n = x.size();
        std::vector<std::vector<std::size_t>> blocks(1 + rng.index(n));
        for (std::size_t i = 0; i < n; ++i) blocks[rng.index(blocks.size())].push_back(i);
        blocks.erase(std::remove_if(blocks.begin(), blocks.end(),
                                    [](const auto& b) { return b.empty(); }),
                     blocks.end());
        const Partition pi(n, blocks);
        for (const auto& nrm : norm_zoo()) {
            const auto rep = verify_contraction(nrm, x, pi);
            CHECK(rep.ok);
        }
    }
}
