#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "am/capacity.hpp"
#include "am/dynamics.hpp"
#include "am/energy.hpp"
#include "am/rng.hpp"

using am::PatternSet;
using am::Tensor;
using am::VecD;

TEST_CASE("separation examples") {
    PatternSet two(Tensor({2, 1}, {0.0, 2.0}));
    const VecD d2 = am::separation(two);
    CHECK(d2[0] == doctest::Approx(2.0));
    CHECK(d2[1] == doctest::Approx(2.0));

    // three collinear equally spaced points at gap g
    const double g = 0.75;
    PatternSet three(Tensor({3, 1}, {0.0, g, 2 * g}));
    for (double v : am::separation(three)) CHECK(v == doctest::Approx(g * g / 2));

    // brute-force oracle on a random set
    am::Rng rng(2);
    Tensor pats = Tensor::randn({7, 3}, rng);
    PatternSet p(pats);
    const VecD delta = am::separation(p);
    for (int i = 0; i < 7; ++i) {
        double best = 1e300;
        for (int j = 0; j < 7; ++j) {
            if (i == j) continue;
            double sq = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double diff = pats.at(i, c) - pats.at(j, c);
                sq += diff * diff;
            }
            best = std::min(best, 0.5 * sq);
        }
        CHECK(delta[i] == doctest::Approx(best).epsilon(1e-14));
    }

    CHECK_THROWS_AS(am::separation(PatternSet(Tensor({1, 2}, {0.0, 0.0}))),
                    std::invalid_argument);
}

TEST_CASE("radius of convergence formula") {
    CHECK(am::radius_of_convergence(1.0, 4, 2.0) == doctest::Approx(0.125));
    // sigma doubled: radius quadruples
    CHECK(am::radius_of_convergence(2.0, 4, 2.0) ==
          doctest::Approx(4.0 * am::radius_of_convergence(1.0, 4, 2.0)));
    // capacity-saturating N at D = 3
    const double n = std::pow(2.0, 2.0 * (3 - 1));
    CHECK(am::radius_of_convergence(1.0, static_cast<std::int64_t>(n), 2.0 * std::sqrt(2.0)) ==
          doctest::Approx(1.0 / (16.0 * 2.0 * std::sqrt(2.0))));
    CHECK_THROWS_AS(am::radius_of_convergence(0.0, 4, 1.0), std::invalid_argument);
}

TEST_CASE("well separated checks") {
    // two antipodal radius-10 patterns, sigma = 1: delta = 200, bound ~ log(800)
    PatternSet anti(Tensor({2, 1}, {10.0, -10.0}));
    const auto w = am::well_separated(anti, 1.0);
    CHECK(w.well_separated);
    CHECK(w.margin > 0.0);

    // duplicated pattern: delta = 0 fails any positive bound
    PatternSet dup(Tensor({2, 2}, {1.0, 0.0, 1.0, 0.0}));
    CHECK(!am::well_separated(dup, 1.0).well_separated);

    // boundary case: margin exactly 0 counts as separated
    // craft two patterns whose separation equals the bound
    const double sigma = 1.0;
    // For N=2, bound b = sigma^2 + sigma^2 log(2*(1)*2*M^2) with M the norm.
    // Solve for gap via placement on a line through the origin: x = (m, -m).
    // Delta = 2 m^2, bound = 1 + log(4 m^2). Pick m so 2m^2 = 1 + log(4m^2).
    double m = 1.0;
    for (int it = 0; it < 60; ++it)
        m = std::sqrt((1.0 + std::log(4.0 * m * m)) / 2.0);
    PatternSet edge(Tensor({2, 1}, {m, -m}));
    const auto we = am::well_separated(edge, sigma);
    CHECK(std::abs(we.margin) < 1e-9);
    CHECK(we.well_separated);
}

TEST_CASE("capacity bound") {
    CHECK(am::capacity_bound(2).value == 4);
    CHECK(am::capacity_bound(4).value == 64);
    CHECK(!am::capacity_bound(4).saturated);
    std::uint64_t expect = 4;
    for (std::int64_t d = 2; d <= 16; ++d) {
        CHECK(am::capacity_bound(d).value == expect);
        expect *= 4;
    }
    // beyond 64 bits: saturates with a flag instead of wrapping
    CHECK(am::capacity_bound(33).saturated);
    CHECK(am::capacity_bound(33).value == UINT64_MAX);
    CHECK(!am::capacity_bound(32).saturated);
    CHECK_THROWS_AS(am::capacity_bound(1), std::invalid_argument);
}

TEST_CASE("sphere sample") {
    am::Rng rng(5);
    PatternSet p = am::sphere_sample(4, 2.5, 50, rng);
    for (std::int64_t i = 0; i < 50; ++i) {
        double nrm = 0.0;
        for (int j = 0; j < 4; ++j) nrm += p.row(i)[j] * p.row(i)[j];
        CHECK(std::abs(std::sqrt(nrm) - 2.5) < 1e-12);
    }

    // D = 1 collapses to two poles
    am::Rng rng1(6);
    PatternSet p1 = am::sphere_sample(1, 3.0, 20, rng1);
    for (std::int64_t i = 0; i < 20; ++i)
        CHECK(std::abs(std::abs(p1.row(i)[0]) - 3.0) < 1e-12);

    // mean concentrates near zero
    am::Rng rng2(7);
    PatternSet p2 = am::sphere_sample(3, 1.0, 100000, rng2);
    VecD mean(3, 0.0);
    for (std::int64_t i = 0; i < p2.count(); ++i)
        for (int j = 0; j < 3; ++j) mean[j] += p2.row(i)[j];
    double nrm = 0.0;
    for (double v : mean) nrm += (v / p2.count()) * (v / p2.count());
    CHECK(std::sqrt(nrm) < 0.02);
}

TEST_CASE("check_storage: single pattern is stored with tiny retrieval error") {
    PatternSet p(Tensor({1, 3}, {1.0, -2.0, 0.5}));
    am::Rng rng(8);
    const auto rep = am::check_storage(p, 1.0, 10, 1e9, rng);
    CHECK(rep.stored[0]);
    CHECK(rep.retrieval_error[0] < 1e-8);
    CHECK(rep.stored_fraction == 1.0);
}

TEST_CASE("check_storage: merged basins are reported not-stored") {
    // two patterns closer than the separation bound at sigma = 1
    PatternSet p(Tensor({2, 1}, {0.25, -0.25}));
    CHECK(!am::well_separated(p, 1.0).well_separated);
    am::Rng rng(9);
    const auto rep = am::check_storage(p, 1.0, 10, 1e9, rng);
    CHECK((!rep.stored[0] || !rep.stored[1]));
}

TEST_CASE("check_storage: well-separated on-sphere set is fully stored") {
    am::Rng rng(10);
    PatternSet p = am::sphere_spread(6, 10.0, 16, 400, rng);
    const auto sep = am::well_separated(p, 1.0);
    REQUIRE(sep.well_separated);
    const auto rep = am::check_storage(p, 1.0, 20, 1e9, rng);
    for (std::int64_t i = 0; i < p.count(); ++i) {
        CAPTURE(i);
        CAPTURE(rep.not_stored_reason[i]);
        CHECK(rep.stored[i]);
    }
    CHECK(rep.stored_fraction == 1.0);
}

TEST_CASE("retrieval experiment basics and trends") {
    // zero perturbation: queries start at the patterns and stay
    const auto zero = am::retrieval_experiment(4, 16, 2.0 * std::sqrt(3.0), 1.0, 3, 0.0, 1);
    CHECK(zero.ratio_initial == 0.0);
    CHECK(zero.ratio_pairwise < 1e-6);

    // Fig. 5 style trends, averaged over seeds
    auto mean_ratio = [](std::int64_t d, std::int64_t n) {
        double s = 0.0;
        const int seeds = 5;
        for (int seed = 0; seed < seeds; ++seed) {
            const double m = 2.0 * std::sqrt(static_cast<double>(d - 1));
            s += am::retrieval_experiment(d, n, m, 1.0, 5, 0.25, 100 + seed).ratio_pairwise;
        }
        return s / seeds;
    };
    const double r4 = mean_ratio(4, 64);
    const double r16 = mean_ratio(16, 64);
    CHECK(r16 < r4);  // more dimensions retrieve better

    const double n16 = mean_ratio(4, 16);
    const double n256 = mean_ratio(4, 256);
    CHECK(n256 > n16);  // more patterns retrieve worse
}

TEST_CASE("sphere_spread improves the minimum gap") {
    am::Rng rng_a(11), rng_b(11);
    PatternSet random = am::sphere_sample(5, 4.0, 12, rng_a);
    PatternSet spread = am::sphere_spread(5, 4.0, 12, 300, rng_b);
    auto min_sep = [](const PatternSet& p) {
        double best = 1e300;
        for (double v : am::separation(p)) best = std::min(best, v);
        return best;
    };
    CHECK(min_sep(spread) >= min_sep(random));
}
