#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "am/energy.hpp"
#include "am/numerics.hpp"
#include "am/rng.hpp"

using am::ClamModel;
using am::KdeModel;
using am::PatternSet;
using am::Tensor;
using am::VecD;

namespace {

double autodiff_grad_entry(const std::function<am::ad::Var(const am::ad::Var&)>& build,
                           const VecD& x, std::size_t j) {
    Tensor row({1, static_cast<std::int64_t>(x.size())}, VecD(x));
    auto leaf = am::ad::leaf(std::move(row));
    am::ad::backward(build(leaf));
    return leaf->grad[j];
}

}  // namespace

TEST_CASE("hopfield energy examples") {
    // single unit pattern e1, x = e1
    PatternSet p(Tensor({1, 2}, {1.0, 0.0}));
    CHECK(am::hopfield_energy(p, VecD{1.0, 0.0}) == doctest::Approx(-0.5));

    // orthogonal to all patterns
    CHECK(am::hopfield_energy(p, VecD{0.0, 1.0}) == doctest::Approx(0.0));

    // {(1,0),(0,1)}, x=(1,1): -1/2 (1,1)^T (I/2) (1,1) = -0.5
    PatternSet p2(Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}));
    CHECK(am::hopfield_energy(p2, VecD{1.0, 1.0}) == doctest::Approx(-0.5));

    CHECK_THROWS_AS(am::hopfield_energy(p, VecD{1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("mchn energy examples") {
    PatternSet p(Tensor({1, 2}, {1.0, 0.0}));
    CHECK(am::mchn_energy(p, 1.0, VecD{1.0, 0.0}) == doctest::Approx(-0.5));
    CHECK(am::mchn_energy(p, 1.0, VecD{0.0, 0.0}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(am::mchn_energy(p, 0.0, VecD{0.0, 0.0}), std::invalid_argument);

    // naive-summation oracle on a random instance
    am::Rng rng(2);
    Tensor pats = Tensor::randn({3, 2}, rng);
    PatternSet p3(pats);
    const double beta = 1.7;
    const VecD x{0.3, -0.8};
    double naive = 0.0;
    for (int n = 0; n < 3; ++n)
        naive += std::exp(beta * (x[0] * pats.at(n, 0) + x[1] * pats.at(n, 1)));
    const double expect = -std::log(naive) / beta + 0.5 * (x[0] * x[0] + x[1] * x[1]);
    CHECK(am::mchn_energy(p3, beta, x) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("clam energy examples") {
    // K=1, x = mu: exp(0) with unit weight
    ClamModel m1(Tensor({1, 2}, {0.4, -0.2}), 2.0);
    CHECK(am::clam_energy(m1, VecD{0.4, -0.2}) == doctest::Approx(0.0));

    // two symmetric memories, x at the origin, beta = 1
    ClamModel m2(Tensor({2, 2}, {1.0, 0.0, -1.0, 0.0}), 1.0);
    CHECK(am::clam_energy(m2, VecD{0.0, 0.0}) ==
          doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-12));

    // large beta approaches the nearest-memory distance
    am::Rng rng(4);
    Tensor mem = Tensor::randn({5, 3}, rng, 2.0);
    const double beta = 1e3;
    ClamModel hard(mem, beta);
    const VecD x{0.25, -0.5, 1.0};
    double best = 1e300;
    for (int k = 0; k < 5; ++k) {
        double d = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double diff = mem.at(k, j) - x[j];
            d += diff * diff;
        }
        best = std::min(best, d);
    }
    CHECK(std::abs(am::clam_energy(hard, x) - best) <
          std::log(5.0) / beta + 1e-9);
}

TEST_CASE("clam dynamics rhs") {
    ClamModel m1(Tensor({1, 2}, {0.7, 0.1}), 3.0);
    const VecD v1 = am::clam_dynamics_rhs(m1, VecD{0.7, 0.1});
    CHECK(v1[0] == doctest::Approx(0.0));
    CHECK(v1[1] == doctest::Approx(0.0));

    ClamModel m2(Tensor({2, 2}, {1.0, 0.0, -1.0, 0.0}), 1.5);
    const VecD v2 = am::clam_dynamics_rhs(m2, VecD{0.0, 0.0});
    CHECK(std::abs(v2[0]) < 1e-15);
    CHECK(std::abs(v2[1]) < 1e-15);

    // equals -1/2 of the autodiff gradient of the energy
    am::Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor mem = Tensor::randn({4, 3}, rng);
        ClamModel m(mem, 0.8);
        VecD x(3);
        for (auto& v : x) v = rng.normal();
        const VecD rhs = am::clam_dynamics_rhs(m, x);
        for (std::size_t j = 0; j < 3; ++j) {
            const double g = autodiff_grad_entry(
                [&](const am::ad::Var& xv) { return am::clam_energy_graph(m, xv); }, x, j);
            CHECK(rhs[j] == doctest::Approx(-0.5 * g).epsilon(1e-10));
        }
    }
}

TEST_CASE("kde energy examples") {
    PatternSet p1(Tensor({1, 2}, {0.3, 0.4}));
    KdeModel k1(p1, 0.7);
    CHECK(am::kde_energy(k1, VecD{0.3, 0.4}) == doctest::Approx(0.0));

    // two patterns at +-2 in 1-D with sigma = 0.5: minima near the patterns,
    // local maximum near the midpoint
    PatternSet p2(Tensor({2, 1}, {-2.0, 2.0}));
    KdeModel k2(p2, 0.5);
    const int grid = 801;
    double best_left = 1e300, best_left_x = 0.0;
    double best_right = 1e300, best_right_x = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double x = -4.0 + 8.0 * i / (grid - 1);
        const double e = am::kde_energy(k2, VecD{x});
        if (x < 0 && e < best_left) {
            best_left = e;
            best_left_x = x;
        }
        if (x > 0 && e < best_right) {
            best_right = e;
            best_right_x = x;
        }
    }
    CHECK(std::abs(best_left_x + 2.0) < 0.05);
    CHECK(std::abs(best_right_x - 2.0) < 0.05);
    const double mid = am::kde_energy(k2, VecD{0.0});
    CHECK(mid > best_left);
    CHECK(mid > best_right);
    // midpoint is a stationary local maximum between the basins
    CHECK(mid > am::kde_energy(k2, VecD{0.3}));

    // probability underflow with a compact kernel: +inf sentinel, flagged
    KdeModel boxy(p2, 1.0, am::KdeKernel::Uniform, 0.5);
    const auto res = am::kde_energy_checked(boxy, VecD{10.0});
    CHECK(res.underflow);
    CHECK(std::isinf(res.value));
    CHECK(!std::isnan(res.value));
}

TEST_CASE("on-sphere kde matches mchn gradients") {
    am::Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t n = 2 + rng.uniform_int(6);
        const std::int64_t d = 2 + rng.uniform_int(3);
        const double m = 1.0 + rng.uniform();
        Tensor pats({n, d});
        for (std::int64_t i = 0; i < n; ++i) {
            double nrm = 0.0;
            for (std::int64_t j = 0; j < d; ++j) {
                pats.at(i, j) = rng.normal();
                nrm += pats.at(i, j) * pats.at(i, j);
            }
            nrm = std::sqrt(nrm);
            for (std::int64_t j = 0; j < d; ++j) pats.at(i, j) *= m / nrm;
        }
        PatternSet p(pats);
        const double sigma = 0.5 + rng.uniform();
        KdeModel kde(p, sigma);
        VecD x(d);
        for (auto& v : x) v = rng.normal();

        const VecD gk = am::kde_grad(kde, x);
        const VecD gm = am::mchn_grad(p, 1.0 / (sigma * sigma), x);
        for (std::int64_t j = 0; j < d; ++j)
            CHECK(sigma * sigma * gk[j] == doctest::Approx(gm[j]).epsilon(1e-10));
    }
}

TEST_CASE("analytic gradients match autodiff twins") {
    am::Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const std::int64_t d = 2 + rng.uniform_int(3);
        const std::int64_t n = 1 + rng.uniform_int(5);
        Tensor pats = Tensor::randn({n, d}, rng);
        PatternSet p(pats);
        VecD x(d);
        for (auto& v : x) v = rng.normal();
        const double beta = 0.5 + rng.uniform();
        const double sigma = 0.5 + rng.uniform();

        const VecD gh = am::hopfield_grad(p, x);
        const VecD gm = am::mchn_grad(p, beta, x);
        ClamModel cm(pats, beta);
        const VecD gc = am::clam_grad(cm, x);
        KdeModel kd(p, sigma);
        const VecD gk = am::kde_grad(kd, x);

        for (std::size_t j = 0; j < x.size(); ++j) {
            const double ah = autodiff_grad_entry(
                [&](const am::ad::Var& xv) { return am::hopfield_energy_graph(p, xv); }, x, j);
            const double amn = autodiff_grad_entry(
                [&](const am::ad::Var& xv) { return am::mchn_energy_graph(p, beta, xv); }, x, j);
            const double ac = autodiff_grad_entry(
                [&](const am::ad::Var& xv) { return am::clam_energy_graph(cm, xv); }, x, j);
            const double ak = autodiff_grad_entry(
                [&](const am::ad::Var& xv) { return am::kde_energy_graph(kd, xv); }, x, j);
            CHECK(gh[j] == doctest::Approx(ah).epsilon(1e-10));
            CHECK(gm[j] == doctest::Approx(amn).epsilon(1e-10));
            CHECK(gc[j] == doctest::Approx(ac).epsilon(1e-10));
            CHECK(gk[j] == doctest::Approx(ak).epsilon(1e-10));
        }
    }
}

TEST_CASE("permutation invariance of pattern order") {
    am::Rng rng(44);
    Tensor pats = Tensor::randn({4, 2}, rng);
    Tensor perm({4, 2});
    const int order[4] = {2, 0, 3, 1};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 2; ++j) perm.at(i, j) = pats.at(order[i], j);

    PatternSet a(pats), b(perm);
    ClamModel ca(pats, 1.3), cb(perm, 1.3);
    const VecD x{0.2, -0.7};
    CHECK(am::mchn_energy(a, 1.3, x) == doctest::Approx(am::mchn_energy(b, 1.3, x)));
    CHECK(am::kde_energy(KdeModel(a, 0.9), x) ==
          doctest::Approx(am::kde_energy(KdeModel(b, 0.9), x)));
    CHECK(am::clam_energy(ca, x) == doctest::Approx(am::clam_energy(cb, x)));
}

TEST_CASE("mchn logsumexp lower bound") {
    am::Rng rng(45);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t n = 2 + rng.uniform_int(5);
        Tensor pats = Tensor::randn({n, 3}, rng);
        PatternSet p(pats);
        const double beta = 0.5 + rng.uniform();
        VecD x(3);
        for (auto& v : x) v = rng.normal();
        double max_score = -1e300, xx = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < 3; ++j) s += x[j] * pats.at(i, j);
            max_score = std::max(max_score, s);
        }
        for (double v : x) xx += v * v;
        const double lower =
            -max_score - std::log(static_cast<double>(n)) / beta + 0.5 * xx;
        CHECK(am::mchn_energy(p, beta, x) >= lower - 1e-9);
    }
}

TEST_CASE("construction rejects degenerate models") {
    CHECK_THROWS_AS(PatternSet(Tensor({0, 2})), std::invalid_argument);
    CHECK_THROWS_AS(ClamModel(Tensor({1, 2}, {0.0, 0.0}), -1.0), std::invalid_argument);
    CHECK_THROWS_AS(ClamModel(Tensor({2, 1}, {0.0, 1.0}), 1.0, am::VecD{0.3, 0.3}),
                    std::invalid_argument);
    CHECK_THROWS_AS(KdeModel(PatternSet(Tensor({1, 1}, {0.0})), 0.0),
                    std::invalid_argument);
}
