#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "am/numerics.hpp"
#include "am/rng.hpp"

using am::logsumexp;
using am::softmax;

TEST_CASE("logsumexp basics") {
    CHECK(logsumexp(std::vector<double>{0.0}) == doctest::Approx(0.0).epsilon(1e-15));

    const double c = 2.75;
    CHECK(logsumexp(std::vector<double>{c, c, c, c}) ==
          doctest::Approx(c + std::log(4.0)).epsilon(1e-15));

    // naive evaluation overflows; shift-by-max must not
    CHECK(logsumexp(std::vector<double>{1000.0, 1000.0}) ==
          doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("logsumexp errors") {
    CHECK_THROWS_AS(logsumexp(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(logsumexp(std::vector<double>{1.0, std::nan("")}),
                    std::invalid_argument);
}

TEST_CASE("logsumexp bounds property") {
    am::Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.uniform_int(8);
        std::vector<double> v(n);
        double mx = -1e300;
        for (auto& x : v) {
            x = rng.uniform(-50.0, 50.0);
            mx = std::max(mx, x);
        }
        const double lse = logsumexp(v);
        CHECK(lse >= mx);
        CHECK(lse <= mx + std::log(static_cast<double>(n)) + 1e-12);
    }
}

TEST_CASE("softmax basics") {
    const auto s = softmax(std::vector<double>{0.0, 0.0});
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-15));

    const auto one = softmax(std::vector<double>{3.7});
    CHECK(one[0] == 1.0);

    // exactly representable offset: bit-identical outputs
    const auto a = softmax(std::vector<double>{1.0, 2.0, 3.0});
    const auto b = softmax(std::vector<double>{101.0, 102.0, 103.0});
    for (int i = 0; i < 3; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("softmax sums to one") {
    am::Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(1 + rng.uniform_int(12));
        for (auto& x : v) x = rng.uniform(-300.0, 300.0);
        const auto s = softmax(v);
        const double total = std::accumulate(s.begin(), s.end(), 0.0);
        CHECK(std::abs(total - 1.0) < 1e-12);
        for (double p : s) CHECK(p > 0.0);
    }
    CHECK_THROWS_AS(softmax(std::vector<double>{std::nan("")}), std::invalid_argument);
}

TEST_CASE("grad_check agreement and failure reporting") {
    // constant function: both sides zero
    auto f_const = [](const am::Tensor&) { return 4.0; };
    auto g_const = [](const am::Tensor& x) { return am::Tensor::zeros(x.shape()); };
    CHECK(am::grad_check(f_const, g_const, am::Tensor({3}, {1.0, 2.0, 3.0}), 1e-4) == 0.0);

    // quadratic: gradient x
    auto f_quad = [](const am::Tensor& x) {
        double s = 0.0;
        for (double v : x.vec()) s += 0.5 * v * v;
        return s;
    };
    auto g_quad = [](const am::Tensor& x) { return x; };
    am::Rng rng(3);
    am::Tensor x = am::Tensor::randn({5}, rng);
    CHECK(am::grad_check(f_quad, g_quad, x, 1e-4) < 1e-8);

    // non-finite probe reports failure instead of crashing
    auto f_bad = [](const am::Tensor& t) { return std::log(t[0]); };
    auto g_bad = [](const am::Tensor& t) {
        am::Tensor g(t.shape());
        g[0] = 1.0 / t[0];
        return g;
    };
    const double err = am::grad_check(f_bad, g_bad, am::Tensor({1}, {-1e-5}), 1e-4);
    CHECK(std::isinf(err));
}

TEST_CASE("rng reproducibility") {
    am::Rng a(42), b(42);
    for (int i = 0; i < 1000000; ++i) {
        if (a.next_u64() != b.next_u64()) {
            FAIL("streams diverged at draw ", i);
        }
    }

    am::Rng c(42), d(43);
    bool differs = false;
    for (int i = 0; i < 16; ++i) differs |= (c.next_u64() != d.next_u64());
    CHECK(differs);
}

TEST_CASE("rng child streams are independent of draws taken") {
    am::Rng a(5);
    a.uniform();
    a.uniform();
    am::Rng b(5);
    CHECK(a.child(3).next_u64() == b.child(3).next_u64());
    CHECK(a.child(3).next_u64() != b.child(4).next_u64());
}

TEST_CASE("rng normal moments") {
    am::Rng rng(123);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}
