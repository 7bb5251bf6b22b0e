#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "am/autodiff.hpp"
#include "am/numerics.hpp"
#include "am/rng.hpp"

namespace ad = am::ad;
using am::Tensor;

namespace {

// finite-difference check of a scalar graph builder against backward()
double check_builder(const std::function<ad::Var(const ad::Var&)>& build,
                     const Tensor& x, double eps = 1e-4) {
    auto f = [&](const Tensor& t) { return build(ad::constant(t))->value.item(); };
    auto analytic = [&](const Tensor& t) {
        auto leaf = ad::leaf(t);
        ad::backward(build(leaf));
        return leaf->grad;
    };
    return am::grad_check(f, analytic, x, eps);
}

}  // namespace

TEST_CASE("backward of sum is all ones") {
    auto x = ad::leaf(Tensor({4}, {1.0, -2.0, 3.0, 0.5}));
    ad::backward(ad::sum_all(x));
    for (int i = 0; i < 4; ++i) CHECK(x->grad[i] == 1.0);
}

TEST_CASE("backward of half squared norm is x") {
    auto x = ad::leaf(Tensor({3}, {1.5, -0.25, 2.0}));
    auto zero = ad::constant(Tensor::zeros({3}));
    ad::backward(ad::scale(ad::sumsq_diff(x, zero), 0.5));
    for (int i = 0; i < 3; ++i) CHECK(x->grad[i] == doctest::Approx(x->value[i]));
}

TEST_CASE("backward rejects non-scalar root") {
    auto x = ad::leaf(Tensor({2, 2}));
    CHECK_THROWS_AS(ad::backward(ad::mul(x, x)), std::invalid_argument);
}

TEST_CASE("logsumexp of Wx matches finite differences") {
    am::Rng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor w = Tensor::randn({6, 4}, rng, 0.5);
        Tensor x = Tensor::randn({4, 1}, rng, 0.5);
        auto build = [&](const ad::Var& xv) {
            auto scores = ad::matmul(ad::constant(w), xv);        // [6,1]
            auto row = ad::reshape(scores, {1, 6});
            return ad::reshape(ad::logsumexp_rows(row), {});
        };
        CHECK(check_builder(build, x) < 1e-5);
    }
}

TEST_CASE("every primitive passes randomized gradient checks") {
    am::Rng rng(99);

    struct Primitive {
        const char* name;
        std::function<double(am::Rng&)> run;  // returns max rel error
    };

    auto scalarize = [](const ad::Var& v) { return ad::mean_all(v); };

    std::vector<Primitive> prims;
    prims.push_back({"matmul", [&](am::Rng& r) {
        Tensor a = Tensor::randn({3, 4}, r);
        Tensor b = Tensor::randn({4, 2}, r);
        // check both arguments through one packed input
        auto build = [&](const ad::Var& av) {
            return scalarize(ad::matmul(av, ad::constant(b)));
        };
        return check_builder(build, a);
    }});
    prims.push_back({"matmul_rhs", [&](am::Rng& r) {
        Tensor a = Tensor::randn({3, 4}, r);
        Tensor b = Tensor::randn({4, 2}, r);
        auto build = [&](const ad::Var& bv) {
            return scalarize(ad::matmul(ad::constant(a), bv));
        };
        return check_builder(build, b);
    }});
    prims.push_back({"add_mul", [&](am::Rng& r) {
        Tensor a = Tensor::randn({2, 5}, r);
        Tensor b = Tensor::randn({2, 5}, r);
        auto build = [&](const ad::Var& av) {
            return scalarize(ad::mul(ad::add(av, ad::constant(b)), av));
        };
        return check_builder(build, a);
    }});
    prims.push_back({"gelu", [&](am::Rng& r) {
        Tensor a = Tensor::randn({4, 3}, r, 2.0);
        auto build = [&](const ad::Var& av) { return scalarize(ad::gelu(av)); };
        return check_builder(build, a);
    }});
    prims.push_back({"softmax_rows", [&](am::Rng& r) {
        Tensor a = Tensor::randn({3, 6}, r, 2.0);
        Tensor w = Tensor::randn({3, 6}, r);
        auto build = [&](const ad::Var& av) {
            return scalarize(ad::mul(ad::softmax_rows(av), ad::constant(w)));
        };
        return check_builder(build, a);
    }});
    prims.push_back({"layer_norm_rows", [&](am::Rng& r) {
        Tensor a = Tensor::randn({3, 8}, r);
        Tensor g = Tensor::randn({8}, r);
        Tensor b = Tensor::randn({8}, r);
        Tensor w = Tensor::randn({3, 8}, r);
        auto build = [&](const ad::Var& av) {
            return scalarize(ad::mul(
                ad::layer_norm_rows(av, ad::constant(g), ad::constant(b), 1e-5),
                ad::constant(w)));
        };
        return check_builder(build, a);
    }});
    prims.push_back({"layer_norm_params", [&](am::Rng& r) {
        Tensor a = Tensor::randn({3, 5}, r);
        Tensor g = Tensor::randn({5}, r);
        auto build = [&](const ad::Var& gv) {
            return scalarize(ad::layer_norm_rows(ad::constant(a), gv,
                                                 ad::constant(Tensor::zeros({5})), 1e-5));
        };
        return check_builder(build, g);
    }});
    prims.push_back({"logsumexp_rows", [&](am::Rng& r) {
        Tensor a = Tensor::randn({4, 5}, r, 3.0);
        auto build = [&](const ad::Var& av) {
            return scalarize(ad::logsumexp_rows(av));
        };
        return check_builder(build, a);
    }});
    prims.push_back({"slice_concat", [&](am::Rng& r) {
        Tensor a = Tensor::randn({4, 6}, r);
        Tensor w = Tensor::randn({8, 3}, r);
        auto build = [&](const ad::Var& av) {
            auto left = ad::slice_cols(av, 0, 3);
            auto right = ad::slice_cols(av, 3, 3);
            auto stacked = ad::concat_rows(ad::slice_rows(left, 0, 4), right);
            return scalarize(ad::mul(stacked, ad::constant(w)));
        };
        return check_builder(build, a);
    }});
    prims.push_back({"sumsq_diff", [&](am::Rng& r) {
        Tensor a = Tensor::randn({3, 3}, r);
        Tensor b = Tensor::randn({3, 3}, r);
        auto build = [&](const ad::Var& av) {
            return ad::sumsq_diff(av, ad::constant(b));
        };
        return check_builder(build, a);
    }});
    prims.push_back({"pairwise_sqdist", [&](am::Rng& r) {
        Tensor x = Tensor::randn({4, 3}, r);
        Tensor m = Tensor::randn({2, 3}, r);
        Tensor w = Tensor::randn({4, 2}, r);
        auto build = [&](const ad::Var& mv) {
            return scalarize(ad::mul(ad::pairwise_sqdist(ad::constant(x), mv),
                                     ad::constant(w)));
        };
        return check_builder(build, m);
    }});
    prims.push_back({"gather_add_rowvec", [&](am::Rng& r) {
        Tensor t = Tensor::randn({5, 4}, r);
        Tensor v = Tensor::randn({4}, r);
        auto build = [&](const ad::Var& tv) {
            auto g = ad::gather_rows(tv, {0, 2, 2, 4});
            return scalarize(ad::add_rowvec(g, ad::constant(v)));
        };
        return check_builder(build, t);
    }});
    prims.push_back({"exp_log_subcol", [&](am::Rng& r) {
        Tensor a = Tensor::randn({2, 4}, r, 0.5);
        auto build = [&](const ad::Var& av) {
            auto logq = ad::sub_colvec(av, ad::logsumexp_rows(av));
            return scalarize(ad::mul(ad::exp_(logq), logq));
        };
        return check_builder(build, a);
    }});
    prims.push_back({"prefix_attention", [&](am::Rng& r) {
        const std::int64_t rows = 4, width = 8;
        Tensor q = Tensor::randn({rows, width}, r);
        Tensor kpre = Tensor::randn({6, width}, r);
        Tensor vpre = Tensor::randn({6, width}, r);
        std::vector<ad::AttnSpan> spans{{0, 2}, {0, 3}, {3, 0}, {3, 3}};
        Tensor w = Tensor::randn({rows, width}, r);
        auto build = [&](const ad::Var& qv) {
            auto k = ad::scale(qv, 0.5);
            auto v = ad::scale(qv, -1.0);
            auto out = ad::prefix_attention(qv, k, v, ad::constant(kpre),
                                            ad::constant(vpre), spans, 2);
            return scalarize(ad::mul(out, ad::constant(w)));
        };
        return check_builder(build, q);
    }});
    prims.push_back({"prefix_attention_cache", [&](am::Rng& r) {
        const std::int64_t rows = 3, width = 8;
        Tensor q = Tensor::randn({rows, width}, r);
        Tensor k = Tensor::randn({rows, width}, r);
        Tensor v = Tensor::randn({rows, width}, r);
        Tensor pre = Tensor::randn({5, width}, r);
        std::vector<ad::AttnSpan> spans{{0, 4}, {1, 2}, {0, 5}};
        Tensor w = Tensor::randn({rows, width}, r);
        auto build = [&](const ad::Var& prev) {
            auto out = ad::prefix_attention(ad::constant(q), ad::constant(k),
                                            ad::constant(v), prev, ad::scale(prev, 2.0),
                                            spans, 4);
            return scalarize(ad::mul(out, ad::constant(w)));
        };
        return check_builder(build, pre);
    }});

    for (const auto& prim : prims) {
        CAPTURE(prim.name);
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) worst = std::max(worst, prim.run(rng));
        CHECK_MESSAGE(worst < 1e-5, prim.name, " worst error = ", worst);
    }
}

TEST_CASE("causal self-attention via spans matches a naive evaluation") {
    am::Rng rng(5);
    const std::int64_t l = 5, width = 6;
    const int heads = 2;
    Tensor q = Tensor::randn({l, width}, rng);
    Tensor k = Tensor::randn({l, width}, rng);
    Tensor v = Tensor::randn({l, width}, rng);
    std::vector<ad::AttnSpan> spans;
    for (std::int64_t i = 0; i < l; ++i) spans.push_back({0, i});
    auto kv = ad::constant(k);
    auto vv = ad::constant(v);
    auto out = ad::prefix_attention(ad::constant(q), kv, vv, kv, vv, spans, heads);

    const std::int64_t dh = width / heads;
    for (std::int64_t i = 0; i < l; ++i)
        for (int h = 0; h < heads; ++h) {
            std::vector<double> logits(i + 1);
            for (std::int64_t j = 0; j <= i; ++j) {
                double s = 0.0;
                for (std::int64_t p = 0; p < dh; ++p)
                    s += q.at(i, h * dh + p) * k.at(j, h * dh + p);
                logits[j] = s / std::sqrt(static_cast<double>(dh));
            }
            const auto w = am::softmax(logits);
            for (std::int64_t p = 0; p < dh; ++p) {
                double expect = 0.0;
                for (std::int64_t j = 0; j <= i; ++j) expect += w[j] * v.at(j, h * dh + p);
                CHECK(out->value.at(i, h * dh + p) == doctest::Approx(expect).epsilon(1e-12));
            }
        }
}
