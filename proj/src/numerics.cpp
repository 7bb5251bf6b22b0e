#include "am/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace am {

double logsumexp(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("logsumexp: empty input");
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) {
        if (std::isnan(x)) throw std::invalid_argument("logsumexp: NaN input");
        mx = std::max(mx, x);
    }
    if (std::isinf(mx)) return mx;  // all -inf, or a +inf entry dominates
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

double logsumexp_weighted(std::span<const double> v, std::span<const double> log_w) {
    if (v.size() != log_w.size())
        throw std::invalid_argument("logsumexp_weighted: length mismatch");
    std::vector<double> shifted(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) shifted[i] = v[i] + log_w[i];
    return logsumexp(shifted);
}

std::vector<double> softmax(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("softmax: empty input");
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) {
        if (std::isnan(x)) throw std::invalid_argument("softmax: NaN input");
        mx = std::max(mx, x);
    }
    std::vector<double> out(v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        s += out[i];
    }
    for (auto& x : out) x /= s;
    return out;
}

double grad_check(const std::function<double(const Tensor&)>& f,
                  const std::function<Tensor(const Tensor&)>& analytic_grad,
                  const Tensor& x, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be > 0");
    const Tensor g = analytic_grad(x);
    if (!g.same_shape(x)) throw std::invalid_argument("grad_check: gradient shape mismatch");
    double worst = 0.0;
    Tensor probe = x;
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        const double xi = x[i];
        probe[i] = xi + eps;
        const double fp = f(probe);
        probe[i] = xi - eps;
        const double fm = f(probe);
        probe[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            return std::numeric_limits<double>::infinity();
        const double fd = (fp - fm) / (2.0 * eps);
        const double err = std::abs(g[i] - fd) / std::max(1.0, std::abs(g[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace am
