#include "am/attnnorm.hpp"

#include <cmath>
#include <stdexcept>

#include "am/numerics.hpp"

namespace am {

VecD layer_norm(std::span<const double> x, std::span<const double> gamma,
                std::span<const double> delta, double eps) {
    if (x.size() != gamma.size() || x.size() != delta.size())
        throw std::invalid_argument("layer_norm: dimension mismatch");
    if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be > 0");
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    VecD out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = gamma[i] * (x[i] - mean) * inv + delta[i];
    return out;
}

VecD rms_norm(std::span<const double> x, std::span<const double> gamma, double eps) {
    if (x.size() != gamma.size())
        throw std::invalid_argument("rms_norm: dimension mismatch");
    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(ms + eps);
    VecD out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = gamma[i] * x[i] * inv;
    return out;
}

VecD self_attention(std::span<const double> q, const Tensor& keys, const Tensor& values) {
    const std::int64_t n = keys.dim(0), d = keys.dim(1);
    if (static_cast<std::int64_t>(q.size()) != d)
        throw std::invalid_argument("self_attention: query dimension mismatch");
    if (values.dim(0) != n)
        throw std::invalid_argument("self_attention: key/value count mismatch");
    VecD scores(n);
    for (std::int64_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::int64_t j = 0; j < d; ++j) s += keys.at(i, j) * q[j];
        scores[i] = s;
    }
    const VecD w = softmax(scores);
    VecD out(values.dim(1), 0.0);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < values.dim(1); ++j)
            out[j] += w[i] * values.at(i, j);
    return out;
}

VmfDecomposition vmf_decompose(const Tensor& keys, std::span<const double> gamma,
                               std::span<const double> delta) {
    const std::int64_t n = keys.dim(0), d = keys.dim(1);
    if (static_cast<std::int64_t>(gamma.size()) != d ||
        static_cast<std::int64_t>(delta.size()) != d)
        throw std::invalid_argument("vmf_decompose: dimension mismatch");
    if (n < 1) throw std::invalid_argument("vmf_decompose: need at least one key");
    VmfDecomposition out;
    out.kappa.resize(n);
    out.directions = Tensor({n, d});
    out.log_mixing.resize(n);
    out.degenerate.assign(n, false);
    for (std::int64_t i = 0; i < n; ++i) {
        double sq = 0.0, kd = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double s = keys.at(i, j) * gamma[j];
            sq += s * s;
            kd += keys.at(i, j) * delta[j];
        }
        out.kappa[i] = std::sqrt(sq);
        out.log_mixing[i] = kd;
        if (out.kappa[i] > 0.0) {
            for (std::int64_t j = 0; j < d; ++j)
                out.directions.at(i, j) = keys.at(i, j) * gamma[j] / out.kappa[i];
        } else {
            out.degenerate[i] = true;
            out.directions.at(i, 0) = 1.0;  // canonical direction, kappa = 0
        }
    }
    return out;
}

IdentityCheck verify_identity(const Tensor& keys, std::span<const double> gamma,
                              std::span<const double> delta,
                              std::span<const double> q_tilde) {
    const std::int64_t n = keys.dim(0), d = keys.dim(1);
    if (static_cast<std::int64_t>(q_tilde.size()) != d)
        throw std::invalid_argument("verify_identity: query dimension mismatch");
    const VmfDecomposition dec = vmf_decompose(keys, gamma, delta);

    // q is constructed exactly as the decomposition assumes
    VecD q(d);
    for (std::int64_t j = 0; j < d; ++j) q[j] = gamma[j] * q_tilde[j] + delta[j];

    IdentityCheck res;
    for (std::int64_t i = 0; i < n; ++i) {
        double lhs = 0.0;
        for (std::int64_t j = 0; j < d; ++j) lhs += keys.at(i, j) * q[j];
        double md = 0.0;
        for (std::int64_t j = 0; j < d; ++j) md += dec.directions.at(i, j) * q_tilde[j];
        const double rhs = dec.kappa[i] * md + dec.log_mixing[i];
        res.max_abs_error = std::max(res.max_abs_error, std::abs(lhs - rhs));
    }
    double nrm = 0.0;
    for (double v : q_tilde) nrm += v * v;
    nrm = std::sqrt(nrm);
    res.norm_warning = std::abs(nrm - 1.0) > 0.1;
    return res;
}

}  // namespace am
