#pragma once

#include <span>
#include <vector>

#include "am/tensor.hpp"

namespace am {

using VecD = std::vector<double>;

// gamma (x - mean) / sqrt(var + eps) + delta over the feature dimension.
VecD layer_norm(std::span<const double> x, std::span<const double> gamma,
                std::span<const double> delta, double eps);

// RMS variant: mean subtraction disabled, gamma x / sqrt(mean(x^2) + eps).
VecD rms_norm(std::span<const double> x, std::span<const double> gamma, double eps);

// V^T Softmax(K q): convex combination of value rows with softmax weights.
VecD self_attention(std::span<const double> q, const Tensor& keys, const Tensor& values);

// kappa_i = ||k_i . gamma||, m_i = (k_i . gamma)/kappa_i, pi_i = exp(k_i . delta).
// A zero scaled key degenerates: kappa_i = 0 with a flagged canonical
// direction (the identity still holds, the vMF reading does not).
struct VmfDecomposition {
    VecD kappa;
    Tensor directions;             // N x D unit rows (canonical e_1 when degenerate)
    VecD log_mixing;               // log pi_i = k_i . delta, kept in log domain
    std::vector<bool> degenerate;
};

VmfDecomposition vmf_decompose(const Tensor& keys, std::span<const double> gamma,
                               std::span<const double> delta);

// Checks k_i . q == kappa_i m_i . q_tilde + log pi_i with q = gamma q_tilde + delta,
// exact algebra up to round-off. norm_warning is set when ||q_tilde|| strays
// from 1 by more than 0.1 (the clustering interpretation weakens; the
// identity itself remains exact).
struct IdentityCheck {
    double max_abs_error = 0.0;
    bool norm_warning = false;
};

IdentityCheck verify_identity(const Tensor& keys, std::span<const double> gamma,
                              std::span<const double> delta,
                              std::span<const double> q_tilde);

}  // namespace am
