#pragma once

#include <functional>
#include <span>
#include <vector>

#include "am/tensor.hpp"

namespace am {

// log(sum_i exp(v_i)), shift-by-max so any finite input is overflow-free.
// Throws std::invalid_argument on empty input or NaN entries.
double logsumexp(std::span<const double> v);

// Weighted variant: log(sum_i w_i exp(v_i)) for w_i > 0.
double logsumexp_weighted(std::span<const double> v, std::span<const double> log_w);

// Softmax with the shift-by-max implementation, so softmax(v + c) is
// bit-identical to softmax(v) whenever v + c is computed exactly.
// Throws std::invalid_argument on NaN entries.
std::vector<double> softmax(std::span<const double> v);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// at perturbation eps. A non-finite function value at any probe is reported
// as a failed check (+infinity), never as a crash.
double grad_check(const std::function<double(const Tensor&)>& f,
                  const std::function<Tensor(const Tensor&)>& analytic_grad,
                  const Tensor& x, double eps);

}  // namespace am
