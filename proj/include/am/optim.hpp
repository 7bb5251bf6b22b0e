#pragma once

#include <vector>

#include "am/tensor.hpp"

namespace am {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 0.0;  // 0 disables global-norm gradient clipping
};

// Adam with bias correction. One moment pair per parameter tensor.
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    // params[i] is updated in place using grads[i]; shapes must match and
    // stay fixed across calls.
    void step(std::vector<Tensor*> params, const std::vector<Tensor>& grads);

    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    long t_ = 0;
};

}  // namespace am
