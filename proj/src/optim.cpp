#include "am/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace am {

void Adam::step(std::vector<Tensor*> params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size())
        throw std::invalid_argument("Adam::step: params/grads count mismatch");
    if (m_.empty()) {
        for (const auto* p : params) {
            m_.emplace_back(Tensor::zeros(p->shape()));
            v_.emplace_back(Tensor::zeros(p->shape()));
        }
    }
    if (m_.size() != params.size())
        throw std::invalid_argument("Adam::step: parameter count changed");

    double clip_scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads)
            for (double x : g.vec()) sq += x * x;
        const double norm = std::sqrt(sq);
        if (norm > cfg_.clip_norm) clip_scale = cfg_.clip_norm / norm;
    }

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        if (!p.same_shape(g)) throw std::invalid_argument("Adam::step: shape mismatch");
        for (std::int64_t j = 0; j < p.numel(); ++j) {
            const double gj = g[j] * clip_scale;
            m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * gj;
            v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * gj * gj;
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace am
