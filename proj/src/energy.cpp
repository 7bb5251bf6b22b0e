#include "am/energy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "am/numerics.hpp"

namespace am {

namespace {

void check_dim(std::int64_t expect, std::size_t got, const char* op) {
    if (static_cast<std::size_t>(expect) != got)
        throw std::invalid_argument(std::string(op) + ": point dimension mismatch");
}

double dot(std::span<const double> a, const double* b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sqdist(std::span<const double> a, const double* b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

PatternSet::PatternSet(Tensor patterns, std::optional<std::vector<int>> labels)
    : patterns_(std::move(patterns)), labels_(std::move(labels)) {
    if (patterns_.rank() != 2 || patterns_.dim(0) < 1 || patterns_.dim(1) < 1)
        throw std::invalid_argument("PatternSet: need an N x D matrix with N,D >= 1");
    if (!patterns_.all_finite())
        throw std::invalid_argument("PatternSet: non-finite entries");
    if (labels_ && static_cast<std::int64_t>(labels_->size()) != patterns_.dim(0))
        throw std::invalid_argument("PatternSet: label count mismatch");
}

std::span<const double> PatternSet::row(std::int64_t n) const {
    return {patterns_.data() + n * dim(), static_cast<std::size_t>(dim())};
}

double PatternSet::largest_norm() const {
    double best = 0.0;
    for (std::int64_t n = 0; n < count(); ++n) {
        double s = 0.0;
        for (std::int64_t j = 0; j < dim(); ++j) s += patterns_.at(n, j) * patterns_.at(n, j);
        best = std::max(best, s);
    }
    return std::sqrt(best);
}

ClamModel::ClamModel(Tensor memories, double beta, std::optional<VecD> mixing)
    : memories_(std::move(memories)), beta_(beta), mixing_(std::move(mixing)) {
    if (memories_.rank() != 2 || memories_.dim(0) < 1 || memories_.dim(1) < 1)
        throw std::invalid_argument("ClamModel: need a K x D matrix with K,D >= 1");
    if (!memories_.all_finite())
        throw std::invalid_argument("ClamModel: non-finite memories");
    if (!(beta_ > 0.0)) throw std::invalid_argument("ClamModel: beta must be > 0");
    if (mixing_) {
        if (static_cast<std::int64_t>(mixing_->size()) != memories_.dim(0))
            throw std::invalid_argument("ClamModel: mixing length mismatch");
        double s = 0.0;
        for (double w : *mixing_) {
            if (!(w > 0.0)) throw std::invalid_argument("ClamModel: mixing weights must be > 0");
            s += w;
        }
        if (std::abs(s - 1.0) > 1e-9)
            throw std::invalid_argument("ClamModel: mixing must sum to 1");
    }
}

double ClamModel::log_weight(std::int64_t k) const {
    return mixing_ ? std::log((*mixing_)[k]) : 0.0;
}

KdeModel::KdeModel(PatternSet patterns, double sigma, KdeKernel kernel, double bandwidth)
    : patterns_(std::move(patterns)), sigma_(sigma), kernel_(kernel), bandwidth_(bandwidth) {
    if (!(sigma_ > 0.0)) throw std::invalid_argument("KdeModel: sigma must be > 0");
    if (!(bandwidth_ > 0.0)) throw std::invalid_argument("KdeModel: bandwidth must be > 0");
}

MchnEnergy::MchnEnergy(PatternSet p, double beta) : p_(std::move(p)), beta_(beta) {
    if (!(beta_ > 0.0)) throw std::invalid_argument("MchnEnergy: beta must be > 0");
}

// ---------------------------------------------------------------- Hopfield

double hopfield_energy(const PatternSet& p, std::span<const double> x) {
    check_dim(p.dim(), x.size(), "hopfield_energy");
    double s = 0.0;
    for (std::int64_t n = 0; n < p.count(); ++n) {
        const double o = dot(x, p.patterns().data() + n * p.dim());
        s += o * o;
    }
    return -0.5 * s / static_cast<double>(p.count());
}

VecD hopfield_grad(const PatternSet& p, std::span<const double> x) {
    check_dim(p.dim(), x.size(), "hopfield_grad");
    VecD g(x.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(p.count());
    for (std::int64_t n = 0; n < p.count(); ++n) {
        const double* row = p.patterns().data() + n * p.dim();
        const double o = dot(x, row);
        for (std::size_t j = 0; j < x.size(); ++j) g[j] -= inv_n * o * row[j];
    }
    return g;
}

// -------------------------------------------------------------------- MCHN

double mchn_energy(const PatternSet& p, double beta, std::span<const double> x) {
    if (!(beta > 0.0)) throw std::invalid_argument("mchn_energy: beta must be > 0");
    check_dim(p.dim(), x.size(), "mchn_energy");
    VecD scores(p.count());
    for (std::int64_t n = 0; n < p.count(); ++n)
        scores[n] = beta * dot(x, p.patterns().data() + n * p.dim());
    double xx = 0.0;
    for (double v : x) xx += v * v;
    return -logsumexp(scores) / beta + 0.5 * xx;
}

VecD mchn_grad(const PatternSet& p, double beta, std::span<const double> x) {
    if (!(beta > 0.0)) throw std::invalid_argument("mchn_grad: beta must be > 0");
    check_dim(p.dim(), x.size(), "mchn_grad");
    VecD scores(p.count());
    for (std::int64_t n = 0; n < p.count(); ++n)
        scores[n] = beta * dot(x, p.patterns().data() + n * p.dim());
    const VecD w = softmax(scores);
    VecD g(x.begin(), x.end());
    for (std::int64_t n = 0; n < p.count(); ++n) {
        const double* row = p.patterns().data() + n * p.dim();
        for (std::size_t j = 0; j < x.size(); ++j) g[j] -= w[n] * row[j];
    }
    return g;
}

// -------------------------------------------------------------------- ClAM

namespace {
VecD clam_soft_weights(const ClamModel& m, std::span<const double> x) {
    VecD logits(m.count());
    for (std::int64_t k = 0; k < m.count(); ++k)
        logits[k] = m.log_weight(k) -
                    m.beta() * sqdist(x, m.memories().data() + k * m.dim());
    return softmax(logits);
}
}  // namespace

double clam_energy(const ClamModel& m, std::span<const double> x) {
    check_dim(m.dim(), x.size(), "clam_energy");
    VecD logits(m.count());
    for (std::int64_t k = 0; k < m.count(); ++k)
        logits[k] = m.log_weight(k) -
                    m.beta() * sqdist(x, m.memories().data() + k * m.dim());
    return -logsumexp(logits) / m.beta();
}

VecD clam_grad(const ClamModel& m, std::span<const double> x) {
    check_dim(m.dim(), x.size(), "clam_grad");
    const VecD w = clam_soft_weights(m, x);
    VecD g(x.size(), 0.0);
    for (std::int64_t k = 0; k < m.count(); ++k) {
        const double* mu = m.memories().data() + k * m.dim();
        for (std::size_t j = 0; j < x.size(); ++j) g[j] += 2.0 * w[k] * (x[j] - mu[j]);
    }
    return g;
}

VecD clam_dynamics_rhs(const ClamModel& m, std::span<const double> x) {
    check_dim(m.dim(), x.size(), "clam_dynamics_rhs");
    const VecD w = clam_soft_weights(m, x);
    VecD v(x.size(), 0.0);
    for (std::int64_t k = 0; k < m.count(); ++k) {
        const double* mu = m.memories().data() + k * m.dim();
        for (std::size_t j = 0; j < x.size(); ++j) v[j] += w[k] * (mu[j] - x[j]);
    }
    return v;
}

// --------------------------------------------------------------------- KDE

namespace {
double kernel_value(KdeKernel k, double sq_u) {
    switch (k) {
        case KdeKernel::Gaussian: return std::exp(-0.5 * sq_u);
        case KdeKernel::Uniform: return sq_u <= 1.0 ? 1.0 : 0.0;
        case KdeKernel::Epanechnikov: return sq_u <= 1.0 ? 1.0 - sq_u : 0.0;
    }
    return 0.0;
}
}  // namespace

KdeEnergyResult kde_energy_checked(const KdeModel& k, std::span<const double> x) {
    const PatternSet& p = k.patterns();
    check_dim(p.dim(), x.size(), "kde_energy");
    if (k.kernel() == KdeKernel::Gaussian) {
        const double inv2s2 = 1.0 / (2.0 * k.sigma() * k.sigma());
        VecD logits(p.count());
        for (std::int64_t n = 0; n < p.count(); ++n)
            logits[n] = -inv2s2 * sqdist(x, p.patterns().data() + n * p.dim());
        return {-logsumexp(logits), false};
    }
    const double h2 = k.bandwidth() * k.bandwidth();
    double s = 0.0;
    for (std::int64_t n = 0; n < p.count(); ++n)
        s += kernel_value(k.kernel(), sqdist(x, p.patterns().data() + n * p.dim()) / h2);
    if (s <= 0.0) return {std::numeric_limits<double>::infinity(), true};
    return {-std::log(s), false};
}

double kde_energy(const KdeModel& k, std::span<const double> x) {
    return kde_energy_checked(k, x).value;
}

VecD kde_grad(const KdeModel& k, std::span<const double> x) {
    const PatternSet& p = k.patterns();
    check_dim(p.dim(), x.size(), "kde_grad");
    if (k.kernel() == KdeKernel::Gaussian) {
        const double inv2s2 = 1.0 / (2.0 * k.sigma() * k.sigma());
        VecD logits(p.count());
        for (std::int64_t n = 0; n < p.count(); ++n)
            logits[n] = -inv2s2 * sqdist(x, p.patterns().data() + n * p.dim());
        const VecD w = softmax(logits);
        VecD g(x.size(), 0.0);
        const double inv_s2 = 1.0 / (k.sigma() * k.sigma());
        for (std::int64_t n = 0; n < p.count(); ++n) {
            const double* row = p.patterns().data() + n * p.dim();
            for (std::size_t j = 0; j < x.size(); ++j)
                g[j] += inv_s2 * w[n] * (x[j] - row[j]);
        }
        return g;
    }
    // General kernels are piecewise; uniform has zero gradient on its support.
    const double h2 = k.bandwidth() * k.bandwidth();
    double s = 0.0;
    VecD num(x.size(), 0.0);
    for (std::int64_t n = 0; n < p.count(); ++n) {
        const double* row = p.patterns().data() + n * p.dim();
        const double sq_u = sqdist(x, row) / h2;
        s += kernel_value(k.kernel(), sq_u);
        if (k.kernel() == KdeKernel::Epanechnikov && sq_u <= 1.0) {
            for (std::size_t j = 0; j < x.size(); ++j)
                num[j] += -2.0 * (x[j] - row[j]) / h2;
        }
    }
    VecD g(x.size(), 0.0);
    if (s > 0.0)
        for (std::size_t j = 0; j < x.size(); ++j) g[j] = -num[j] / s;
    return g;
}

// --------------------------------------------------------- graph builders

namespace {
ad::Var pattern_scores_graph(const Tensor& patterns, const ad::Var& x_row) {
    // [1,D] x [D,N] -> [1,N] inner products with every pattern
    return ad::matmul(x_row, ad::constant(transpose(patterns)));
}
}  // namespace

ad::Var hopfield_energy_graph(const PatternSet& p, const ad::Var& x_row) {
    auto s = pattern_scores_graph(p.patterns(), x_row);
    return ad::scale(ad::sum_all(ad::mul(s, s)), -0.5 / static_cast<double>(p.count()));
}

ad::Var mchn_energy_graph(const PatternSet& p, double beta, const ad::Var& x_row) {
    auto s = pattern_scores_graph(p.patterns(), x_row);
    auto lse = ad::reshape(ad::logsumexp_rows(ad::scale(s, beta)), {});
    auto zero = ad::constant(Tensor::zeros(x_row->value.shape()));
    return ad::add(ad::scale(lse, -1.0 / beta), ad::scale(ad::sumsq_diff(x_row, zero), 0.5));
}

ad::Var clam_energy_graph(const ClamModel& m, const ad::Var& x_row) {
    auto d = ad::pairwise_sqdist(x_row, ad::constant(m.memories()));
    Tensor logw({m.count()});
    for (std::int64_t k = 0; k < m.count(); ++k) logw[k] = m.log_weight(k);
    auto logits = ad::add_rowvec(ad::scale(d, -m.beta()), ad::constant(std::move(logw)));
    return ad::scale(ad::reshape(ad::logsumexp_rows(logits), {}), -1.0 / m.beta());
}

ad::Var kde_energy_graph(const KdeModel& k, const ad::Var& x_row) {
    if (k.kernel() != KdeKernel::Gaussian)
        throw std::invalid_argument("kde_energy_graph: Gaussian kernel only");
    auto d = ad::pairwise_sqdist(x_row, ad::constant(k.patterns().patterns()));
    const double c = -1.0 / (2.0 * k.sigma() * k.sigma());
    return ad::scale(ad::reshape(ad::logsumexp_rows(ad::scale(d, c)), {}), -1.0);
}

}  // namespace am
