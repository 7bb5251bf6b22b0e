#include "am/latent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "am/numerics.hpp"

namespace am {

namespace {

double sqdist(std::span<const double> a, const double* b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// log-softmax: finite for any finite logits, unlike log(softmax(v)).
VecD log_softmax(std::span<const double> v) {
    const double lse = logsumexp(v);
    VecD out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
    return out;
}

}  // namespace

MixtureModel::MixtureModel(Tensor memories, double beta, VecD mixing)
    : memories_(std::move(memories)), beta_(beta), mixing_(std::move(mixing)) {
    if (memories_.rank() != 2 || memories_.dim(0) < 1 || memories_.dim(1) < 1)
        throw std::invalid_argument("MixtureModel: need a K x D matrix");
    if (!(beta_ > 0.0)) throw std::invalid_argument("MixtureModel: beta must be > 0");
    if (static_cast<std::int64_t>(mixing_.size()) != memories_.dim(0))
        throw std::invalid_argument("MixtureModel: mixing length mismatch");
    double s = 0.0;
    for (double w : mixing_) {
        if (!(w > 0.0)) throw std::invalid_argument("MixtureModel: mixing must be > 0");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-9)
        throw std::invalid_argument("MixtureModel: mixing must sum to 1");
}

MixtureModel MixtureModel::uniform(Tensor memories, double beta) {
    const auto k = memories.dim(0);
    return MixtureModel(std::move(memories), beta, VecD(k, 1.0 / static_cast<double>(k)));
}

LatentState::LatentState(VecD logits) : v(std::move(logits)) {
    if (v.empty()) throw std::invalid_argument("LatentState: empty logits");
    q = softmax(v);
}

CrpState::CrpState(double alpha, double discount, Tensor memories, VecD counts,
                   double beta, double rho)
    : alpha_(alpha), discount_(discount),
      k_plus_(memories.dim(0)), dim_(memories.dim(1)),
      memories_(std::move(memories)), counts_(std::move(counts)),
      beta_(beta), rho_(rho) {
    if (!(alpha_ > 0.0)) throw std::invalid_argument("CrpState: alpha must be > 0");
    if (discount_ < 0.0 || discount_ >= 1.0)
        throw std::invalid_argument("CrpState: discount must be in [0,1)");
    if (!(beta_ > 0.0) || !(rho_ > 0.0))
        throw std::invalid_argument("CrpState: beta and rho must be > 0");
    if (memories_.rank() != 2)
        throw std::invalid_argument("CrpState: memories must be K x D");
    if (static_cast<std::int64_t>(counts_.size()) != k_plus_)
        throw std::invalid_argument("CrpState: counts length mismatch");
    for (double c : counts_)
        if (!(c > discount_))
            throw std::invalid_argument("CrpState: every count must exceed the discount");
    if (!(alpha_ + static_cast<double>(k_plus_) * discount_ > 0.0))
        throw std::invalid_argument("CrpState: alpha + K+ * d must be > 0");
}

CrpState::CrpState(double alpha, double discount, std::int64_t dim, double beta, double rho)
    : CrpState(alpha, discount, Tensor({0, dim}), VecD{}, beta, rho) {}

// ------------------------------------------------------------ mixture/ELBO

double mixture_log_joint(const MixtureModel& m, std::span<const double> x, std::int64_t k) {
    if (k < 0 || k >= m.count())
        throw std::invalid_argument("mixture_log_joint: cluster index out of range");
    if (static_cast<std::int64_t>(x.size()) != m.dim())
        throw std::invalid_argument("mixture_log_joint: dimension mismatch");
    return std::log(m.mixing()[k]) - m.beta() * sqdist(x, m.memories().data() + k * m.dim());
}

VecD mixture_log_joints(const MixtureModel& m, std::span<const double> x) {
    if (static_cast<std::int64_t>(x.size()) != m.dim())
        throw std::invalid_argument("mixture_log_joints: dimension mismatch");
    VecD lj(m.count());
    for (std::int64_t k = 0; k < m.count(); ++k)
        lj[k] = std::log(m.mixing()[k]) -
                m.beta() * sqdist(x, m.memories().data() + k * m.dim());
    return lj;
}

VecD posterior(const MixtureModel& m, std::span<const double> x) {
    return softmax(mixture_log_joints(m, x));
}

double elbo_energy_core(std::span<const double> log_joints, const LatentState& s) {
    if (log_joints.size() != s.size())
        throw std::invalid_argument("elbo_energy: dimension mismatch");
    const VecD logq = log_softmax(s.v);
    double e = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k)
        e += s.q[k] * (logq[k] - log_joints[k]);
    return e;
}

VecD elbo_logit_rhs_core(std::span<const double> log_joints, const LatentState& s) {
    if (log_joints.size() != s.size())
        throw std::invalid_argument("elbo_logit_rhs: dimension mismatch");
    const VecD logq = log_softmax(s.v);
    // b = log p(x,z) - log q - 1; rhs = (diag(q) - q q^T) b
    VecD b(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) b[k] = log_joints[k] - logq[k] - 1.0;
    double qb = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) qb += s.q[k] * b[k];
    VecD rhs(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) rhs[k] = s.q[k] * (b[k] - qb);
    return rhs;
}

double elbo_energy(const MixtureModel& m, std::span<const double> x, const LatentState& s) {
    return elbo_energy_core(mixture_log_joints(m, x), s);
}

VecD elbo_logit_rhs(const MixtureModel& m, std::span<const double> x, const LatentState& s) {
    return elbo_logit_rhs_core(mixture_log_joints(m, x), s);
}

ad::Var elbo_energy_graph(std::span<const double> log_joints, const ad::Var& v_row) {
    const auto k = static_cast<std::int64_t>(log_joints.size());
    if (v_row->value.numel() != k)
        throw std::invalid_argument("elbo_energy_graph: dimension mismatch");
    auto logq = ad::sub_colvec(v_row, ad::logsumexp_rows(v_row));  // [1,K]
    auto q = ad::exp_(logq);
    Tensor lj({1, k});
    for (std::int64_t i = 0; i < k; ++i) lj[i] = log_joints[i];
    auto term = ad::mul(q, ad::sub(logq, ad::constant(std::move(lj))));
    return ad::sum_all(term);
}

// -------------------------------------------------------------------- CRP

double crp_prior(const std::vector<int>& assignments, double alpha, double discount, int k) {
    if (!(alpha > 0.0)) throw std::invalid_argument("crp_prior: alpha must be > 0");
    if (discount < 0.0 || discount >= 1.0)
        throw std::invalid_argument("crp_prior: discount must be in [0,1)");
    if (k < 1) throw std::invalid_argument("crp_prior: k must be >= 1");
    int k_plus = 0;
    std::vector<double> counts;
    for (int z : assignments) {
        if (z < 1 || z > k_plus + 1)
            throw std::invalid_argument("crp_prior: labels must be contiguous from 1");
        if (z == k_plus + 1) {
            ++k_plus;
            counts.push_back(0.0);
        }
        counts[z - 1] += 1.0;
    }
    const double n_minus_1 = static_cast<double>(assignments.size());
    const double denom = n_minus_1 + alpha;
    if (k <= k_plus) return (counts[k - 1] - discount) / denom;
    if (k == k_plus + 1) return (alpha + discount * static_cast<double>(k_plus)) / denom;
    return 0.0;
}

VecD crp_log_joints(const CrpState& c, std::span<const double> x) {
    if (static_cast<std::int64_t>(x.size()) != c.dim())
        throw std::invalid_argument("crp_log_joints: dimension mismatch");
    VecD lj(c.k_plus() + 1);
    for (std::int64_t k = 0; k < c.k_plus(); ++k)
        lj[k] = std::log(c.counts()[k] - c.discount()) -
                c.beta() * sqdist(x, c.memories().data() + k * c.dim());
    double xx = 0.0;
    for (double v : x) xx += v * v;
    const double prec = 1.0 / (1.0 / c.beta() + 1.0 / c.rho());
    lj[c.k_plus()] =
        std::log(c.alpha() + static_cast<double>(c.k_plus()) * c.discount()) - prec * xx;
    return lj;
}

VecD crp_posterior(const CrpState& c, std::span<const double> x) {
    return softmax(crp_log_joints(c, x));
}

double crp_clam_energy(const CrpState& c, std::span<const double> x) {
    return -logsumexp(crp_log_joints(c, x)) / c.beta();
}

VecD crp_clam_grad(const CrpState& c, std::span<const double> x) {
    const VecD w = softmax(crp_log_joints(c, x));
    VecD g(x.size(), 0.0);
    for (std::int64_t k = 0; k < c.k_plus(); ++k) {
        const double* mu = c.memories().data() + k * c.dim();
        for (std::size_t j = 0; j < x.size(); ++j)
            g[j] += 2.0 * w[k] * (x[j] - mu[j]);
    }
    // new-cluster exponent is -prec * ||x||^2 while the log is scaled by 1/beta
    const double prec = 1.0 / (1.0 / c.beta() + 1.0 / c.rho());
    for (std::size_t j = 0; j < x.size(); ++j)
        g[j] += w[c.k_plus()] * 2.0 * (prec / c.beta()) * x[j];
    return g;
}

ad::Var crp_clam_energy_graph(const CrpState& c, const ad::Var& x_row) {
    const std::int64_t kp = c.k_plus();
    ad::Var logits;
    if (kp > 0) {
        auto d = ad::pairwise_sqdist(x_row, ad::constant(c.memories()));
        Tensor logw({kp});
        for (std::int64_t k = 0; k < kp; ++k)
            logw[k] = std::log(c.counts()[k] - c.discount());
        logits = ad::add_rowvec(ad::scale(d, -c.beta()), ad::constant(std::move(logw)));
    }
    const double prec = 1.0 / (1.0 / c.beta() + 1.0 / c.rho());
    auto zero = ad::constant(Tensor::zeros(x_row->value.shape()));
    auto new_logit = ad::add(
        ad::reshape(ad::scale(ad::sumsq_diff(x_row, zero), -prec), {1, 1}),
        ad::constant(Tensor({1, 1}, {std::log(c.alpha() + static_cast<double>(kp) * c.discount())})));
    logits = kp > 0 ? ad::concat_cols(logits, new_logit) : new_logit;
    return ad::scale(ad::reshape(ad::logsumexp_rows(logits), {}), -1.0 / c.beta());
}

double crp_elbo_energy(const CrpState& c, std::span<const double> x, const LatentState& s) {
    if (static_cast<std::int64_t>(s.size()) != c.k_plus() + 1)
        throw std::invalid_argument("crp_elbo_energy: latent state must have K+ + 1 components");
    return elbo_energy_core(crp_log_joints(c, x), s);
}

VecD crp_elbo_logit_rhs(const CrpState& c, std::span<const double> x, const LatentState& s) {
    if (static_cast<std::int64_t>(s.size()) != c.k_plus() + 1)
        throw std::invalid_argument("crp_elbo_logit_rhs: latent state must have K+ + 1 components");
    return elbo_logit_rhs_core(crp_log_joints(c, x), s);
}

CrpState crp_create_memory(const CrpState& c, std::span<const double> x) {
    if (static_cast<std::int64_t>(x.size()) != c.dim())
        throw std::invalid_argument("crp_create_memory: dimension mismatch");
    // conjugate Gaussian posterior mean with prior N(0, 2/rho I),
    // likelihood covariance 2/beta I
    const double shrink = (1.0 / c.rho()) / (1.0 / c.rho() + 1.0 / c.beta());
    Tensor mem({c.k_plus() + 1, c.dim()});
    std::copy_n(c.memories().data(), c.k_plus() * c.dim(), mem.data());
    for (std::int64_t j = 0; j < c.dim(); ++j)
        mem[c.k_plus() * c.dim() + j] = shrink * x[j];
    VecD counts = c.counts();
    counts.push_back(1.0);
    return CrpState(c.alpha(), c.discount(), std::move(mem), std::move(counts),
                    c.beta(), c.rho());
}

}  // namespace am
