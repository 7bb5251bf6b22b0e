#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "am/autodiff.hpp"
#include "am/tensor.hpp"

namespace am {

using VecD = std::vector<double>;

// Abstract energy landscape: scalar energy and its gradient at a point.
// Implementations are immutable after construction and safe to share
// read-only across threads.
class EnergyModel {
public:
    virtual ~EnergyModel() = default;
    virtual std::int64_t dim() const = 0;
    virtual double energy(std::span<const double> x) const = 0;
    virtual VecD grad(std::span<const double> x) const = 0;
};

// Stored patterns {x_n}, an N x D matrix with optional integer labels.
class PatternSet {
public:
    PatternSet(Tensor patterns, std::optional<std::vector<int>> labels = std::nullopt);

    std::int64_t count() const { return patterns_.dim(0); }
    std::int64_t dim() const { return patterns_.dim(1); }
    const Tensor& patterns() const { return patterns_; }
    const std::optional<std::vector<int>>& labels() const { return labels_; }
    std::span<const double> row(std::int64_t n) const;

    // Largest L2 norm over patterns (symbol M in the capacity analysis).
    double largest_norm() const;

private:
    Tensor patterns_;
    std::optional<std::vector<int>> labels_;
};

// Learnable memories {mu_k} with inverse temperature beta and optional
// mixing weights. Without explicit mixing every memory carries weight 1,
// which is the verbatim log-sum-exp energy; explicit weights must sum to 1.
class ClamModel {
public:
    ClamModel(Tensor memories, double beta,
              std::optional<VecD> mixing = std::nullopt);

    std::int64_t count() const { return memories_.dim(0); }
    std::int64_t dim() const { return memories_.dim(1); }
    const Tensor& memories() const { return memories_; }
    double beta() const { return beta_; }
    const std::optional<VecD>& mixing() const { return mixing_; }
    // log of the weight used inside the energy sum for memory k
    double log_weight(std::int64_t k) const;

private:
    Tensor memories_;
    double beta_;
    std::optional<VecD> mixing_;
};

enum class KdeKernel { Gaussian, Uniform, Epanechnikov };

// Kernel density estimator memory. The Gaussian path uses length scale
// sigma through log-sum-exp and cannot underflow; the general kernels can
// evaluate to zero probability, reported through `underflow`.
class KdeModel {
public:
    KdeModel(PatternSet patterns, double sigma,
             KdeKernel kernel = KdeKernel::Gaussian, double bandwidth = 1.0);

    const PatternSet& patterns() const { return patterns_; }
    double sigma() const { return sigma_; }
    KdeKernel kernel() const { return kernel_; }
    double bandwidth() const { return bandwidth_; }

private:
    PatternSet patterns_;
    double sigma_;
    KdeKernel kernel_;
    double bandwidth_;
};

struct KdeEnergyResult {
    double value = 0.0;
    bool underflow = false;  // every kernel evaluated to zero probability
};

// --- energies and analytic gradients ---

double hopfield_energy(const PatternSet& p, std::span<const double> x);
VecD hopfield_grad(const PatternSet& p, std::span<const double> x);

double mchn_energy(const PatternSet& p, double beta, std::span<const double> x);
VecD mchn_grad(const PatternSet& p, double beta, std::span<const double> x);

double clam_energy(const ClamModel& m, std::span<const double> x);
VecD clam_grad(const ClamModel& m, std::span<const double> x);
// Softmax-weighted attraction toward the memories; equals -grad/2.
VecD clam_dynamics_rhs(const ClamModel& m, std::span<const double> x);

double kde_energy(const KdeModel& k, std::span<const double> x);
KdeEnergyResult kde_energy_checked(const KdeModel& k, std::span<const double> x);
VecD kde_grad(const KdeModel& k, std::span<const double> x);

// --- autodiff builders (same formulas on the tape; analytic versions are
// the hot path, these back the gradient cross-checks) ---
ad::Var hopfield_energy_graph(const PatternSet& p, const ad::Var& x_row);
ad::Var mchn_energy_graph(const PatternSet& p, double beta, const ad::Var& x_row);
ad::Var clam_energy_graph(const ClamModel& m, const ad::Var& x_row);
ad::Var kde_energy_graph(const KdeModel& k, const ad::Var& x_row);

// --- EnergyModel adapters ---
class HopfieldEnergy final : public EnergyModel {
public:
    explicit HopfieldEnergy(PatternSet p) : p_(std::move(p)) {}
    std::int64_t dim() const override { return p_.dim(); }
    double energy(std::span<const double> x) const override { return hopfield_energy(p_, x); }
    VecD grad(std::span<const double> x) const override { return hopfield_grad(p_, x); }

private:
    PatternSet p_;
};

class MchnEnergy final : public EnergyModel {
public:
    MchnEnergy(PatternSet p, double beta);
    std::int64_t dim() const override { return p_.dim(); }
    double energy(std::span<const double> x) const override { return mchn_energy(p_, beta_, x); }
    VecD grad(std::span<const double> x) const override { return mchn_grad(p_, beta_, x); }
    const PatternSet& patterns() const { return p_; }
    double beta() const { return beta_; }

private:
    PatternSet p_;
    double beta_;
};

class ClamEnergy final : public EnergyModel {
public:
    explicit ClamEnergy(ClamModel m) : m_(std::move(m)) {}
    std::int64_t dim() const override { return m_.dim(); }
    double energy(std::span<const double> x) const override { return clam_energy(m_, x); }
    VecD grad(std::span<const double> x) const override { return clam_grad(m_, x); }
    const ClamModel& model() const { return m_; }

private:
    ClamModel m_;
};

class KdeEnergy final : public EnergyModel {
public:
    explicit KdeEnergy(KdeModel k) : k_(std::move(k)) {}
    std::int64_t dim() const override { return k_.patterns().dim(); }
    double energy(std::span<const double> x) const override { return kde_energy(k_, x); }
    VecD grad(std::span<const double> x) const override { return kde_grad(k_, x); }
    const KdeModel& model() const { return k_; }

private:
    KdeModel k_;
};

}  // namespace am
