#pragma once

#include <optional>
#include <span>
#include <vector>

#include "am/autodiff.hpp"
#include "am/energy.hpp"
#include "am/tensor.hpp"

namespace am {

// Finite Gaussian mixture in the unnormalized-exponent convention:
// log p(x, z=k) = log pi_k - beta * ||mu_k - x||^2.
class MixtureModel {
public:
    MixtureModel(Tensor memories, double beta, VecD mixing);
    static MixtureModel uniform(Tensor memories, double beta);

    std::int64_t count() const { return memories_.dim(0); }
    std::int64_t dim() const { return memories_.dim(1); }
    const Tensor& memories() const { return memories_; }
    double beta() const { return beta_; }
    const VecD& mixing() const { return mixing_; }

private:
    Tensor memories_;
    double beta_;
    VecD mixing_;
};

// Point on the simplex through its logits; q = softmax(v) is invariant
// under v -> v + c.
struct LatentState {
    VecD v;
    VecD q;

    explicit LatentState(VecD logits);
    std::size_t size() const { return v.size(); }
};

// Chinese Restaurant Process associative memory state. Component order in
// all K+ + 1 vectors is: existing clusters 1..K+ first, then the
// new-cluster component last.
class CrpState {
public:
    CrpState(double alpha, double discount, Tensor memories, VecD counts,
             double beta, double rho);
    // empty state (no memories yet)
    CrpState(double alpha, double discount, std::int64_t dim, double beta, double rho);

    double alpha() const { return alpha_; }
    double discount() const { return discount_; }
    std::int64_t k_plus() const { return k_plus_; }
    std::int64_t dim() const { return dim_; }
    const Tensor& memories() const { return memories_; }
    const VecD& counts() const { return counts_; }
    double beta() const { return beta_; }
    double rho() const { return rho_; }

private:
    double alpha_, discount_;
    std::int64_t k_plus_, dim_;
    Tensor memories_;  // K+ x D (0 x D when empty)
    VecD counts_;
    double beta_, rho_;
};

// --- finite mixture / ELBO ---

// log p(x, z=k), 0-based k.
double mixture_log_joint(const MixtureModel& m, std::span<const double> x, std::int64_t k);
VecD mixture_log_joints(const MixtureModel& m, std::span<const double> x);
// p(z|x): softmax of the log-joints.
VecD posterior(const MixtureModel& m, std::span<const double> x);

// Generic ELBO machinery over an arbitrary log-joint vector.
double elbo_energy_core(std::span<const double> log_joints, const LatentState& s);
VecD elbo_logit_rhs_core(std::span<const double> log_joints, const LatentState& s);

double elbo_energy(const MixtureModel& m, std::span<const double> x, const LatentState& s);
VecD elbo_logit_rhs(const MixtureModel& m, std::span<const double> x, const LatentState& s);

// Autodiff twin of elbo_energy_core as a function of the logits.
ad::Var elbo_energy_graph(std::span<const double> log_joints, const ad::Var& v_row);

// --- CRP ---

// p(z_n = k | z_<n, alpha, d) with 1-based history labels and 1-based k.
// k > K+ + 1 returns 0 per the piecewise definition.
double crp_prior(const std::vector<int>& assignments, double alpha, double discount, int k);

// Per-component log-joints of the CRP energy, existing clusters first and
// the new-cluster component last (length K+ + 1).
VecD crp_log_joints(const CrpState& c, std::span<const double> x);
VecD crp_posterior(const CrpState& c, std::span<const double> x);

double crp_clam_energy(const CrpState& c, std::span<const double> x);
VecD crp_clam_grad(const CrpState& c, std::span<const double> x);
ad::Var crp_clam_energy_graph(const CrpState& c, const ad::Var& x_row);

// ELBO over the K+ + 1 components (s must have that dimension).
double crp_elbo_energy(const CrpState& c, std::span<const double> x, const LatentState& s);
VecD crp_elbo_logit_rhs(const CrpState& c, std::span<const double> x, const LatentState& s);

// New memory at the conjugate posterior mean rho^-1/(rho^-1 + beta^-1) * x
// with count 1; returns the grown state.
CrpState crp_create_memory(const CrpState& c, std::span<const double> x);

// EnergyModel adapter for the CRP energy.
class CrpClamEnergy final : public EnergyModel {
public:
    explicit CrpClamEnergy(CrpState c) : c_(std::move(c)) {}
    std::int64_t dim() const override { return c_.dim(); }
    double energy(std::span<const double> x) const override { return crp_clam_energy(c_, x); }
    VecD grad(std::span<const double> x) const override { return crp_clam_grad(c_, x); }
    const CrpState& state() const { return c_; }

private:
    CrpState c_;
};

// Energy over logits for a fixed (log-joints, x) problem; drives the
// logit-space integrator.
class ElboLogitEnergy final : public EnergyModel {
public:
    explicit ElboLogitEnergy(VecD log_joints) : lj_(std::move(log_joints)) {}
    std::int64_t dim() const override { return static_cast<std::int64_t>(lj_.size()); }
    double energy(std::span<const double> v) const override {
        return elbo_energy_core(lj_, LatentState(VecD(v.begin(), v.end())));
    }
    VecD grad(std::span<const double> v) const override {
        VecD rhs = elbo_logit_rhs_core(lj_, LatentState(VecD(v.begin(), v.end())));
        for (auto& g : rhs) g = -g;
        return rhs;
    }

private:
    VecD lj_;
};

}  // namespace am
