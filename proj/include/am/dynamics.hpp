#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "am/energy.hpp"
#include "am/latent.hpp"
#include "am/rng.hpp"

namespace am {

// Explicit-Euler descent configuration. dt plays dt/tau of the
// continuous-time flow; tolerance is on the infinity norm of the state
// change per step.
struct FlowConfig {
    double dt = 0.1;
    std::int64_t max_steps = 10000;
    double tol = 1e-8;
    bool backtracking = true;

    void validate() const;
};

// Langevin sampler: always runs exactly `steps` updates
// x <- x - step * grad E(x) + omega, omega ~ N(0, noise^2 I).
struct SamplerConfig {
    double step = 0.1;       // named `step`, not alpha: alpha is the CRP concentration
    double noise = 0.01;
    std::int64_t steps = 15;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Trajectory {
    std::vector<VecD> states;
    std::vector<double> energies;
    std::vector<std::int64_t> steps;
    bool aborted = false;      // non-finite state or gradient encountered
    std::string note;

    std::size_t length() const { return states.size(); }
    const VecD& final_state() const { return states.back(); }
    double final_energy() const { return energies.back(); }
};

// Euler descent with optional backtracking halving (at most 30 halvings per
// step) so recorded energies never increase. Terminates when the proposed
// state change falls to tol or after max_steps.
Trajectory integrate(const EnergyModel& model, const VecD& x0, const FlowConfig& cfg);

// Logit-space flow of the ELBO energy at fixed (model, x): Euler on
// elbo_logit_rhs with energies recorded from elbo_energy.
Trajectory integrate_logits(const MixtureModel& model, const VecD& x,
                            const VecD& v0, const FlowConfig& cfg);
Trajectory integrate_logits_crp(const CrpState& state, const VecD& x,
                                const VecD& v0, const FlowConfig& cfg);

// One softmax fixed-point update X * Softmax(beta X^T x).
VecD cccp_update(const PatternSet& p, double beta, const VecD& x);

// Langevin MCMC; zero noise reduces bitwise to plain gradient steps.
Trajectory langevin(const EnergyModel& model, const VecD& x0, const SamplerConfig& cfg);

struct FixedPointResult {
    VecD point;
    bool converged = false;
};
FixedPointResult find_fixed_point(const EnergyModel& model, const VecD& x0,
                                  const FlowConfig& cfg);

// CSV with columns step, x_0..x_{D-1}, energy.
std::string trajectory_csv(const Trajectory& t);

}  // namespace am
