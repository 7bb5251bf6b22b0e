#include "am/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "am/numerics.hpp"

namespace am {

namespace {

bool finite(const VecD& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

double inf_norm_diff(const VecD& a, const VecD& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

void FlowConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("FlowConfig: dt must be > 0");
    if (max_steps < 1) throw std::invalid_argument("FlowConfig: max_steps must be >= 1");
    if (tol < 0.0) throw std::invalid_argument("FlowConfig: tol must be >= 0");
}

void SamplerConfig::validate() const {
    if (!(step > 0.0)) throw std::invalid_argument("SamplerConfig: step must be > 0");
    if (noise < 0.0) throw std::invalid_argument("SamplerConfig: noise must be >= 0");
    if (steps < 0) throw std::invalid_argument("SamplerConfig: steps must be >= 0");
}

Trajectory integrate(const EnergyModel& model, const VecD& x0, const FlowConfig& cfg) {
    cfg.validate();
    if (static_cast<std::int64_t>(x0.size()) != model.dim())
        throw std::invalid_argument("integrate: dimension mismatch");

    Trajectory traj;
    VecD x = x0;
    double e = model.energy(x);
    traj.states.push_back(x);
    traj.energies.push_back(e);
    traj.steps.push_back(0);

    for (std::int64_t t = 1; t <= cfg.max_steps; ++t) {
        VecD g = model.grad(x);
        if (!finite(g)) {
            traj.aborted = true;
            traj.note = "non-finite gradient at step " + std::to_string(t);
            return traj;
        }
        double dt = cfg.dt;
        VecD x_new(x.size());
        double e_new = 0.0;
        bool accepted = false;
        for (int halving = 0; halving <= 30; ++halving) {
            for (std::size_t i = 0; i < x.size(); ++i) x_new[i] = x[i] - dt * g[i];
            e_new = model.energy(x_new);
            if (!cfg.backtracking || e_new <= e) {
                accepted = true;
                break;
            }
            dt *= 0.5;
        }
        if (!accepted) break;  // no non-increasing step found; treat as converged
        if (inf_norm_diff(x_new, x) <= cfg.tol) break;
        x = std::move(x_new);
        e = e_new;
        traj.states.push_back(x);
        traj.energies.push_back(e);
        traj.steps.push_back(t);
        if (!finite(x)) {
            traj.aborted = true;
            traj.note = "non-finite state at step " + std::to_string(t);
            return traj;
        }
        x_new.resize(x.size());
    }
    return traj;
}

namespace {
Trajectory integrate_logit_flow(const ElboLogitEnergy& lv, const VecD& v0,
                                const FlowConfig& cfg) {
    return integrate(lv, v0, cfg);
}
}  // namespace

Trajectory integrate_logits(const MixtureModel& model, const VecD& x,
                            const VecD& v0, const FlowConfig& cfg) {
    if (static_cast<std::int64_t>(v0.size()) != model.count())
        throw std::invalid_argument("integrate_logits: logit dimension mismatch");
    ElboLogitEnergy lv(mixture_log_joints(model, x));
    return integrate_logit_flow(lv, v0, cfg);
}

Trajectory integrate_logits_crp(const CrpState& state, const VecD& x,
                                const VecD& v0, const FlowConfig& cfg) {
    if (static_cast<std::int64_t>(v0.size()) != state.k_plus() + 1)
        throw std::invalid_argument("integrate_logits_crp: logit dimension mismatch");
    ElboLogitEnergy lv(crp_log_joints(state, x));
    return integrate_logit_flow(lv, v0, cfg);
}

VecD cccp_update(const PatternSet& p, double beta, const VecD& x) {
    if (static_cast<std::int64_t>(x.size()) != p.dim())
        throw std::invalid_argument("cccp_update: dimension mismatch");
    VecD scores(p.count());
    for (std::int64_t n = 0; n < p.count(); ++n) {
        const double* row = p.patterns().data() + n * p.dim();
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) s += x[j] * row[j];
        scores[n] = beta * s;
    }
    const VecD w = softmax(scores);
    VecD out(x.size(), 0.0);
    for (std::int64_t n = 0; n < p.count(); ++n) {
        const double* row = p.patterns().data() + n * p.dim();
        for (std::size_t j = 0; j < x.size(); ++j) out[j] += w[n] * row[j];
    }
    return out;
}

Trajectory langevin(const EnergyModel& model, const VecD& x0, const SamplerConfig& cfg) {
    cfg.validate();
    if (static_cast<std::int64_t>(x0.size()) != model.dim())
        throw std::invalid_argument("langevin: dimension mismatch");

    Rng rng(cfg.seed);
    Trajectory traj;
    VecD x = x0;
    traj.states.push_back(x);
    traj.energies.push_back(model.energy(x));
    traj.steps.push_back(0);

    for (std::int64_t t = 1; t <= cfg.steps; ++t) {
        VecD g = model.grad(x);
        if (!finite(g)) {
            traj.aborted = true;
            traj.note = "non-finite gradient at step " + std::to_string(t);
            return traj;
        }
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= cfg.step * g[i];
        if (cfg.noise > 0.0)
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += cfg.noise * rng.normal();
        if (!finite(x)) {
            traj.aborted = true;
            traj.note = "non-finite state at step " + std::to_string(t);
            return traj;
        }
        traj.states.push_back(x);
        traj.energies.push_back(model.energy(x));
        traj.steps.push_back(t);
    }
    return traj;
}

FixedPointResult find_fixed_point(const EnergyModel& model, const VecD& x0,
                                  const FlowConfig& cfg) {
    Trajectory t = integrate(model, x0, cfg);
    const bool converged = !t.aborted &&
        static_cast<std::int64_t>(t.length()) - 1 < cfg.max_steps;
    return {t.final_state(), converged};
}

std::string trajectory_csv(const Trajectory& t) {
    std::string out = "step";
    const std::size_t d = t.states.empty() ? 0 : t.states[0].size();
    char buf[64];
    for (std::size_t j = 0; j < d; ++j) {
        std::snprintf(buf, sizeof buf, ",x_%zu", j);
        out += buf;
    }
    out += ",energy\n";
    for (std::size_t i = 0; i < t.length(); ++i) {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(t.steps[i]));
        out += buf;
        for (double v : t.states[i]) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, ",%.17g\n", t.energies[i]);
        out += buf;
    }
    return out;
}

}  // namespace am
