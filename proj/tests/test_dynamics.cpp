#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "am/capacity.hpp"
#include "am/dynamics.hpp"
#include "am/energy.hpp"
#include "am/latent.hpp"
#include "am/numerics.hpp"
#include "am/rng.hpp"

using am::ClamEnergy;
using am::ClamModel;
using am::FlowConfig;
using am::MixtureModel;
using am::PatternSet;
using am::SamplerConfig;
using am::Tensor;
using am::VecD;

namespace {

// E = ||x||^2 / (2 s^2)
class Quadratic final : public am::EnergyModel {
public:
    explicit Quadratic(std::int64_t d, double s = 1.0) : d_(d), s2_(s * s) {}
    std::int64_t dim() const override { return d_; }
    double energy(std::span<const double> x) const override {
        double e = 0.0;
        for (double v : x) e += v * v;
        return 0.5 * e / s2_;
    }
    VecD grad(std::span<const double> x) const override {
        VecD g(x.begin(), x.end());
        for (auto& v : g) v /= s2_;
        return g;
    }

private:
    std::int64_t d_;
    double s2_;
};

}  // namespace

TEST_CASE("integrate: local minimum gives a length-1 trajectory") {
    ClamEnergy e(ClamModel(Tensor({1, 2}, {0.5, -0.5}), 2.0));
    FlowConfig cfg;
    const auto traj = am::integrate(e, VecD{0.5, -0.5}, cfg);
    CHECK(traj.length() == 1);
    CHECK(!traj.aborted);
}

TEST_CASE("integrate: single-memory attraction reaches the memory") {
    ClamEnergy e(ClamModel(Tensor({1, 3}, {1.0, 2.0, -1.0}), 1.0));
    FlowConfig cfg;
    cfg.dt = 0.2;
    cfg.max_steps = 5000;
    cfg.tol = 1e-10;
    am::Rng rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        VecD x0{rng.normal(), rng.normal(), rng.normal()};
        const auto traj = am::integrate(e, x0, cfg);
        CHECK(std::abs(traj.final_state()[0] - 1.0) < 1e-6);
        CHECK(std::abs(traj.final_state()[1] - 2.0) < 1e-6);
        CHECK(std::abs(traj.final_state()[2] + 1.0) < 1e-6);
    }
}

TEST_CASE("integrate: quadratic with dt=0.5 halves the state exactly") {
    Quadratic e(2);
    FlowConfig cfg;
    cfg.dt = 0.5;
    cfg.max_steps = 10;
    cfg.tol = 0.0;
    cfg.backtracking = false;
    const auto traj = am::integrate(e, VecD{8.0, -4.0}, cfg);
    REQUIRE(traj.length() == 11);
    for (std::size_t t = 0; t < traj.length(); ++t) {
        const double f = std::pow(0.5, static_cast<double>(t));
        CHECK(traj.states[t][0] == 8.0 * f);
        CHECK(traj.states[t][1] == -4.0 * f);
    }
}

TEST_CASE("integrate_logits: posterior start is already converged") {
    MixtureModel m = am::MixtureModel::uniform(Tensor({2, 2}, {1.0, 0.0, -1.0, 0.0}), 1.0);
    const VecD lj = am::mixture_log_joints(m, VecD{0.3, 0.1});
    FlowConfig cfg;
    const auto traj = am::integrate_logits(m, VecD{0.3, 0.1}, lj, cfg);
    CHECK(traj.length() == 1);
}

TEST_CASE("integrate_logits: symmetric instance reaches the uniform simplex point") {
    MixtureModel m = am::MixtureModel::uniform(Tensor({2, 2}, {1.0, 0.0, -1.0, 0.0}), 1.5);
    FlowConfig cfg;
    cfg.dt = 0.1;
    cfg.max_steps = 20000;
    cfg.tol = 1e-13;
    const auto traj = am::integrate_logits(m, VecD{0.0, 0.4}, VecD{1.7, -2.3}, cfg);
    const VecD q = am::softmax(traj.final_state());
    CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(q[1] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("integrate_logits: random instances reach the posterior") {
    am::Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor mem = Tensor::randn({3, 2}, rng);
        MixtureModel m = am::MixtureModel::uniform(mem, 0.3 + 0.5 * rng.uniform());
        VecD x{rng.normal(), rng.normal()};
        VecD v0{rng.normal(), rng.normal(), rng.normal()};
        FlowConfig cfg;
        cfg.dt = 0.5;
        cfg.max_steps = 100000;
        cfg.tol = 1e-12;
        const auto traj = am::integrate_logits(m, x, v0, cfg);
        const VecD q = am::softmax(traj.final_state());
        const VecD post = am::posterior(m, x);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(q[k] - post[k]) < 1e-6);
    }
}

TEST_CASE("cccp: single pattern returns it unconditionally") {
    PatternSet p(Tensor({1, 2}, {0.3, 0.9}));
    const VecD out = am::cccp_update(p, 2.0, VecD{100.0, -3.0});
    CHECK(out[0] == doctest::Approx(0.3));
    CHECK(out[1] == doctest::Approx(0.9));
}

TEST_CASE("cccp equals a sigma^2 gradient step on the sphere") {
    am::Rng rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t d = 2 + rng.uniform_int(5);
        const std::int64_t n = 2 + rng.uniform_int(10);
        const double m = 1.0 + 2.0 * rng.uniform();
        const double sigma = 0.5 + rng.uniform();
        am::Rng srng(trial + 1000);
        PatternSet p = am::sphere_sample(d, m, n, srng);
        am::KdeModel kde(p, sigma);
        VecD x(d);
        for (auto& v : x) v = rng.normal();
        const VecD g = am::kde_grad(kde, x);
        const VecD cccp = am::cccp_update(p, 1.0 / (sigma * sigma), x);
        for (std::int64_t j = 0; j < d; ++j)
            CHECK(std::abs(cccp[j] - (x[j] - sigma * sigma * g[j])) < 1e-10);
    }
}

TEST_CASE("cccp concentrates on the nearest pattern at large beta") {
    am::Rng rng(14);
    PatternSet p = am::sphere_sample(4, 3.0, 6, rng);
    const double beta = 50.0;
    for (std::int64_t n = 0; n < p.count(); ++n) {
        VecD x(p.row(n).begin(), p.row(n).end());
        const VecD out = am::cccp_update(p, beta, x);
        for (std::int64_t j = 0; j < 4; ++j) CHECK(std::abs(out[j] - x[j]) < 1e-6);
    }
}

TEST_CASE("cccp converges within the iteration budget on well-separated spheres") {
    am::Rng rng(15);
    for (int trial = 0; trial < 5; ++trial) {
        const std::int64_t d = 4 + rng.uniform_int(5);  // up to 8
        const std::int64_t n = 4 + rng.uniform_int(13); // up to 16
        am::Rng srng(500 + trial);
        PatternSet p = am::sphere_spread(d, 10.0, n, 300, srng);
        CHECK(am::well_separated(p, 1.0).well_separated);
        for (int start = 0; start < 4; ++start) {
            VecD x(d);
            for (auto& v : x) v = 3.0 * rng.normal();
            bool converged = false;
            for (int it = 0; it < 1000; ++it) {
                const VecD next = am::cccp_update(p, 1.0, x);
                double diff = 0.0;
                for (std::int64_t j = 0; j < d; ++j)
                    diff = std::max(diff, std::abs(next[j] - x[j]));
                x = next;
                if (diff < 1e-8) {
                    converged = true;
                    break;
                }
            }
            CHECK(converged);
        }
    }
}

TEST_CASE("langevin: zero noise equals plain gradient descent bitwise") {
    ClamEnergy e(ClamModel(Tensor({2, 2}, {1.0, 1.0, -1.0, -1.0}), 1.2));
    SamplerConfig sc;
    sc.step = 0.05;
    sc.noise = 0.0;
    sc.steps = 40;
    sc.seed = 3;
    const auto lt = am::langevin(e, VecD{0.7, -0.2}, sc);

    FlowConfig fc;
    fc.dt = 0.05;
    fc.max_steps = 40;
    fc.tol = 0.0;
    fc.backtracking = false;
    const auto it = am::integrate(e, VecD{0.7, -0.2}, fc);
    REQUIRE(lt.length() == it.length());
    for (std::size_t t = 0; t < lt.length(); ++t)
        for (int j = 0; j < 2; ++j) CHECK(lt.states[t][j] == it.states[t][j]);
}

TEST_CASE("langevin: equal seeds give bit-identical trajectories") {
    Quadratic e(3);
    SamplerConfig sc;
    sc.step = 0.1;
    sc.noise = 0.2;
    sc.steps = 100;
    sc.seed = 77;
    const auto a = am::langevin(e, VecD{1.0, 2.0, 3.0}, sc);
    const auto b = am::langevin(e, VecD{1.0, 2.0, 3.0}, sc);
    REQUIRE(a.length() == b.length());
    for (std::size_t t = 0; t < a.length(); ++t)
        for (int j = 0; j < 3; ++j) CHECK(a.states[t][j] == b.states[t][j]);
    CHECK(a.length() == 101);  // exactly `steps` updates
}

TEST_CASE("langevin: stationary variance matches the AR(1) closed form") {
    const double s = 1.0, gamma = 0.1, noise = 0.1;
    Quadratic e(1, s);
    SamplerConfig sc;
    sc.step = gamma;
    sc.noise = noise;
    sc.steps = 200000;
    sc.seed = 8;
    const auto traj = am::langevin(e, VecD{0.0}, sc);
    const double a = 1.0 - gamma / (s * s);
    const double predicted = noise * noise / (1.0 - a * a);
    double var = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 1000; t < traj.length(); ++t) {
        var += traj.states[t][0] * traj.states[t][0];
        ++count;
    }
    var /= static_cast<double>(count);
    CHECK(std::abs(var - predicted) / predicted < 0.10);
}

TEST_CASE("find_fixed_point basics") {
    ClamEnergy e(ClamModel(Tensor({1, 2}, {2.0, 2.0}), 1.0));
    FlowConfig cfg;
    const auto at_min = am::find_fixed_point(e, VecD{2.0, 2.0}, cfg);
    CHECK(at_min.converged);
    CHECK(at_min.point[0] == 2.0);

    // symmetric saddle: zero gradient start satisfies the tolerance criterion
    ClamEnergy sym(ClamModel(Tensor({2, 1}, {1.0, -1.0}), 1.0));
    const auto saddle = am::find_fixed_point(sym, VecD{0.0}, cfg);
    CHECK(saddle.converged);
    CHECK(saddle.point[0] == 0.0);
}

TEST_CASE("find_fixed_point stays inside a KDE convergence ball") {
    am::Rng rng(21);
    PatternSet p = am::sphere_spread(6, 10.0, 8, 300, rng);
    const double sigma = 1.0;
    const double radius = am::radius_of_convergence(sigma, p.count(), p.largest_norm());
    am::KdeEnergy e(am::KdeModel(p, sigma));
    FlowConfig cfg;
    cfg.dt = sigma * sigma;
    cfg.max_steps = 2000;
    cfg.tol = 1e-10;
    for (std::int64_t n = 0; n < p.count(); ++n) {
        VecD start(p.row(n).begin(), p.row(n).end());
        start[0] += 0.5 * radius;  // inside the ball
        const auto res = am::find_fixed_point(e, start, cfg);
        CHECK(res.converged);
        double dist = 0.0;
        for (std::int64_t j = 0; j < 6; ++j) {
            const double diff = res.point[j] - p.row(n)[j];
            dist += diff * diff;
        }
        CHECK(std::sqrt(dist) <= radius);
    }
}

TEST_CASE("backtracking keeps energies non-increasing across the zoo") {
    am::Rng rng(33);
    FlowConfig cfg;
    cfg.dt = 0.5;  // deliberately large; backtracking must rescue it
    cfg.max_steps = 120;
    cfg.tol = 1e-12;

    auto check_monotone = [&](const am::EnergyModel& e, const VecD& x0) {
        const auto traj = am::integrate(e, x0, cfg);
        for (std::size_t t = 1; t < traj.length(); ++t)
            CHECK(traj.energies[t] <= traj.energies[t - 1] + 1e-12);
    };

    for (int trial = 0; trial < 25; ++trial) {
        const std::int64_t d = 2 + rng.uniform_int(3);
        const std::int64_t n = 2 + rng.uniform_int(5);
        Tensor pats = Tensor::randn({n, d}, rng);
        PatternSet p(pats);
        VecD x0(d);
        for (auto& v : x0) v = rng.normal();

        check_monotone(am::HopfieldEnergy(p), x0);
        check_monotone(am::MchnEnergy(p, 0.5 + rng.uniform()), x0);
        check_monotone(ClamEnergy(ClamModel(pats, 0.5 + rng.uniform())), x0);
        check_monotone(am::KdeEnergy(am::KdeModel(p, 0.5 + rng.uniform())), x0);
        VecD counts(n, 2.0);
        check_monotone(am::CrpClamEnergy(am::CrpState(1.0, 0.1, pats, counts, 1.0, 1.0)), x0);
    }
}

TEST_CASE("trajectory csv export") {
    Quadratic e(2);
    FlowConfig cfg;
    cfg.dt = 0.5;
    cfg.max_steps = 2;
    cfg.tol = 0.0;
    cfg.backtracking = false;
    const auto traj = am::integrate(e, VecD{1.0, -1.0}, cfg);
    const std::string csv = am::trajectory_csv(traj);
    CHECK(csv.rfind("step,x_0,x_1,energy\n", 0) == 0);
    CHECK(csv.find("\n0,1,-1,1\n") != std::string::npos);
}

TEST_CASE("config validation") {
    FlowConfig bad;
    bad.dt = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    SamplerConfig s;
    s.noise = -1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
