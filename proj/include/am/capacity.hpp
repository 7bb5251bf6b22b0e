#pragma once

#include <cstdint>
#include <vector>

#include "am/energy.hpp"
#include "am/rng.hpp"

namespace am {

// Per-pattern storage report under the disjoint-ball semantics: a pattern
// is stored when every probe started inside its ball converges to one
// fixed point inside the same ball and the balls are pairwise disjoint.
struct CapacityReport {
    VecD separation;            // Delta_n = min over others of ||x_n - x_n'||^2 / 2
    double min_separation = 0.0;
    double largest_norm = 0.0;  // M
    VecD radius;                // R_n (sigma^2 / (N M) for every pattern)
    std::vector<bool> stored;
    std::vector<std::string> not_stored_reason;   // empty when stored
    VecD retrieval_error;       // ||x_n - x_n*||
    double stored_fraction = 0.0;
    double aggregate_retrieval_ratio = 0.0;  // mean retrieval error over mean pairwise distance
};

struct CapacityBound {
    std::uint64_t value = 0;
    bool saturated = false;  // 2^(2(D-1)) exceeds 64 bits; value holds the max
};

struct RetrievalResult {
    double ratio_initial = 0.0;   // mean final/initial distance to the source pattern
    double ratio_pairwise = 0.0;  // mean final distance over mean pairwise pattern
                                  // distance; the headline metric
};

// Delta_n = 0.5 * min_{n' != n} ||x_n - x_n'||^2. Requires N >= 2.
VecD separation(const PatternSet& p);

// sigma^2 / (N * M).
double radius_of_convergence(double sigma, std::int64_t n, double m);

struct SeparationCheck {
    bool well_separated = false;
    double margin = 0.0;  // min over n of Delta_n - bound
};
// Delta_n >= 2 sigma^2 / N + sigma^2 log(2 (N-1) N M^2 / sigma^2) for all n.
SeparationCheck well_separated(const PatternSet& p, double sigma);

// 2^(2(D-1)), saturating beyond 64 bits. Requires D >= 2.
CapacityBound capacity_bound(std::int64_t d);

// Probes are uniform in the ball of radius min(R_n, probe_radius) around
// each pattern and iterated with the softmax fixed-point update
// (10^3 iteration budget, tol 1e-8 on the state change).
CapacityReport check_storage(const PatternSet& p, double sigma,
                             std::int64_t probes_per_pattern, double probe_radius,
                             Rng& rng);

// Queries at distance `perturbation` from each pattern, evolved under the
// Gaussian-KDE dynamics; reports both normalizations of the retrieval ratio.
RetrievalResult retrieval_experiment(std::int64_t d, std::int64_t n, double m,
                                     double sigma, std::int64_t queries_per_pattern,
                                     double perturbation, std::uint64_t seed);

// N points with every row exactly on the radius-M sphere.
PatternSet sphere_sample(std::int64_t d, double m, std::int64_t n, Rng& rng);

// Approximately equidistant points: pairwise-repulsion descent on the
// sphere, for configurations that must meet the separation bound.
PatternSet sphere_spread(std::int64_t d, double m, std::int64_t n,
                         std::int64_t iters, Rng& rng);

}  // namespace am
