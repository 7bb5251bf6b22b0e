#pragma once

#include <cstdint>
#include <vector>

namespace am {

// Deterministic random stream: xoshiro256** seeded through SplitMix64.
// Equal seeds give equal integer streams on every platform; all floating
// draws are derived from the integer stream with fixed arithmetic, so the
// double streams match as well wherever libm agrees to the last ulp.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n);
    // Standard normal via Box-Muller on (0,1] uniforms; one spare is cached.
    double normal();
    double normal(double mean, double stddev);

    std::vector<double> normal_vec(std::size_t n);

    // Child stream for grid cell / worker `index`, independent of draws
    // already taken from this stream (derived from the original seed only).
    Rng child(std::uint64_t index) const;

private:
    std::uint64_t state_[4];
    std::uint64_t seed_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace am
