#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "radscan/tensor.hpp"

namespace radscan {

/// Deterministic generator with platform-independent draws (the engine is
/// fully specified; the distributions below are written out by hand).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }
    double normal();

    std::string state() const;
    void restore(const std::string& state);

private:
    std::mt19937_64 engine_;
};

/// Seed of the i-th derived stream (splitmix64 of base and index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0);

}  // namespace radscan
