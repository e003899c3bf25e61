#pragma once

#include <cstdint>
#include <random>

namespace hpr {

/// Seeded generator with platform-independent variate transforms.
///
/// std::mt19937_64 has a fully specified output sequence; the uniform,
/// normal and Poisson transforms below are written out here so simulated
/// data is bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on (0, 1).
    double uniform_open();
    /// Standard normal (Marsaglia polar method).
    double normal();
    /// Poisson(mean): sequential inversion below 30, PTRS rejection above.
    std::int64_t poisson(double mean);

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

/// Derives an independent stream seed from a base seed and a stream tag.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace hpr
