#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "metafusion/types.hpp"

namespace metafusion {

/// Seedable deterministic random source. The generator is mt19937_64 (whose
/// output sequence is fixed by the standard), and all distributions are
/// implemented on top of its raw output so that identical (seed, call order)
/// yields identical streams on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Uniform in [0, 1). 53-bit resolution.
    double uniform();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);

    /// Standard normal via Box-Muller (one value per call, no cached spare).
    double normal();

    Matrix normal_matrix(Index rows, Index cols);
    Vector normal_vector(Index n);

    /// Derived stream: deterministic function of this rng's seed and the tag,
    /// independent of how much of the parent stream has been consumed.
    Rng child(std::uint64_t tag) const;
    Rng child(std::string_view tag) const;

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

/// splitmix64-style mix, used for deriving child seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace metafusion
