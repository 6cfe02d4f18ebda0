#include "metafusion/rng.hpp"

#include <cmath>
#include <numbers>

namespace metafusion {

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    // Rejection sampling for an unbiased draw.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix Rng::normal_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
}

Vector Rng::normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal();
    return v;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // Asymmetric combine so that mix_seed(a, b) != mix_seed(b, a): a plain
    // sum would make a (seed, tag) pair collide with its swap.
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b ^ (b << 21) ^ 0x2545f4914f6cdd1dULL) + (a << 7);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng Rng::child(std::uint64_t tag) const { return Rng(mix_seed(seed_, tag)); }

Rng Rng::child(std::string_view tag) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return child(h);
}

}  // namespace metafusion
