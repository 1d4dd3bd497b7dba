#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace sguq {

/// Uniform double in [0, 1) from the top 53 bits of one draw. The mapping is
/// spelled out (rather than using a library distribution) so sample streams
/// are bit-identical across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection sampling; no modulo bias.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / bound * bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

/// Latin hypercube sample of m points in [0, 1)^d, fully determined by
/// (m, d, seed): per dimension, a Fisher-Yates permutation assigns each point
/// one of the m strata, then a uniform jitter places it inside the stratum.
inline std::vector<std::vector<double>> lhs_sample(int m, int d, std::uint64_t seed) {
    if (m < 1 || d < 1) throw std::invalid_argument("lhs_sample: need m, d >= 1");
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> pts(m, std::vector<double>(d));
    std::vector<int> perm(m);
    for (int k = 0; k < d; ++k) {
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = m - 1; i > 0; --i) {
            int j = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(i) + 1));
            std::swap(perm[i], perm[j]);
        }
        for (int i = 0; i < m; ++i)
            pts[i][k] = (perm[i] + uniform01(rng)) / m;
    }
    return pts;
}

} // namespace sguq
