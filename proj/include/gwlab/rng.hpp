#pragma once

#include <cstdint>
#include <random>

namespace gwlab {

// 64-bit LCG with the MMIX constants (modulus 2^64):
//   x <- 6364136223846793005 x + 1442695040888963407
// A double is formed from the top 53 bits: (x >> 11) * 2^-53.
using Lcg64 = std::linear_congruential_engine<std::uint64_t, 6364136223846793005ULL, 1442695040888963407ULL, 0ULL>;

inline double uniform01(Lcg64& g)
{
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(Lcg64& g, double a, double b)
{
    return a + (b - a) * uniform01(g);
}

} // namespace gwlab
