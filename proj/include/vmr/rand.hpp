#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vmr {

// Hand-rolled draws on top of mt19937_64 so streams are reproducible
// across standard-library implementations.

inline double uniform01(std::mt19937_64& rng) {
    return (rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Inclusive bounds.
inline long uniform_int(std::mt19937_64& rng, long lo, long hi) {
    return lo + (long)(rng() % (unsigned long)(hi - lo + 1));
}

inline double normal(std::mt19937_64& rng) {
    const double u1 = 1.0 - uniform01(rng);  // (0, 1]
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace vmr
