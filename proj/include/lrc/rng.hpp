#pragma once

// SplitMix64 PRNG and Rademacher sign sampling.
//
// Reference: Steele, Lea, Flood (2014), "Fast splittable pseudorandom
// number generators". State is a single 64-bit word; the published
// increment and finalizer constants make the stream reproducible
// bit-for-bit on any platform.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrc {

// Fixed offsets added to the user seed so each logical consumer owns an
// independent stream. Adding estimator calls never perturbs the
// training stream and vice versa.
namespace seed_role {
inline constexpr std::uint64_t init = 0x01;
inline constexpr std::uint64_t shuffle = 0x02;
inline constexpr std::uint64_t sigma = 0x03;
inline constexpr std::uint64_t ball = 0x04;
inline constexpr std::uint64_t estimator = 0x05;
inline constexpr std::uint64_t data = 0x06;
inline constexpr std::uint64_t split = 0x07;
}  // namespace seed_role

class Prng {
public:
    explicit constexpr Prng(std::uint64_t seed) noexcept : state_(seed) {}

    // One SplitMix64 step: advance by the golden-ratio increment, then
    // finalize with the two published multipliers.
    constexpr std::uint64_t next_u64() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1), 53 random bits.
    double next_unit() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes exactly two 64-bit draws.
    double next_gaussian() noexcept {
        const double u = 1.0 - next_unit();  // (0, 1], keeps log finite
        const double v = next_unit();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586477 * v);
    }

    constexpr std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

// Rademacher signs; every entry is exactly +1 or -1. A rows x cols
// matrix is stored row-major in the same container.
struct SignVector {
    std::vector<double> signs;

    std::size_t size() const noexcept { return signs.size(); }
    double operator[](std::size_t i) const noexcept { return signs[i]; }
};

// Each sign is +1 iff the top bit of the next 64-bit output is 0. The
// top bit avoids any low-bit bias concern; exactly `count` outputs are
// consumed.
inline SignVector sample_signs(Prng& p, std::size_t count) {
    if (count == 0) {
        throw std::invalid_argument("sample_signs: count must be >= 1");
    }
    SignVector out;
    out.signs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.signs.push_back((p.next_u64() >> 63) == 0 ? 1.0 : -1.0);
    }
    return out;
}

// rows x cols signs in row-major order, consuming the stream in that
// order (identical to sample_signs with count = rows * cols).
inline SignVector sample_sign_matrix(Prng& p, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("sample_sign_matrix: dimensions must be >= 1, got " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    }
    return sample_signs(p, rows * cols);
}

}  // namespace lrc
