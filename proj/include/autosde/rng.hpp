#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace autosde {

namespace detail {

/// SplitMix64 output function. Bijective on 64-bit words, passes BigCrush
/// when driven by a Weyl sequence, which is exactly how RngStream uses it.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Counter-based Gaussian/uniform stream. A stream is fully determined by its
/// 64-bit key, so sub-streams derived from (seed, index) are independent and
/// trajectories can be generated in any order (or concurrently) with
/// bit-identical results.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {}

    /// Sub-stream i of a root seed; mixing both words keeps streams decorrelated
    /// even for adjacent seeds and indices.
    static RngStream substream(std::uint64_t seed, std::uint64_t index) {
        return RngStream(detail::mix64(seed + detail::kGamma) ^ detail::mix64(detail::mix64(index) + detail::kGamma));
    }

    std::uint64_t next_u64() {
        counter_ += detail::kGamma;
        return detail::mix64(key_ + counter_);
    }

    /// Uniform on (0,1]; never returns 0 so it is safe inside log().
    double next_uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_uniform();
    }

    /// Standard normal via Box-Muller; the paired draw is cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace autosde
