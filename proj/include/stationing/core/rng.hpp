#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace stationing {

// splitmix64 finalizer. Every seed derivation and every random draw in the
// project goes through this function, so results are independent of
// iteration order and of the standard library's distributions.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stage seed = mix(mix(master ^ fnv1a(tag)) ^ index).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                    std::uint64_t index = 0) noexcept {
    return mix64(mix64(master ^ fnv1a64(tag)) ^ index);
}

// Per-case seed within a cohort: mix(seed ^ case_index).
constexpr std::uint64_t case_seed(std::uint64_t cohort_seed, std::uint64_t case_index) noexcept {
    return mix64(cohort_seed ^ case_index);
}

// Counter-based generator: draw `i` of stream `key` is a pure function of (key, i).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}

    std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix64(key_ ^ mix64(counter + 0x632be59bd9b4e019ULL));
    }

    // Uniform in [0, 1) with 53 bits.
    double uniform(std::uint64_t counter) const noexcept {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    double uniform(std::uint64_t counter, double lo, double hi) const noexcept {
        return lo + (hi - lo) * uniform(counter);
    }

    // Box-Muller on draws (2i, 2i+1).
    double gaussian(std::uint64_t counter) const noexcept {
        const double u1 = 1.0 - uniform(2 * counter);  // (0, 1]
        const double u2 = uniform(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t counter, std::uint64_t n) const noexcept {
        return static_cast<std::uint64_t>(uniform(counter) * static_cast<double>(n));
    }

private:
    std::uint64_t key_;
};

}  // namespace stationing
