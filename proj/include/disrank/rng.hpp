#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace disrank {

/// 64-bit splitmix generator. Output is identical on every platform, which is
/// the only reason it is used instead of <random> engines and distributions.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : m_state(seed) {}

    std::uint64_t next() noexcept;

    /// Uniform double in [0, 1) with 53 bits of randomness.
    double uniform() noexcept;

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) noexcept;

    /// Unbiased integer in [0, bound). `bound` must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;

    /// Standard normal via Box-Muller (no cached second value).
    double normal() noexcept;

    std::uint64_t state() const noexcept { return m_state; }

private:
    std::uint64_t m_state;
};

/// Fisher-Yates shuffle, ascending: position i swaps with a uniform pick
/// from [i, n).
template <typename T>
void shuffle(std::span<T> items, SplitMix64& rng) {
    const std::size_t n = items.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(items[i], items[j]);
    }
}

/// FNV-1a, used to derive seeds from strings.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Mixes two seeds into one; used for independent generator streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

} // namespace disrank
