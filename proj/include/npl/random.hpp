#pragma once

#include <cstdint>
#include <initializer_list>

namespace npl {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Folds a seed and a path of stream identifiers into one key, so that
/// (seed, date, repetition) or (seed, draw) name independent streams.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t key = mix64(seed);
    for (std::uint64_t id : path) key = mix64(key ^ mix64(id + 0x632be59bd9b4e019ULL));
    return key;
}

/// Counter-based uniform stream: the n-th output depends only on (key, n),
/// so results never depend on how work is scheduled across threads.
class Stream {
public:
    explicit constexpr Stream(std::uint64_t key) noexcept : key_(key) {}
    constexpr Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept
        : key_(derive_key(seed, path)) {}

    constexpr std::uint64_t bits() noexcept { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    /// Uniform on the open interval (0, 1): (k + 0.5) / 2^53.
    constexpr double uniform() noexcept { return (static_cast<double>(bits() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal by inversion.
    double normal() noexcept;

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;

    constexpr std::uint64_t position() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace npl
