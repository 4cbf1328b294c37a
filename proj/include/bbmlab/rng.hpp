#pragma once

// Counter-based random streams.
//
// Every stream is identified by (seed, stream id); the n-th draw of a stream
// is a pure function of (seed, stream id, n).  Particles carry their stream
// id and draw counter, so results never depend on which thread advanced them.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace bbmlab::rng {

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key)
{
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

/// 64-bit finalizer (murmur3 fmix64); used to derive child stream ids.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdULL;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ULL;
    z ^= z >> 33;
    return z;
}

/// Stream id of the `index`-th child of `parent`.
constexpr std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t index)
{
    return mix64(parent ^ mix64(index + 0x9E3779B97F4A7C15ULL));
}

// Reserved root streams.
inline constexpr std::uint64_t kInitStream = 0x1D1D1D1D00000001ULL;
inline constexpr std::uint64_t kReplicateBase = 0x5EED000000000000ULL;

/// Stream id for the `i`-th root object (initial particle, replicate, ...).
constexpr std::uint64_t root_stream(std::uint64_t i)
{
    return derive_stream(kReplicateBase, i);
}

class Stream {
public:
    using result_type = std::uint64_t;

    Stream() = default;
    Stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0)
        : seed_(seed), stream_(stream), counter_(counter)
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t id() const { return stream_; }
    /// Number of 64-bit words consumed so far.
    std::uint64_t counter() const { return counter_; }

    result_type operator()()
    {
        // Each Philox block yields two words; word n lives in block n/2.
        const std::uint64_t block = counter_ >> 1;
        if (block != cached_block_) {
            const auto out = philox4x32(
                {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                 static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
            cache_[0] = (std::uint64_t{out[1]} << 32) | out[0];
            cache_[1] = (std::uint64_t{out[3]} << 32) | out[2];
            cached_block_ = block;
        }
        return cache_[counter_++ & 1];
    }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard exponential.
    double exponential() { return -std::log(uniform()); }

    /// Standard normal (Box-Muller, one value per call pair of words).
    double normal()
    {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        return r * std::cos(2.0 * std::numbers::pi * uniform());
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    std::uint64_t cached_block_ = std::numeric_limits<std::uint64_t>::max();
    std::array<std::uint64_t, 2> cache_{};
};

} // namespace bbmlab::rng
