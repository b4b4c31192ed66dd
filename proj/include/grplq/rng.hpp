#pragma once

#include <cstdint>
#include <initializer_list>

namespace grplq {

/**
 * Counter-based random stream. Draw k of a stream with key K is
 *   mix64(K + (k + 1) * 0x9E3779B97F4A7C15)
 * where mix64 is the SplitMix64 finalizer. Keys are derived by folding
 * words into the seed with `derive_key`. The algorithm is specified in
 * docs/FORMATS.md so other implementations can reproduce every draw.
 */
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}
    CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> words);

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on (0, 1].
    double uniform_open_low();
    /// Standard normal by Box-Muller; both variates of a pair are used.
    double normal();
    /// Uniform integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound);
    /// +1 or -1 with equal probability.
    double sign();

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z);
std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> words);

} // namespace grplq
