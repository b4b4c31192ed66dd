#include "grplq/rng.hpp"

#include <cmath>
#include <numbers>

namespace grplq {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> words)
{
    std::uint64_t key = mix64(seed);
    for (std::uint64_t w : words) key = mix64(key ^ mix64(w + kGolden));
    return key;
}

CounterRng::CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> words) : key_(derive_key(seed, words)) {}

std::uint64_t CounterRng::next_u64()
{
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double CounterRng::uniform()
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform_open_low()
{
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double CounterRng::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform_open_low();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t CounterRng::below(std::uint64_t bound)
{
    if (bound <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
        const std::uint64_t draw = next_u64();
        if (draw < limit) return draw % bound;
    }
}

double CounterRng::sign()
{
    return (next_u64() >> 63) ? 1.0 : -1.0;
}

} // namespace grplq
