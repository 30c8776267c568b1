#ifndef PHOTONSTAT_RNG_HPP
#define PHOTONSTAT_RNG_HPP

#include <cstdint>

namespace photonstat
{

// Sub-stream identifiers. Every consumer of randomness draws from its own
// engine seeded by derive_seed(seed, stream), so adding or removing draws in
// one place never shifts another stream.
enum class Stream : std::uint64_t
{
    emission = 1,
    routing = 2,
    jitter_ch1 = 3,
    jitter_ch2 = 4,
    uncorrelated_ch1 = 5,
    uncorrelated_ch2 = 6,
};

// SplitMix64 finalizer over (seed, stream, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) noexcept;

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) noexcept
{
    return derive_seed(seed, static_cast<std::uint64_t>(stream), index);
}

} // namespace photonstat

#endif // PHOTONSTAT_RNG_HPP
