#ifndef PHOTONSTAT_SRC_RANDOM_ENGINE_HPP
#define PHOTONSTAT_SRC_RANDOM_ENGINE_HPP

// Private to the library. std::mt19937_64 is fully specified by the standard
// and the Boost.Random distributions are fixed algorithms (ziggurat for the
// exponential and normal), so a given seed reproduces the same stream on
// every platform. The std:: distributions do not give that guarantee.

#include <cstdint>
#include <random>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace photonstat::detail
{

class RandomEngine
{
public:
    explicit RandomEngine(std::uint64_t seed) : engine_(seed) {}

    // Unit-mean exponential variate.
    double exponential() { return exponential_(engine_); }

    double normal() { return normal_(engine_); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t bits() { return engine_(); }

private:
    std::mt19937_64 engine_;
    boost::random::exponential_distribution<double> exponential_{1.0};
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace photonstat::detail

#endif // PHOTONSTAT_SRC_RANDOM_ENGINE_HPP
