#ifndef PHOTONSTAT_TESTS_TEST_UTIL_HPP
#define PHOTONSTAT_TESTS_TEST_UTIL_HPP

#include <cmath>
#include <optional>

#include "photonstat/error.hpp"

// The code carried by the Error a callable throws, or nothing.
template <typename F>
std::optional<photonstat::Errc> error_code_of(F &&f)
{
    try
    {
        f();
    }
    catch (const photonstat::Error &e)
    {
        return e.code();
    }
    return std::nullopt;
}

inline bool close_rel(double a, double b, double tol)
{
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

#endif // PHOTONSTAT_TESTS_TEST_UTIL_HPP
