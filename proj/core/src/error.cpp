#include "photonstat/error.hpp"

namespace photonstat
{

std::string_view to_string(Errc code) noexcept
{
    switch (code)
    {
    case Errc::invalid_parameter: return "invalid-parameter";
    case Errc::invalid_config: return "invalid-config";
    case Errc::degenerate_mix: return "degenerate-mix";
    case Errc::degenerate_input: return "degenerate-input";
    case Errc::unsorted_input: return "unsorted-input";
    case Errc::mismatched_duration: return "mismatched-duration";
    case Errc::zero_rate: return "zero-rate";
    case Errc::insufficient_peaks: return "insufficient-peaks";
    case Errc::invalid_index: return "invalid-index";
    case Errc::invalid_geometry: return "invalid-geometry";
    case Errc::no_convergence: return "no-convergence";
    case Errc::parse_error: return "parse-error";
    case Errc::io_error: return "io-error";
    }
    return "unknown";
}

void fail(Errc code, const std::string &message)
{
    throw Error(code, message);
}

} // namespace photonstat
