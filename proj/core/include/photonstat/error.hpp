#ifndef PHOTONSTAT_ERROR_HPP
#define PHOTONSTAT_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace photonstat
{

enum class Errc
{
    invalid_parameter,
    invalid_config,
    degenerate_mix,
    degenerate_input,
    unsorted_input,
    mismatched_duration,
    zero_rate,
    insufficient_peaks,
    invalid_index,
    invalid_geometry,
    no_convergence,
    parse_error,
    io_error,
};

std::string_view to_string(Errc code) noexcept;

// All library failures are reported through this type; the code is stable
// and is what the CLI prints on its error line.
class Error : public std::runtime_error
{
public:
    Error(Errc code, const std::string &message)
        : std::runtime_error(message), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string &message);

inline void require(bool condition, Errc code, const char *message)
{
    if (!condition)
        fail(code, message);
}

} // namespace photonstat

#endif // PHOTONSTAT_ERROR_HPP
