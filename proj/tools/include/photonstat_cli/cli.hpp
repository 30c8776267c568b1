#ifndef PHOTONSTAT_CLI_CLI_HPP
#define PHOTONSTAT_CLI_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace photonstat::cli
{

enum ExitCode : int
{
    ok = 0,
    usage_or_invalid = 2,
    io_failure = 3,
    no_convergence = 4,
};

// Environment variable naming the default output directory.
inline constexpr const char *kOutDirEnv = "PHOTONSTAT_OUT_DIR";

// Runs the command line given without the program name. Reports go to out,
// warnings and the one-line error record to err.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace photonstat::cli

#endif // PHOTONSTAT_CLI_CLI_HPP
