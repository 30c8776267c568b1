#ifndef PHOTONSTAT_LEAST_SQUARES_HPP
#define PHOTONSTAT_LEAST_SQUARES_HPP

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace photonstat
{

struct DerivedQuantity
{
    std::string name;
    double value = 0.0;
    double sigma = 0.0;
};

struct FitResult
{
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> sigmas;      // inf marks a parameter the data do not constrain
    std::vector<double> covariance;  // row-major, names.size()^2
    std::vector<bool> fixed;
    std::vector<DerivedQuantity> derived;

    double residual_norm = 0.0;  // sum of squared (weighted) residuals
    double gradient_norm = 0.0;  // max_j |J_j . r| / (|J_j| |r|), 0 for an exact fit
    std::size_t residual_count = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> cost_history; // residual_norm after the start and every accepted step
    std::vector<std::string> flags;

    std::size_t index(std::string_view name) const; // throws invalid_parameter
    double value(std::string_view name) const { return values[index(name)]; }
    double sigma(std::string_view name) const { return sigmas[index(name)]; }
    const DerivedQuantity &derived_quantity(std::string_view name) const;
    bool has_flag(std::string_view flag) const;
};

using ResidualFunction = std::function<void(std::span<const double> params, std::span<double> residuals)>;

struct LeastSquaresProblem
{
    std::vector<std::string> names;
    std::vector<double> initial;
    std::vector<double> lower; // empty: unbounded; lower == upper fixes a parameter
    std::vector<double> upper;
    std::vector<double> typical; // magnitude floor for steps and tolerances; empty: 1
    std::size_t residual_count = 0;
    ResidualFunction residuals;
    // True when residuals are divided by known standard deviations; otherwise
    // the covariance is scaled by the reduced chi-square.
    bool weighted = false;
};

struct LeastSquaresOptions
{
    int max_iterations = 200;
    double step_tolerance = 1e-9;
    double gradient_tolerance = 1e-9;
    double initial_damping = 1e-3;
};

// Levenberg-Marquardt with Marquardt's diagonal scaling and a central
// difference Jacobian. Steps are projected onto the bounds. Never throws on
// a failure to converge; the result carries converged = false and the
// "no-convergence" flag instead.
FitResult least_squares(const LeastSquaresProblem &problem, const LeastSquaresOptions &options = {});

// Central-difference Jacobian, row-major residual_count x params. The step
// for parameter j is step_scale * cbrt(eps) * max(|theta_j|, typical_j).
std::vector<double> numeric_jacobian(const LeastSquaresProblem &problem, std::span<const double> params,
                                     double step_scale = 1.0);

inline constexpr double kUnidentified = std::numeric_limits<double>::infinity();

} // namespace photonstat

#endif // PHOTONSTAT_LEAST_SQUARES_HPP
