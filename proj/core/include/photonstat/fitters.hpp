#ifndef PHOTONSTAT_FITTERS_HPP
#define PHOTONSTAT_FITTERS_HPP

#include <optional>
#include <span>
#include <vector>

#include "photonstat/correlator.hpp"
#include "photonstat/least_squares.hpp"
#include "photonstat/photon_sim.hpp"
#include "photonstat/saturation.hpp"

namespace photonstat
{

enum class Weighting
{
    // Poisson errors from the model prediction, refined by reweighting. Stays
    // unbiased at a few counts per bin, where observed-count weights pull the
    // fit toward low bins.
    model,
    // The histogram's own norm_err column.
    observed,
    none,
};

struct G2FitOptions
{
    Weighting weighting = Weighting::model;
    LeastSquaresOptions solver;
};

// Reduced cw dip 1 - (1 - g2_0) exp(-w_p |tau|) fitted to the normalized
// histogram. Parameters "g2_0" and "w_p" (1/ns); derived "dip_width_ns" = 2/w_p.
// A dip the data cannot resolve is flagged "degenerate-data".
FitResult fit_g2_cw(const CoincidenceHistogram &h, const G2FitOptions &options = {});

struct PulsedFitOptions
{
    Weighting weighting = Weighting::model;
    std::optional<double> fixed_rho; // e.g. 1 for background-free data
    LeastSquaresOptions solver;
};

// Background-mixed pulsed model
//   1 - rho^2 + rho^2 exp(-2|tau|/tau_o) [1 - (1 - g2_0) exp(-w_p |tau|)]
// with tau_o held fixed. Parameters "g2_0", "w_p", "rho"; derived
// "dip_width_ns" and "g2_exp_zero" = 1 - rho^2 + rho^2 g2_0.
FitResult fit_g2_pulsed(const CoincidenceHistogram &h, double envelope_time, const PulsedFitOptions &options = {});

struct SaturationFit
{
    FitResult fit;                           // "A", "P_sat", "beta"
    SaturationParams params;
    std::vector<IntensityPoint> emitter_curve; // A P / (P + P_sat) at the input powers
};

// I(P) = A P / (P + P_sat) + beta P. sigmas, if given, are per-point standard
// deviations; otherwise the fit is unweighted. Needs at least 4 distinct
// powers. Flags "non-identifiable" when the powers do not reach saturation.
SaturationFit fit_saturation(std::span<const IntensityPoint> data, std::span<const double> sigmas = {},
                             const LeastSquaresOptions &solver = {});

// Model residual problems behind the fits, exposed for gradient checks. Model
// weighting starts from the observed errors.
LeastSquaresProblem g2_cw_problem(const CoincidenceHistogram &h, Weighting weighting);
LeastSquaresProblem g2_pulsed_problem(const CoincidenceHistogram &h, double envelope_time, Weighting weighting);
LeastSquaresProblem saturation_problem(std::span<const IntensityPoint> data, std::span<const double> sigmas);

double g2_cw_reduced(double tau, double g2_zero, double pump_rate);
double g2_pulsed_mixed(double tau, double g2_zero, double pump_rate, double rho, double envelope_time);

} // namespace photonstat

#endif // PHOTONSTAT_FITTERS_HPP
