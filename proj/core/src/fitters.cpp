#include "photonstat/fitters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "photonstat/error.hpp"

namespace photonstat
{

void SaturationParams::validate() const
{
    require(std::isfinite(amplitude) && amplitude > 0.0, Errc::invalid_parameter, "A must be > 0");
    require(std::isfinite(saturation_power) && saturation_power > 0.0, Errc::invalid_parameter,
            "P_sat must be > 0");
    require(std::isfinite(background_slope) && background_slope >= 0.0, Errc::invalid_parameter,
            "beta must be >= 0");
}

double g2_pulsed_mixed(double tau, double g2_zero, double pump_rate, double rho, double envelope_time)
{
    const double t = std::abs(tau);
    const double emitter = std::exp(-2.0 * t / envelope_time) * (1.0 - (1.0 - g2_zero) * std::exp(-pump_rate * t));
    return 1.0 - rho * rho + rho * rho * emitter;
}

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinPumpRate = 1e-9; // 1/ns
constexpr double kMaxG2Zero = 1.5;   // tolerates noise overshoot above 1
constexpr double kMaxPumpRate = 1e3;
constexpr int kReweightPasses = 6;

struct Series
{
    std::vector<double> x, y, sigma;
    std::vector<double> expected; // uncorrelated counts per bin behind a norm of 1
};

Series histogram_series(const CoincidenceHistogram &h, Weighting weighting)
{
    require(h.norm.has_value(), Errc::invalid_parameter, "histogram is not normalized");
    require(h.size() >= 10, Errc::invalid_parameter, "fit needs at least 10 bins");
    Series s;
    s.x = h.centers();
    s.y = *h.norm;
    if (weighting == Weighting::none)
    {
        s.sigma.assign(s.x.size(), 1.0);
        return s;
    }
    require(h.norm_err.has_value() && h.norm_err->size() == h.size(), Errc::invalid_parameter,
            "weighted fit needs per-bin errors");
    s.sigma = *h.norm_err;
    for (std::size_t k = 0; k < h.size(); ++k)
    {
        const double e = s.sigma[k];
        require(e > 0.0 && std::isfinite(e), Errc::invalid_parameter, "per-bin errors must be > 0");
        // norm_err = sqrt(max(counts, 1)) / expected
        s.expected.push_back(std::sqrt(std::max(static_cast<double>(h.counts[k]), 1.0)) / e);
    }
    return s;
}

template <typename Model>
ResidualFunction residuals_of(Series s, Model model)
{
    return [s = std::move(s), model](std::span<const double> p, std::span<double> r) {
        for (std::size_t i = 0; i < s.x.size(); ++i)
            r[i] = (s.y[i] - model(s.x[i], p)) / s.sigma[i];
    };
}

// Poisson sigma of the normalized value predicted by the model. A floor of a
// quarter count keeps empty model bins from dominating.
template <typename Model>
void reweight(Series &s, const Model &model, std::span<const double> params)
{
    for (std::size_t k = 0; k < s.x.size(); ++k)
    {
        const double counts = std::max(model(s.x[k], params) * s.expected[k], 0.25);
        s.sigma[k] = std::sqrt(counts) / s.expected[k];
    }
}

// Smallest |tau| at which the data recover half way from the minimum to 1.
double half_recovery_delay(const std::vector<double> &x, const std::vector<double> &y, double bin_width)
{
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(x[a]) < std::abs(x[b]); });
    const double ymin = *std::min_element(y.begin(), y.end());
    const double target = 0.5 * (ymin + 1.0);
    for (const std::size_t i : order)
        if (y[i] >= target && std::abs(x[i]) > 0.0)
            return std::abs(x[i]);
    return std::max(bin_width, 1e-3);
}

FitResult best_of(const LeastSquaresProblem &base, const std::vector<std::vector<double>> &starts,
                  const LeastSquaresOptions &solver)
{
    FitResult best;
    bool have = false;
    for (const auto &start : starts)
    {
        LeastSquaresProblem pb = base;
        pb.initial = start;
        FitResult r = least_squares(pb, solver);
        const bool better = !have || (r.converged && !best.converged) ||
                            (r.converged == best.converged && r.residual_norm < best.residual_norm);
        if (better)
        {
            best = std::move(r);
            have = true;
        }
    }
    return best;
}

// Fits, then with model weighting refits with sigmas from the previous
// solution until the parameters settle.
template <typename Model>
FitResult fit_histogram(const LeastSquaresProblem &shape, Series series, Weighting weighting, const Model &model,
                        const std::vector<std::vector<double>> &starts, const LeastSquaresOptions &solver)
{
    auto build = [&](const Series &s) {
        LeastSquaresProblem pb = shape;
        pb.residuals = residuals_of(s, model);
        return pb;
    };
    FitResult fit = best_of(build(series), starts, solver);
    if (weighting != Weighting::model)
        return fit;
    for (int pass = 0; pass < kReweightPasses; ++pass)
    {
        reweight(series, model, fit.values);
        FitResult next = best_of(build(series), {fit.values}, solver);
        double change = 0.0;
        for (std::size_t j = 0; j < fit.values.size(); ++j)
            change = std::max(change, std::abs(next.values[j] - fit.values[j]) /
                                          std::max(std::abs(fit.values[j]), shape.typical[j]));
        next.iterations += fit.iterations;
        fit = std::move(next);
        if (change < 1e-10)
            break;
    }
    return fit;
}

void flag_bounds(const LeastSquaresProblem &pb, FitResult &fit)
{
    for (std::size_t j = 0; j < fit.values.size(); ++j)
    {
        if (fit.fixed[j])
            continue;
        if (fit.values[j] == pb.lower[j] || fit.values[j] == pb.upper[j])
            fit.flags.push_back("at-bound:" + pb.names[j]);
    }
}

DerivedQuantity dip_width(const FitResult &fit)
{
    const double w = fit.value("w_p");
    const double sw = fit.sigma("w_p");
    return {"dip_width_ns", 2.0 / w, std::isfinite(sw) ? 2.0 * sw / (w * w) : kInf};
}

// sigma of sum_j grad_j theta_j; parameters with zero gradient are skipped so
// an unconstrained one does not poison the result.
double propagate(const FitResult &fit, const std::vector<double> &grad)
{
    const std::size_t p = fit.values.size();
    double var = 0.0;
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b)
            if (grad[a] != 0.0 && grad[b] != 0.0)
                var += grad[a] * grad[b] * fit.covariance[a * p + b];
    return std::isfinite(var) ? std::sqrt(std::max(var, 0.0)) : kInf;
}

auto cw_model()
{
    return [](double tau, std::span<const double> p) { return g2_cw_reduced(tau, p[0], p[1]); };
}

auto pulsed_model(double envelope_time)
{
    return [envelope_time](double tau, std::span<const double> p) {
        return g2_pulsed_mixed(tau, p[0], p[1], p[2], envelope_time);
    };
}

LeastSquaresProblem cw_shape(std::size_t bins, Weighting weighting)
{
    LeastSquaresProblem pb;
    pb.names = {"g2_0", "w_p"};
    pb.lower = {0.0, kMinPumpRate};
    pb.upper = {kMaxG2Zero, kMaxPumpRate};
    pb.typical = {1e-3, 1e-4};
    pb.residual_count = bins;
    pb.weighted = weighting != Weighting::none;
    pb.initial = {0.5, 0.5};
    return pb;
}

LeastSquaresProblem pulsed_shape(std::size_t bins, double envelope_time, Weighting weighting)
{
    require(std::isfinite(envelope_time) && envelope_time > 0.0, Errc::invalid_parameter, "tau_o must be > 0");
    LeastSquaresProblem pb;
    pb.names = {"g2_0", "w_p", "rho"};
    pb.lower = {0.0, kMinPumpRate, 0.0};
    pb.upper = {kMaxG2Zero, kMaxPumpRate, 1.0};
    pb.typical = {1e-3, 1e-4, 1e-3};
    pb.residual_count = bins;
    pb.weighted = weighting != Weighting::none;
    pb.initial = {0.5, 0.5, 0.9};
    return pb;
}

} // namespace

double g2_cw_reduced(double tau, double g2_zero, double pump_rate)
{
    return 1.0 - (1.0 - g2_zero) * std::exp(-pump_rate * std::abs(tau));
}

LeastSquaresProblem g2_cw_problem(const CoincidenceHistogram &h, Weighting weighting)
{
    LeastSquaresProblem pb = cw_shape(h.size(), weighting);
    pb.residuals = residuals_of(histogram_series(h, weighting), cw_model());
    return pb;
}

FitResult fit_g2_cw(const CoincidenceHistogram &h, const G2FitOptions &options)
{
    Series series = histogram_series(h, options.weighting);
    const LeastSquaresProblem shape = cw_shape(h.size(), options.weighting);
    const double g0 = std::clamp(*std::min_element(series.y.begin(), series.y.end()), 0.0, kMaxG2Zero);
    const double w0 = std::clamp(std::log(2.0) / half_recovery_delay(series.x, series.y, h.bin_width()),
                                 kMinPumpRate, kMaxPumpRate);
    std::vector<std::vector<double>> starts;
    for (const double f : {1.0, 0.3, 3.0})
        starts.push_back({g0, std::clamp(w0 * f, kMinPumpRate, kMaxPumpRate)});

    FitResult fit = fit_histogram(shape, std::move(series), options.weighting, cw_model(), starts, options.solver);
    flag_bounds(shape, fit);
    fit.derived.push_back(dip_width(fit));
    const double depth = 1.0 - fit.value("g2_0");
    if (!std::isfinite(fit.sigma("w_p")) || !(depth > 2.0 * fit.sigma("g2_0")))
        fit.flags.emplace_back("degenerate-data");
    return fit;
}

LeastSquaresProblem g2_pulsed_problem(const CoincidenceHistogram &h, double envelope_time, Weighting weighting)
{
    LeastSquaresProblem pb = pulsed_shape(h.size(), envelope_time, weighting);
    pb.residuals = residuals_of(histogram_series(h, weighting), pulsed_model(envelope_time));
    return pb;
}

FitResult fit_g2_pulsed(const CoincidenceHistogram &h, double envelope_time, const PulsedFitOptions &options)
{
    LeastSquaresProblem shape = pulsed_shape(h.size(), envelope_time, options.weighting);
    Series series = histogram_series(h, options.weighting);
    const std::vector<double> &x = series.x;
    const std::vector<double> &y = series.y;

    // Far from zero delay the envelope has decayed and the data sit at 1 - rho^2.
    double floor_sum = 0.0;
    std::size_t floor_bins = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        if (std::abs(x[i]) > 3.0 * envelope_time)
        {
            floor_sum += y[i];
            ++floor_bins;
        }
    }
    double rho0 = 0.9;
    if (floor_bins > 0)
        rho0 = std::sqrt(std::clamp(1.0 - floor_sum / static_cast<double>(floor_bins), 0.01, 1.0));
    if (options.fixed_rho)
    {
        require(*options.fixed_rho >= 0.0 && *options.fixed_rho <= 1.0, Errc::invalid_parameter,
                "fixed rho must lie in [0, 1]");
        rho0 = *options.fixed_rho;
        shape.lower[2] = shape.upper[2] = rho0;
    }
    const double ymin = *std::min_element(y.begin(), y.end());
    const double rho_sq = std::max(rho0 * rho0, 1e-6);
    const double g0 = std::clamp((ymin - 1.0 + rho_sq) / rho_sq, 0.0, 1.0);

    std::vector<std::vector<double>> starts;
    for (const double w : {0.05, 0.3, 1.0, 3.0})
        starts.push_back({g0, w, rho0});
    FitResult fit = fit_histogram(shape, std::move(series), options.weighting, pulsed_model(envelope_time), starts,
                                  options.solver);
    flag_bounds(shape, fit);

    fit.derived.push_back(dip_width(fit));
    const double g = fit.value("g2_0");
    const double rho = fit.value("rho");
    const double g_exp = 1.0 - rho * rho + rho * rho * g;
    fit.derived.push_back({"g2_exp_zero", g_exp, propagate(fit, {rho * rho, 0.0, 2.0 * rho * (g - 1.0)})});
    return fit;
}

LeastSquaresProblem saturation_problem(std::span<const IntensityPoint> data, std::span<const double> sigmas)
{
    require(sigmas.empty() || sigmas.size() == data.size(), Errc::invalid_parameter,
            "sigma column does not match the data");
    Series s;
    double max_power = 0.0, max_intensity = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        require(std::isfinite(data[i].power) && data[i].power > 0.0, Errc::invalid_parameter,
                "powers must be > 0");
        require(std::isfinite(data[i].intensity), Errc::invalid_parameter, "intensities must be finite");
        s.x.push_back(data[i].power);
        s.y.push_back(data[i].intensity);
        const double sigma = sigmas.empty() ? 1.0 : sigmas[i];
        require(std::isfinite(sigma) && sigma > 0.0, Errc::invalid_parameter, "sigmas must be > 0");
        s.sigma.push_back(sigma);
        max_power = std::max(max_power, data[i].power);
        max_intensity = std::max(max_intensity, std::abs(data[i].intensity));
    }
    std::vector<double> distinct = s.x;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    require(distinct.size() >= 4, Errc::degenerate_input, "saturation fit needs at least 4 distinct powers");

    LeastSquaresProblem pb;
    pb.names = {"A", "P_sat", "beta"};
    pb.lower = {0.0, 1e-12 * max_power, 0.0};
    pb.upper = {kInf, kInf, kInf};
    const double scale = std::max(max_intensity, 1e-300);
    pb.typical = {1e-6 * scale, 1e-6 * max_power, 1e-6 * scale / max_power};
    pb.residual_count = s.x.size();
    pb.weighted = !sigmas.empty();
    pb.residuals = residuals_of(std::move(s), [](double power, std::span<const double> p) {
        return p[0] * power / (power + p[1]) + p[2] * power;
    });
    pb.initial = {scale, max_power / 2.0, 0.0};
    return pb;
}

SaturationFit fit_saturation(std::span<const IntensityPoint> data, std::span<const double> sigmas,
                             const LeastSquaresOptions &solver)
{
    LeastSquaresProblem pb = saturation_problem(data, sigmas);

    std::vector<IntensityPoint> sorted(data.begin(), data.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const IntensityPoint &a, const IntensityPoint &b) { return a.power < b.power; });
    const std::size_t n = sorted.size();

    // Well above saturation I ~ A + beta P: a line through the top third.
    const std::size_t top = std::max<std::size_t>(2, n / 3);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = n - top; i < n; ++i)
    {
        sx += sorted[i].power;
        sy += sorted[i].intensity;
        sxx += sorted[i].power * sorted[i].power;
        sxy += sorted[i].power * sorted[i].intensity;
    }
    const auto m = static_cast<double>(top);
    const double det = m * sxx - sx * sx;
    double beta0 = det > 0.0 ? std::max((m * sxy - sx * sy) / det, 0.0) : 0.0;
    double a0 = (sy - beta0 * sx) / m;
    if (!(a0 > 0.0))
    {
        beta0 = 0.0;
        a0 = 0.0;
        for (const auto &pt : sorted)
            a0 = std::max(a0, pt.intensity);
        a0 = std::max(a0, 1e-12);
    }

    // P_sat where the background-subtracted curve first reaches A / 2.
    double psat0 = std::sqrt(sorted.front().power * sorted.back().power);
    for (std::size_t i = 0; i < n; ++i)
    {
        const double e = sorted[i].intensity - beta0 * sorted[i].power;
        if (e >= 0.5 * a0)
        {
            if (i == 0)
            {
                psat0 = sorted[0].power;
            }
            else
            {
                const double e_prev = sorted[i - 1].intensity - beta0 * sorted[i - 1].power;
                const double f = e > e_prev ? std::clamp((0.5 * a0 - e_prev) / (e - e_prev), 0.0, 1.0) : 0.5;
                psat0 = std::exp(std::log(sorted[i - 1].power) +
                                 f * (std::log(sorted[i].power) - std::log(sorted[i - 1].power)));
            }
            break;
        }
    }

    std::vector<std::vector<double>> starts;
    for (const double f : {1.0, 0.25, 4.0})
        starts.push_back({a0, std::max(psat0 * f, pb.lower[1]), beta0});

    SaturationFit out;
    out.fit = best_of(pb, starts, solver);
    flag_bounds(pb, out.fit);
    out.params = {out.fit.value("A"), out.fit.value("P_sat"), out.fit.value("beta")};
    const double psat = out.params.saturation_power;
    const double psat_sigma = out.fit.sigma("P_sat");
    if (sorted.back().power < psat || !std::isfinite(psat_sigma) || psat_sigma > psat)
        out.fit.flags.emplace_back("non-identifiable");
    for (const auto &pt : data)
        out.emitter_curve.push_back({pt.power, out.params.emitter_intensity(pt.power)});
    return out;
}

} // namespace photonstat
