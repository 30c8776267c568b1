#include <cmath>
#include <random>

#include "doctest.h"
#include "photonstat/emitter_model.hpp"
#include "photonstat/fitters.hpp"
#include "photonstat/presets.hpp"
#include "test_util.hpp"

using namespace photonstat;

namespace
{
CoincidenceHistogram from_model(const std::function<double(double)> &model, double window, double bin = 1.0,
                                double err = 0.02)
{
    CoincidenceHistogram h;
    const DelayBinning b(window, bin);
    h.bin_edges = b.edges();
    h.window = window;
    h.norm.emplace();
    h.norm_err.emplace();
    for (std::size_t k = 0; k < b.bin_count(); ++k)
    {
        const double g = model(b.center(k));
        h.counts.push_back(static_cast<std::uint64_t>(std::llround(1e4 * g)));
        h.norm->push_back(g);
        h.norm_err->push_back(err);
    }
    h.zero_count.assign(b.bin_count(), false);
    return h;
}

std::vector<IntensityPoint> saturation_data(const SaturationParams &p, const std::vector<double> &powers)
{
    std::vector<IntensityPoint> d;
    for (double x : powers)
        d.push_back({x, p.intensity(x)});
    return d;
}

std::vector<double> log_powers(double from, double to, int n)
{
    std::vector<double> p;
    for (int i = 0; i < n; ++i)
        p.push_back(from * std::pow(to / from, static_cast<double>(i) / (n - 1)));
    return p;
}
} // namespace

TEST_CASE("engine: linear model matches the closed-form slope")
{
    const std::vector<double> x{0.5, 1.0, 2.0, 3.5, 4.0, 7.0};
    const std::vector<double> y{1.1, 1.9, 4.2, 6.8, 8.1, 13.9};
    LeastSquaresProblem pb;
    pb.names = {"a"};
    pb.initial = {0.1};
    pb.residual_count = x.size();
    pb.residuals = [&](std::span<const double> p, std::span<double> r) {
        for (std::size_t i = 0; i < x.size(); ++i)
            r[i] = y[i] - p[0] * x[i];
    };
    const auto fit = least_squares(pb);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
    }
    CHECK(fit.converged);
    CHECK(std::abs(fit.value("a") - sxy / sxx) <= 1e-12 * sxy / sxx);
}

TEST_CASE("engine: Rosenbrock from (-1.2, 1)")
{
    LeastSquaresProblem pb;
    pb.names = {"x", "y"};
    pb.initial = {-1.2, 1.0};
    pb.residual_count = 2;
    pb.residuals = [](std::span<const double> p, std::span<double> r) {
        r[0] = 10.0 * (p[1] - p[0] * p[0]);
        r[1] = 1.0 - p[0];
    };
    const auto fit = least_squares(pb);
    CHECK(fit.converged);
    CHECK(fit.value("x") == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(fit.value("y") == doctest::Approx(1.0).epsilon(1e-8));
    for (std::size_t i = 1; i < fit.cost_history.size(); ++i)
        CHECK(fit.cost_history[i] <= fit.cost_history[i - 1]);

    LeastSquaresOptions tight;
    tight.max_iterations = 2;
    const auto cut = least_squares(pb, tight);
    CHECK_FALSE(cut.converged);
    CHECK(cut.has_flag("no-convergence"));
}

TEST_CASE("engine: a parameter the model ignores is unidentifiable")
{
    LeastSquaresProblem pb;
    pb.names = {"a", "unused"};
    pb.initial = {1.0, 3.0};
    pb.residual_count = 4;
    pb.residuals = [](std::span<const double> p, std::span<double> r) {
        for (int i = 0; i < 4; ++i)
            r[i] = (i + 1.0) * 2.0 - p[0] * (i + 1.0) + 0.01 * (i % 2);
    };
    const auto fit = least_squares(pb);
    CHECK(std::isinf(fit.sigma("unused")));
    CHECK(fit.has_flag("unidentifiable:unused"));
    CHECK(std::isfinite(fit.sigma("a")));
}

TEST_CASE("engine: bounds are respected and fixed parameters stay put")
{
    LeastSquaresProblem pb;
    pb.names = {"a", "b"};
    pb.initial = {0.5, 2.0};
    pb.lower = {0.0, 2.0};
    pb.upper = {1.0, 2.0};
    pb.residual_count = 3;
    pb.residuals = [](std::span<const double> p, std::span<double> r) {
        r[0] = p[0] - 3.0; // optimum outside the box
        r[1] = p[1] - 5.0;
        r[2] = p[0] * p[1] - 6.0;
    };
    const auto fit = least_squares(pb);
    CHECK(fit.value("a") == doctest::Approx(1.0));
    CHECK(fit.value("b") == 2.0);
    CHECK(fit.fixed[1]);
    CHECK(fit.converged);
}

TEST_CASE("numeric Jacobian agrees with a 10x smaller step")
{
    std::mt19937_64 rng(301);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto cw = from_model([](double t) { return g2_cw_reduced(t, 0.46, 0.5); }, 50.0);
    const auto pulsed = from_model([](double t) { return g2_pulsed_mixed(t, 0.1, 2.0 / 2.6, 0.92, 6.0); }, 100.0);
    const auto sat = saturation_data({1500.0, 0.54, 22.5}, log_powers(0.1, 5.0, 12));
    const std::vector<double> sat_sigma(sat.size(), 30.0);
    const LeastSquaresProblem problems[3] = {g2_cw_problem(cw, Weighting::observed),
                                              g2_pulsed_problem(pulsed, 6.0, Weighting::observed),
                                              saturation_problem(sat, sat_sigma)};
    for (int model = 0; model < 3; ++model)
    {
        double worst = 0.0;
        for (int i = 0; i < 100; ++i)
        {
            std::vector<double> theta;
            if (model == 0)
                theta = {u(rng), 0.2 + 2.0 * u(rng)};
            else if (model == 1)
                theta = {u(rng), 0.2 + 2.0 * u(rng), 0.3 + 0.7 * u(rng)};
            else
                theta = {500.0 + 2000.0 * u(rng), 0.1 + 2.0 * u(rng), 50.0 * u(rng)};
            const auto& pb = problems[model];
            const auto a = numeric_jacobian(pb, theta, 1.0);
            const auto b = numeric_jacobian(pb, theta, 0.1);
            const std::size_t n = theta.size();
            for (std::size_t c = 0; c < n; ++c)
            {
                double diff = 0, norm = 0;
                for (std::size_t r = 0; r < pb.residual_count; ++r)
                {
                    diff += std::pow(a[r * n + c] - b[r * n + c], 2);
                    norm += std::pow(b[r * n + c], 2);
                }
                worst = std::max(worst, std::sqrt(diff / norm));
            }
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("cw fit: noiseless self-fit, perturbed start and flat data")
{
    const auto h = from_model([](double t) { return g2_cw_reduced(t, 0.46, 0.5); }, 50.0);
    const auto fit = fit_g2_cw(h);
    CHECK(fit.converged);
    CHECK(close_rel(fit.value("g2_0"), 0.46, 1e-6));
    CHECK(close_rel(fit.value("w_p"), 0.5, 1e-6));
    CHECK(close_rel(fit.derived_quantity("dip_width_ns").value, 4.0, 1e-6));

    for (double f : {0.8, 1.2})
    {
        auto pb = g2_cw_problem(h, Weighting::observed);
        pb.initial = {0.46 * f, 0.5 / f};
        const auto r = least_squares(pb);
        CHECK(close_rel(r.value("g2_0"), 0.46, 1e-6));
        CHECK(close_rel(r.value("w_p"), 0.5, 1e-6));
    }

    const auto flat = from_model([](double) { return 1.0; }, 50.0);
    CHECK(fit_g2_cw(flat).has_flag("degenerate-data"));

    CoincidenceHistogram raw = h;
    raw.norm.reset();
    CHECK(error_code_of([&] { fit_g2_cw(raw); }) == Errc::invalid_parameter);
}

TEST_CASE("pulsed fit: noiseless self-fit and the rho = 1 reduction")
{
    const double w = 2.0 / 2.6;
    const auto h = from_model([&](double t) { return g2_pulsed_mixed(t, 0.1, w, 0.92, 6.0); }, 60.0);
    const auto fit = fit_g2_pulsed(h, 6.0);
    CHECK(fit.converged);
    CHECK(close_rel(fit.value("rho"), 0.92, 1e-6));
    CHECK(close_rel(fit.value("g2_0"), 0.1, 1e-6));
    CHECK(close_rel(fit.derived_quantity("dip_width_ns").value, 2.6, 1e-6));
    CHECK(close_rel(fit.derived_quantity("g2_exp_zero").value, 1.0 - 0.8464 * 0.9, 1e-6));

    for (double f : {0.8, 1.2})
    {
        auto pb = g2_pulsed_problem(h, 6.0, Weighting::observed);
        pb.initial = {0.1 * f, w / f, std::min(0.92 * f, 1.0)};
        const auto r = least_squares(pb);
        CHECK(close_rel(r.value("rho"), 0.92, 1e-6));
        CHECK(close_rel(r.value("g2_0"), 0.1, 1e-6));
        CHECK(close_rel(r.value("w_p"), w, 1e-6));
    }

    EmitterParams p;
    p.pump_rate = w;
    p.g2_zero = 0.1;
    for (double t : {0.0, 1.0, 3.3, 10.0})
        CHECK(g2_pulsed_mixed(t, 0.1, w, 1.0, 6.0) == doctest::Approx(g2_pulsed(p, PulseParams{6.0, 100.0}, t)));

    const auto pure = from_model([&](double t) { return g2_pulsed_mixed(t, 0.1, w, 1.0, 6.0); }, 60.0);
    PulsedFitOptions fixed;
    fixed.fixed_rho = 1.0;
    const auto r = fit_g2_pulsed(pure, 6.0, fixed);
    CHECK(r.value("rho") == 1.0);
    CHECK(r.fixed[r.index("rho")]);
    CHECK(close_rel(r.value("g2_0"), 0.1, 1e-6));
}

TEST_CASE("cw fit on a simulated run")
{
    // The cw preset emits about 1 kHz, far too little for a quick test, so
    // the emitter decays faster here. The dip is still set by the pump.
    Scenario s = cw_dip_scenario(5, 2e11);
    s.sim.emitter.decay_rate = 1e-4;
    s.sim.background_rate = background_rate_for_rho(0.5 * mean_emission_rate(s.sim), s.rho);
    const auto streams = simulate_streams(s.sim);
    const auto h = normalize_cw(cross_correlate(streams.first, streams.second, s.correlate));
    const auto fit = fit_g2_cw(h);
    CHECK(fit.converged);
    CHECK(std::abs(fit.value("g2_0") - 0.46) <= 0.10);
    CHECK(std::abs(fit.derived_quantity("dip_width_ns").value - 4.0) <= 1.5);
}

TEST_CASE("saturation fit: self-fit, scaling, background and identifiability")
{
    const SaturationParams truth{1500.0, 0.54, 22.5};
    const auto powers = log_powers(0.1, 5.0, 12);
    const auto data = saturation_data(truth, powers);
    const auto fit = fit_saturation(data);
    CHECK(fit.fit.converged);
    CHECK(close_rel(fit.params.saturation_power, 0.54, 1e-6));
    CHECK(close_rel(fit.params.amplitude, 1500.0, 1e-6));
    CHECK(close_rel(fit.params.background_slope, 22.5, 1e-6));
    REQUIRE(fit.emitter_curve.size() == data.size());
    CHECK(fit.emitter_curve[3].intensity == doctest::Approx(truth.emitter_intensity(powers[3])).epsilon(1e-6));

    // Noisy data scaled by c: A and beta scale, P_sat does not move.
    std::mt19937_64 rng(302);
    std::normal_distribution<double> noise(0.0, 0.05);
    auto noisy = data;
    for (auto &pt : noisy)
        pt.intensity *= 1.0 + noise(rng);
    auto scaled = noisy;
    for (auto &pt : scaled)
        pt.intensity *= 37.0;
    const auto a = fit_saturation(noisy);
    const auto b = fit_saturation(scaled);
    CHECK(close_rel(a.params.saturation_power, b.params.saturation_power, 1e-9));
    CHECK(close_rel(37.0 * a.params.amplitude, b.params.amplitude, 1e-9));
    CHECK(std::abs(37.0 * a.params.background_slope - b.params.background_slope) <=
          1e-9 * b.params.amplitude);

    // beta = 0: estimate within 2 sigma of zero in most trials.
    int consistent = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed)
    {
        std::mt19937_64 r(seed);
        auto d = saturation_data({1500.0, 0.54, 0.0}, powers);
        std::vector<double> sig;
        for (auto &pt : d)
        {
            pt.intensity *= 1.0 + noise(r);
            sig.push_back(0.05 * pt.intensity);
        }
        const auto f = fit_saturation(d, sig);
        consistent += f.params.background_slope <= 2.0 * f.fit.sigma("beta") ? 1 : 0;
    }
    CHECK(consistent >= 45);

    const auto low = saturation_data(truth, log_powers(0.001, 0.01, 8));
    CHECK(fit_saturation(low).fit.has_flag("non-identifiable"));

    const std::vector<IntensityPoint> three{{0.1, 100}, {0.2, 180}, {0.2, 181}, {0.4, 300}};
    CHECK(error_code_of([&] { fit_saturation(three); }) == Errc::degenerate_input);
}

TEST_CASE("saturation fit over 0.1-5 uW with 5% noise")
{
    // Twelve points that end near ten P_sat leave P_sat loose enough that
    // roughly one trial in seven lands outside the 15% band. The Monte Carlo
    // mean stays well within it.
    const auto powers = log_powers(0.1, 5.0, 12);
    const SaturationParams truth{1500.0, 0.54, 22.5};
    double sum = 0.0;
    int inside = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed)
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, 0.05);
        auto d = saturation_data(truth, powers);
        std::vector<double> sig;
        for (auto &pt : d)
        {
            pt.intensity *= 1.0 + noise(rng);
            sig.push_back(0.05 * pt.intensity);
        }
        const double p = fit_saturation(d, sig).params.saturation_power;
        sum += p;
        inside += std::abs(p / 0.54 - 1.0) <= 0.15 ? 1 : 0;
    }
    MESSAGE("trials with P_sat within 15%: " << inside << "/100");
    CHECK(std::abs(sum / 100.0 / 0.54 - 1.0) <= 0.15);
    CHECK(inside >= 75);
}
