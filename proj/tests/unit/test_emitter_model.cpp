#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "photonstat/emitter_model.hpp"
#include "test_util.hpp"

using namespace photonstat;

namespace
{
EmitterParams emitter(double w, double gamma, double g0 = 0.0, double rho0 = 0.0)
{
    EmitterParams p;
    p.pump_rate = w;
    p.decay_rate = gamma;
    p.g2_zero = g0;
    p.initial_population = rho0;
    return p;
}
} // namespace

TEST_CASE("excited population: limits and worked value")
{
    CHECK(excited_population(emitter(0.3, 0.3), 1e4) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(excited_population(emitter(0.7, 0.1, 0.0, 0.37), 0.0) == doctest::Approx(0.37));
    const double expected = 0.5 * (1.0 - std::exp(-1.0));
    CHECK(excited_population(emitter(0.5, 0.5), 1.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.31606).epsilon(1e-5));
    const double rk4 = oracle::rk4_population([](double) { return 0.5; }, 0.5, 0.0, 1.0);
    CHECK(std::abs(excited_population(emitter(0.5, 0.5), 1.0) - rk4) < 1e-10);
}

TEST_CASE("excited population matches RK4 over random draws")
{
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> rate(0.01, 2.0), unit(0.0, 1.0), delay(0.0, 5.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i)
    {
        const auto p = emitter(rate(rng), rate(rng), 0.0, unit(rng));
        const double tau = delay(rng);
        const double w = p.pump_rate;
        const double rk4 = oracle::rk4_population([w](double) { return w; }, p.decay_rate, p.initial_population, tau);
        const double closed = excited_population(p, tau);
        worst = std::max(worst, std::abs(closed - rk4));
        CHECK(closed >= 0.0);
        CHECK(closed <= 1.0);
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("cw g2: zero delay, limits, worked value, symmetry and monotonicity")
{
    const auto p = emitter(0.5, 1e-6, 0.46);
    CHECK(g2_cw(p, 0.0) == doctest::Approx(0.46));
    CHECK(g2_cw(p, 1e4) == doctest::Approx(1.0));
    // 1 - 0.54 e^-2 with w_p = 2/4 ns, gamma negligible
    CHECK(g2_cw(emitter(0.5, 0.0, 0.46), 4.0) == doctest::Approx(1.0 - 0.54 * std::exp(-2.0)).epsilon(1e-12));
    CHECK(g2_cw(p, 4.0) == doctest::Approx(0.9269).epsilon(1e-4));
    CHECK(g2_cw(p, -3.0) == g2_cw(p, 3.0));

    std::mt19937_64 rng(102);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 100; ++i)
    {
        const auto q = emitter(0.05 + unit(rng), unit(rng) * 1e-3, unit(rng));
        double previous = -1.0;
        for (double tau = 0.0; tau < 40.0; tau += 0.25)
        {
            const double g = g2_cw(q, tau);
            CHECK(g >= q.g2_zero - 1e-15);
            CHECK(g <= 1.0);
            CHECK(g >= previous);
            previous = g;
        }
    }
}

TEST_CASE("pulsed g2: zero delay, long envelope limit and worked value")
{
    const auto p = emitter(2.0 / 2.6, 2e-6, 0.1);
    const PulseParams pulse{6.0, 100.0};
    CHECK(g2_pulsed(p, pulse, 0.0) == doctest::Approx(0.1));
    const double expected = std::exp(-5.2 / 6.0) * (1.0 - 0.9 * std::exp(-2.0));
    CHECK(g2_pulsed(p, pulse, 2.6) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.369).epsilon(1e-3));
    for (int k = 0; k < 10; ++k)
    {
        const double tau = 0.7 * k;
        const double independent =
            std::exp(-2.0 * tau / 6.0) * (1.0 - 0.9 * std::exp(-(2.0 / 2.6) * tau));
        CHECK(g2_pulsed(p, pulse, tau) == doctest::Approx(independent).epsilon(1e-12));
    }
    const PulseParams wide{1e12, 1e13};
    for (double tau : {0.5, 2.0, 7.0})
        CHECK(g2_pulsed(p, wide, tau) ==
              doctest::Approx(1.0 - 0.9 * std::exp(-p.pump_rate * tau)).epsilon(1e-9));
}

TEST_CASE("background mixing and its inverse")
{
    CHECK(g2_background_mixed(0.3, BackgroundMix{1.0}) == doctest::Approx(0.3));
    CHECK(g2_background_mixed(7.0, BackgroundMix{0.0}) == doctest::Approx(1.0));
    CHECK(g2_background_mixed(0.1, BackgroundMix{0.92}) == doctest::Approx(1.0 - 0.8464 * 0.9).epsilon(1e-12));
    CHECK(g2_background_mixed(0.1, BackgroundMix{0.92}) == doctest::Approx(0.238).epsilon(1e-3));

    const auto inv = invert_background(0.2, BackgroundMix{0.92});
    CHECK(inv.value == doctest::Approx((0.2 - 1.0 + 0.8464) / 0.8464).epsilon(1e-12));
    CHECK(inv.value == doctest::Approx(0.055).epsilon(1e-2));
    CHECK_FALSE(inv.negative);
    CHECK(invert_background(1.0, BackgroundMix{0.5}).value == doctest::Approx(1.0));
    const auto below = invert_background(0.05, BackgroundMix{0.92});
    CHECK(below.negative);
    CHECK(below.value < 0.0);
    CHECK(error_code_of([] { invert_background(0.5, BackgroundMix{0.0}); }) == Errc::degenerate_mix);

    std::mt19937_64 rng(103);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i)
    {
        const double g = unit(rng);
        // The inversion loses about eps / rho^2, so very small rho is left out.
        const BackgroundMix mix{0.05 + 0.95 * unit(rng)};
        worst = std::max(worst, std::abs(invert_background(g2_background_mixed(g, mix), mix).value - g));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("integrated zero-delay g2: limits, worked value and inverse")
{
    const PulseParams pulse{6.0, 100.0};
    CHECK(g2_integrated_zero(emitter(1e-12, 1e-6, 0.2), pulse) == doctest::Approx(0.2));
    CHECK(g2_integrated_zero(emitter(1e9, 1e-6, 0.2), pulse) == doctest::Approx(1.0).epsilon(1e-6));
    const double value = g2_integrated_zero(emitter(2.0 / 2.6, 1e-6, 0.1), pulse);
    CHECK(value == doctest::Approx(1.0 - 0.9 / (1.0 + 6.0 / 2.6)).epsilon(1e-12));
    CHECK(value == doctest::Approx(0.728).epsilon(1e-3));
    CHECK(std::abs(value - oracle::integrated_g2(0.1, 2.0 / 2.6, 6.0)) < 1e-3);

    CHECK(pump_rate_from_integrated(0.31, 0.1, 6.0) == doctest::Approx(6.0 * 0.69 / 0.21).epsilon(1e-12));
    CHECK(pump_rate_from_integrated(0.31, 0.1, 6.0) == doctest::Approx(19.7).epsilon(1e-3));
    // Decreasing in g2_int: unbounded as g2_int -> g2(0)+, zero at g2_int = 1.
    double previous = pump_rate_from_integrated(0.1 + 1e-9, 0.1, 6.0);
    CHECK(previous > 1e8);
    for (double g = 0.15; g < 0.999; g += 0.05)
    {
        const double width = pump_rate_from_integrated(g, 0.1, 6.0);
        CHECK(width < previous);
        previous = width;
    }
    CHECK(pump_rate_from_integrated(1.0 - 1e-12, 0.1, 6.0) < 1e-10);
    CHECK(error_code_of([] { pump_rate_from_integrated(0.1, 0.1, 6.0); }) == Errc::degenerate_input);
    CHECK(error_code_of([] { pump_rate_from_integrated(0.05, 0.1, 6.0); }) == Errc::degenerate_input);

    std::mt19937_64 rng(104);
    std::uniform_real_distribution<double> unit(0.0, 1.0), width(0.5, 30.0), envelope(1.0, 20.0);
    for (int i = 0; i < 100; ++i)
    {
        const double g0 = 0.9 * unit(rng);
        const double dip = width(rng);
        const PulseParams pp{envelope(rng), 1e6};
        const double integrated = g2_integrated_zero(emitter(2.0 / dip, 1e-6, g0), pp);
        CHECK(pump_rate_from_integrated(integrated, g0, pp.envelope_time) == doctest::Approx(dip).epsilon(1e-9));
    }
}

TEST_CASE("parameter validation")
{
    CHECK(error_code_of([] { g2_cw(emitter(0.0, 1e-6), 1.0); }) == Errc::invalid_parameter);
    CHECK(error_code_of([] { g2_cw(emitter(0.1, -1.0), 1.0); }) == Errc::invalid_parameter);
    CHECK(error_code_of([] { g2_cw(emitter(0.1, 0.0, 1.2), 1.0); }) == Errc::invalid_parameter);
    CHECK(error_code_of([] { excited_population(emitter(0.1, 0.0, 0.0, 1.5), 1.0); }) == Errc::invalid_parameter);
    CHECK(error_code_of([] { excited_population(emitter(0.1, 0.0), -1.0); }) == Errc::invalid_parameter);
    CHECK(error_code_of([] { g2_pulsed(emitter(0.1, 0.0), PulseParams{6.0, 5.0}, 1.0); }) ==
          Errc::invalid_parameter);
    CHECK(error_code_of([] { g2_background_mixed(0.5, BackgroundMix{1.2}); }) == Errc::invalid_parameter);
    CHECK(BackgroundMix::from_intensities(9.0, 1.0).emitter_fraction == doctest::Approx(0.9));
    CHECK(error_code_of([] { BackgroundMix::from_intensities(0.0, 0.0); }) == Errc::invalid_parameter);
}
