#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "photonstat/fiber_optics.hpp"
#include "test_util.hpp"

using namespace photonstat;

namespace
{
FiberGeometry fiber(double n, double r_over_a, double a = 1.0, double lambda = 1.0)
{
    return {a, n, r_over_a * a, lambda};
}

// Residual of r sin(phi) = sqrt(a^2 + r^2 - 2 a r cos(phi)) / n.
double critical_residual(const FiberGeometry &g, double phi)
{
    return g.r * std::sin(phi) - std::sqrt(g.a * g.a + g.r * g.r - 2.0 * g.a * g.r * std::cos(phi)) / g.n;
}
} // namespace

TEST_CASE("channeling efficiency")
{
    CHECK(channeling_efficiency(1.0 + 1e-12) == doctest::Approx(0.0));
    CHECK(channeling_efficiency(2.0) == 0.5);
    CHECK(channeling_efficiency(1.45) == doctest::Approx(0.31034).epsilon(1e-5));
    // solid angle 2 pi (1 - 1/n) per direction, two directions, over 4 pi
    CHECK(channeling_efficiency(1.45) == doctest::Approx(2.0 * 2.0 * std::numbers::pi * (1.0 - 1.0 / 1.45) /
                                                        (4.0 * std::numbers::pi)));
    CHECK(error_code_of([] { channeling_efficiency(1.0); }) == Errc::invalid_index);
    CHECK(error_code_of([] { channeling_efficiency(0.7); }) == Errc::invalid_index);
}

TEST_CASE("critical offset and TIR area fraction")
{
    CHECK(critical_offset(fiber(1.45, 0.0)) == doctest::Approx(0.6897).epsilon(1e-4));
    CHECK(critical_offset(fiber(1e12, 0.0)) == doctest::Approx(0.0));
    CHECK(critical_offset(fiber(2.0, 0.0, 2.0)) == 1.0);
    CHECK(tir_area_fraction(fiber(1.45, 0.0)) == doctest::Approx(0.5244).epsilon(1e-4));
    CHECK(tir_area_fraction(fiber(1.0 + 1e-12, 0.0)) == doctest::Approx(0.0));
    CHECK(tir_area_fraction(fiber(std::sqrt(2.0), 0.0)) == doctest::Approx(0.5));
    // high-precision reference values (long double)
    const long double n = 1.45L;
    CHECK(std::abs(channeling_efficiency(1.45) - static_cast<double>(1.0L - 1.0L / n)) < 1e-15);
    CHECK(std::abs(tir_area_fraction(fiber(1.45, 0.0)) - static_cast<double>(1.0L - 1.0L / (n * n))) < 1e-15);
}

TEST_CASE("azimuthal solutions")
{
    const auto g = fiber(1.45, 0.9);
    const auto phi = azimuthal_solutions(g);
    REQUIRE(phi.has_value());
    CHECK(phi->plus == doctest::Approx(0.112).epsilon(1e-2));
    CHECK(phi->minus == doctest::Approx(1.508).epsilon(1e-3));
    CHECK(std::abs(critical_residual(g, phi->plus)) < 1e-9);
    CHECK(std::abs(critical_residual(g, phi->minus)) < 1e-9);
    CHECK(std::abs(incidence_sine(g, phi->plus) - 1.0 / 1.45) < 1e-9);

    CHECK_FALSE(azimuthal_solutions(fiber(1.45, 0.5)).has_value());

    // The boundary r/a = 1/n, approached from both sides.
    const double edge = 1.0 / 1.45;
    CHECK_FALSE(azimuthal_solutions(fiber(1.45, edge - 1e-9)).has_value());
    const auto just = azimuthal_solutions(fiber(1.45, edge + 1e-9));
    REQUIRE(just.has_value());
    CHECK(just->minus - just->plus < 1e-3);
    CHECK(confinement_efficiency(fiber(1.45, edge)) == doctest::Approx(0.0).epsilon(1e-6));

    std::mt19937_64 rng(401);
    std::uniform_real_distribution<double> index(1.1, 2.0), unit(0.0, 1.0);
    for (int i = 0; i < 100; ++i)
    {
        const double n = index(rng);
        const double ra = 1.0 / n + (0.99 - 1.0 / n) * unit(rng);
        const auto gg = fiber(n, ra);
        const auto p = azimuthal_solutions(gg);
        REQUIRE(p.has_value());
        CHECK(0.0 <= p->plus);
        CHECK(p->plus <= p->minus);
        CHECK(p->minus <= std::numbers::pi);
        CHECK(std::abs(critical_residual(gg, p->plus)) < 1e-9);
        CHECK(std::abs(critical_residual(gg, p->minus)) < 1e-9);
    }
}

TEST_CASE("confinement efficiency")
{
    CHECK(confinement_efficiency(fiber(1.45, 0.5)) == 0.0);
    CHECK(confinement_efficiency(fiber(1.45, 0.9)) == doctest::Approx(0.444).epsilon(1e-3));
    CHECK(confinement_efficiency(fiber(1.45, 0.8)) == doctest::Approx(0.339).epsilon(1e-3));
    CHECK(std::abs(confinement_efficiency(fiber(1.45, 0.9)) - oracle::confinement_by_sampling(0.9, 1.45)) < 1e-3);
    CHECK(std::abs(confinement_efficiency(fiber(1.45, 0.8)) - oracle::confinement_by_sampling(0.8, 1.45)) < 1e-3);
    CHECK(std::abs(confinement_efficiency_sampled(fiber(1.45, 0.9), 100000) -
                   confinement_efficiency(fiber(1.45, 0.9))) < 1e-3);
    // Surface point: evaluated as is, slightly above one half.
    CHECK(confinement_efficiency(fiber(1.45, 1.0)) == doctest::Approx(0.5155).epsilon(1e-3));

    for (double n : {1.2, 1.45, 1.9})
    {
        double previous = 0.0;
        for (int i = 0; i <= 1000; ++i)
        {
            const double ra = 1.0 / n + (0.99 - 1.0 / n) * i / 1000.0;
            const double eta = confinement_efficiency(fiber(n, ra));
            CHECK(eta >= previous - 1e-12);
            previous = eta;
        }
    }

    std::mt19937_64 rng(402);
    std::uniform_real_distribution<double> index(1.1, 2.0), offset(0.0, 0.99);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i)
    {
        const double n = index(rng), ra = offset(rng);
        worst = std::max(worst, std::abs(confinement_efficiency(fiber(n, ra)) - oracle::confinement_by_sampling(ra, n)));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("whispering-gallery mode numbers")
{
    const auto m = wgm_mode_numbers(fiber(1.45, 0.0, 1.0, 1.0));
    CHECK(m == std::vector<int>{13, 14, 15, 16, 17, 18});
    CHECK(wgm_mode_numbers(fiber(1.45, 0.0, 1.0, 1e6)).empty());
    for (double s : {0.37, 2.0, 13.0})
        CHECK(wgm_mode_numbers(fiber(1.45, 0.0, s, s)) == m);
    // bounds are strict: 4 pi a / lambda exactly an integer is excluded
    const double lambda = 4.0 * std::numbers::pi / 13.0;
    const auto strict = wgm_mode_numbers(fiber(1.45, 0.0, 1.0, lambda));
    CHECK(std::find(strict.begin(), strict.end(), 13) == strict.end());
}

TEST_CASE("sweeps and geometry validation")
{
    const auto sweep = confinement_sweep(1.45, 0.0, 0.99, 100);
    REQUIRE(sweep.size() == 100);
    CHECK(sweep.front().x == 0.0);
    CHECK(sweep.back().x == doctest::Approx(0.99));
    CHECK(sweep.front().value == 0.0);
    const std::vector<double> lambdas{0.5, 1.0, 100.0};
    const auto modes = mode_count_sweep(1.0, 1.45, lambdas);
    CHECK(modes[1].value == 6.0);
    CHECK(modes[2].value == 0.0);

    CHECK(error_code_of([] { confinement_efficiency(fiber(0.9, 0.5)); }) == Errc::invalid_index);
    CHECK(error_code_of([] { confinement_efficiency({1.0, 1.45, 1.2, 1.0}); }) == Errc::invalid_geometry);
    CHECK(error_code_of([] { confinement_efficiency({-1.0, 1.45, 0.0, 1.0}); }) == Errc::invalid_geometry);
    CHECK(error_code_of([] { wgm_mode_numbers({1.0, 1.45, 0.0, 0.0}); }) == Errc::invalid_geometry);
}
