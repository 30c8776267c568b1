#include "photonstat/fiber_optics.hpp"

#include <cmath>
#include <numbers>

#include "photonstat/error.hpp"

namespace photonstat
{

namespace
{

constexpr double kEdge = 1e-12;

void check_index(double n)
{
    require(std::isfinite(n) && n > 1.0, Errc::invalid_index, "refractive index must be > 1");
}

double checked_acos(double x)
{
    if (x > 1.0 && x <= 1.0 + kEdge)
        x = 1.0;
    if (x < -1.0 && x >= -1.0 - kEdge)
        x = -1.0;
    require(x >= -1.0 && x <= 1.0, Errc::invalid_geometry, "azimuth equation has no real solution");
    return std::acos(x);
}

} // namespace

void FiberGeometry::validate() const
{
    check_index(n);
    require(std::isfinite(a) && a > 0.0, Errc::invalid_geometry, "core radius must be > 0");
    require(std::isfinite(r) && r >= 0.0 && r <= a, Errc::invalid_geometry, "offset must lie in [0, a]");
    require(std::isfinite(lambda) && lambda > 0.0, Errc::invalid_geometry, "wavelength must be > 0");
}

double channeling_efficiency(double n)
{
    check_index(n);
    return 1.0 - 1.0 / n;
}

double critical_offset(const FiberGeometry &g)
{
    g.validate();
    return g.a / g.n;
}

double tir_area_fraction(const FiberGeometry &g)
{
    g.validate();
    return 1.0 - 1.0 / (g.n * g.n);
}

std::optional<AzimuthPair> azimuthal_solutions(const FiberGeometry &g)
{
    g.validate();
    const double n2 = g.n * g.n;
    const double x = g.r / g.a;
    if (!(x > 1.0 / g.n))
        return std::nullopt;
    double disc = 1.0 - n2 * (1.0 - (n2 - 1.0) * x * x);
    if (disc < 0.0 && disc >= -kEdge)
        disc = 0.0;
    require(disc >= 0.0, Errc::invalid_geometry, "negative discriminant beyond the critical offset");
    const double root = std::sqrt(disc);
    const double scale = 1.0 / (n2 * x);
    return AzimuthPair{checked_acos(scale * (1.0 + root)), checked_acos(scale * (1.0 - root))};
}

double confinement_efficiency(const FiberGeometry &g)
{
    const auto phi = azimuthal_solutions(g);
    return phi ? std::abs(phi->minus - phi->plus) / std::numbers::pi : 0.0;
}

double incidence_sine(const FiberGeometry &g, double phi)
{
    const double d2 = g.a * g.a + g.r * g.r - 2.0 * g.a * g.r * std::cos(phi);
    return d2 > 0.0 ? g.r * std::sin(phi) / std::sqrt(d2) : 0.0;
}

double confinement_efficiency_sampled(const FiberGeometry &g, std::size_t samples)
{
    g.validate();
    require(samples > 0, Errc::invalid_parameter, "need at least one sample");
    const double threshold = 1.0 / g.n;
    std::size_t inside = 0;
    for (std::size_t i = 0; i < samples; ++i)
    {
        const double phi = std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
        if (incidence_sine(g, phi) > threshold)
            ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(samples);
}

std::vector<int> wgm_mode_numbers(const FiberGeometry &g)
{
    g.validate();
    // Dividing through by lambda / (2n): 4 pi a / lambda < m < 4 pi n a / lambda.
    const double lo = 4.0 * std::numbers::pi * g.a / g.lambda;
    const double hi = lo * g.n;
    std::vector<int> modes;
    if (!std::isfinite(hi) || hi > 1e9)
        fail(Errc::invalid_geometry, "wavelength too small for a mode count");
    for (auto m = static_cast<long>(std::floor(lo)) + 1; static_cast<double>(m) < hi; ++m)
        if (m >= 1)
            modes.push_back(static_cast<int>(m));
    return modes;
}

std::vector<SweepPoint> confinement_sweep(double n, double from, double to, std::size_t points)
{
    check_index(n);
    require(points >= 2, Errc::invalid_parameter, "sweep needs at least 2 points");
    require(from >= 0.0 && to <= 1.0 && from <= to, Errc::invalid_geometry, "r/a range must lie in [0, 1]");
    std::vector<SweepPoint> out;
    out.reserve(points);
    for (std::size_t i = 0; i < points; ++i)
    {
        const double x = i + 1 == points ? to : from + (to - from) * static_cast<double>(i) / (points - 1.0);
        out.push_back({x, confinement_efficiency({1.0, n, x, 1.0})});
    }
    return out;
}

std::vector<SweepPoint> mode_count_sweep(double a, double n, std::span<const double> wavelengths)
{
    std::vector<SweepPoint> out;
    out.reserve(wavelengths.size());
    for (const double lambda : wavelengths)
        out.push_back({lambda, static_cast<double>(wgm_mode_numbers({a, n, 0.0, lambda}).size())});
    return out;
}

} // namespace photonstat
