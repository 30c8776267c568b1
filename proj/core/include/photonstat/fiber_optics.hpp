#ifndef PHOTONSTAT_FIBER_OPTICS_HPP
#define PHOTONSTAT_FIBER_OPTICS_HPP

#include <optional>
#include <span>
#include <vector>

// Ray-optics efficiencies of an emitter inside an air-clad cylindrical fiber
// of radius a and index n, sitting at radial offset r. Lengths in um.

namespace photonstat
{

struct FiberGeometry
{
    double a = 1.0;      // core radius
    double n = 1.45;     // refractive index
    double r = 0.0;      // emitter offset from the axis, [0, a]
    double lambda = 1.0; // vacuum wavelength

    // Errc::invalid_index for n <= 1, Errc::invalid_geometry otherwise.
    void validate() const;
};

// Both guided directions together: 1 - 1/n. Throws invalid_index for n <= 1.
double channeling_efficiency(double n);

// Smallest offset a/n at which a ray in the cross-section can be totally
// internally reflected.
double critical_offset(const FiberGeometry &g);

// Share of the cross-section beyond the critical offset, 1 - 1/n^2.
double tir_area_fraction(const FiberGeometry &g);

struct AzimuthPair
{
    double plus = 0.0;  // smaller root
    double minus = 0.0; // larger root
};

// Emission azimuths at which the ray meets the surface exactly at the
// critical angle. Absent for r/a <= 1/n.
std::optional<AzimuthPair> azimuthal_solutions(const FiberGeometry &g);

// |phi_minus - phi_plus| / pi, zero without real solutions.
double confinement_efficiency(const FiberGeometry &g);

// Same quantity by brute force: the share of a midpoint grid of azimuths in
// (0, pi) whose ray meets the surface beyond the critical angle.
double confinement_efficiency_sampled(const FiberGeometry &g, std::size_t samples);

// sin of the incidence angle at the surface for a ray leaving the emitter at
// azimuth phi in the cross-section.
double incidence_sine(const FiberGeometry &g, double phi);

// Integers m with 2 pi a / n < m lambda / (2 n) < 2 pi a, both strict.
std::vector<int> wgm_mode_numbers(const FiberGeometry &g);

struct SweepPoint
{
    double x = 0.0;
    double value = 0.0;
};

// Confinement efficiency over r/a in [from, to], inclusive, `points` samples.
std::vector<SweepPoint> confinement_sweep(double n, double from, double to, std::size_t points);

// Mode count as a function of wavelength for a fixed fiber.
std::vector<SweepPoint> mode_count_sweep(double a, double n, std::span<const double> wavelengths);

} // namespace photonstat

#endif // PHOTONSTAT_FIBER_OPTICS_HPP
