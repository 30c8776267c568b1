#ifndef PHOTONSTAT_IO_HPP
#define PHOTONSTAT_IO_HPP

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "photonstat/correlator.hpp"
#include "photonstat/fiber_optics.hpp"
#include "photonstat/fitters.hpp"
#include "photonstat/photon_sim.hpp"

// Text formats. Every writer is deterministic: doubles use the shortest
// round-trip representation except stream times, which are fixed-point with
// 6 decimals (1 fs resolution). Readers throw Errc::parse_error with the
// line number.

namespace photonstat
{

std::string format_double(double value);
std::string format_fixed(double value, int decimals);

// channel,time_ns
void write_stream_csv(std::ostream &out, const TimestampStream &s);
// Every row must carry the same channel. The duration is not part of the
// format and has to come from the sidecar or the caller.
TimestampStream read_stream_csv(std::istream &in, double duration);

// tau_ns,counts,g2,norm_err. g2 and norm_err are left empty when the
// histogram was not normalized.
void write_histogram_csv(std::ostream &out, const CoincidenceHistogram &h);
CoincidenceHistogram read_histogram_csv(std::istream &in);

struct SaturationData
{
    std::vector<IntensityPoint> points;
    std::vector<double> sigmas; // empty unless a sigma_cps column is present
};

// power_uW,intensity_cps[,sigma_cps]
void write_saturation_csv(std::ostream &out, std::span<const IntensityPoint> points,
                          std::span<const double> sigmas = {});
SaturationData read_saturation_csv(std::istream &in);

// x,value
void write_sweep_csv(std::ostream &out, std::span<const SweepPoint> points);

// JSON documents, pretty-printed with 2-space indent.
std::string sim_config_to_json(const SimConfig &cfg);
SimConfig sim_config_from_json(std::string_view text);
// Non-finite sigmas (unidentifiable parameters) are written as null.
std::string fit_result_to_json(const FitResult &fit);
std::string peak_integration_to_json(const PeakIntegration &p);

} // namespace photonstat

#endif // PHOTONSTAT_IO_HPP
