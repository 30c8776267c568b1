#ifndef PHOTONSTAT_PHOTON_SIM_HPP
#define PHOTONSTAT_PHOTON_SIM_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "photonstat/emitter_model.hpp"
#include "photonstat/saturation.hpp"

namespace photonstat
{

enum class PulseShape
{
    // w_p(t) = w_p exp(-2 (t - t_k) / tau_o) after each pulse start t_k.
    exponential,
    // w_p(t) = w_p for t - t_k < tau_o, zero for the rest of the period.
    rectangular,
};

struct SimConfig
{
    EmitterParams emitter;
    std::optional<PulseParams> pulse; // empty: cw pumping
    PulseShape pulse_shape = PulseShape::exponential;
    double duration = 0.0;             // ns
    std::uint64_t seed = 0;
    double detection_efficiency = 1.0; // per emitted photon
    double dark_rate = 0.0;            // per channel, 1/ns
    double background_rate = 0.0;      // per channel, 1/ns
    double jitter_sigma = 0.0;         // ns, Gaussian
    double dead_time = 0.0;            // ns, per channel; 0 disables

    // Throws Errc::invalid_config.
    void validate() const;
};

struct TimestampStream
{
    int channel = 1;
    std::vector<double> times; // strictly ascending, within [0, duration]
    double duration = 0.0;

    std::size_t size() const { return times.size(); }
    bool empty() const { return times.empty(); }
    double rate() const { return duration > 0.0 ? static_cast<double>(times.size()) / duration : 0.0; }

    // Throws Errc::unsorted_input or Errc::invalid_parameter.
    void validate() const;
};

struct HbtStreams
{
    TimestampStream first;
    TimestampStream second;
};

// Event-driven trajectory of the emitter: in the ground state wait for the
// (possibly time-dependent) pump, in the excited state wait Exp(gamma), emit
// and return to the ground state. Returns strictly increasing emission times.
std::vector<double> simulate_emission(const SimConfig &cfg);

// 50/50 beam splitter followed by two detectors. Each photon survives with
// the detection efficiency, picks a channel, gets Gaussian jitter; dark and
// background events are merged in as independent Poisson processes per
// channel. Optional non-paralyzable dead time is applied last.
HbtStreams detect_hbt(std::span<const double> emissions, const SimConfig &cfg);

inline HbtStreams simulate_streams(const SimConfig &cfg)
{
    const auto emissions = simulate_emission(cfg);
    return detect_hbt(emissions, cfg);
}

// Long-run cw emission rate gamma w_p / (w_p + gamma).
double steady_state_emission_rate(const EmitterParams &p);

// Long-run emission rate (1/ns) for the pump schedule of the config: the cw
// closed form, or gamma times the period average of the periodic solution of
// the rate equation under the pulse envelope.
double mean_emission_rate(const SimConfig &cfg);

enum class IntensityMode
{
    closed_form,
    simulated,
};

struct IntensityPoint
{
    double power = 0.0;     // uW
    double intensity = 0.0; // counts/s
};

// Saturation curve with w_p proportional to power, scaled so that
// w_p = gamma at P = P_sat. In simulated mode the amplitude follows from the
// config (detection efficiency times gamma) and sat.amplitude is unused; the
// count rate includes every detected event plus beta P.
std::vector<IntensityPoint> pump_for_intensity_curve(std::span<const double> powers, const SimConfig &cfg,
                                                     const SaturationParams &sat, IntensityMode mode);

} // namespace photonstat

#endif // PHOTONSTAT_PHOTON_SIM_HPP
