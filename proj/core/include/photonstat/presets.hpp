#ifndef PHOTONSTAT_PRESETS_HPP
#define PHOTONSTAT_PRESETS_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "photonstat/correlator.hpp"
#include "photonstat/photon_sim.hpp"

// Ready-made measurement scenarios with realistic count rates. Rates quoted
// as "signal" are the detected emitter rate summed over both detectors; the
// background is split evenly and tuned so the emitter fraction per channel
// equals rho.

namespace photonstat
{

struct Scenario
{
    std::string name;
    SimConfig sim;
    CorrelateOptions correlate;
    double rho = 1.0;
    double signal_rate = 0.0;     // detected emitter counts/ns, both channels
    double background_rate = 0.0; // uncorrelated counts/ns, both channels
    double envelope_time = 6.0;   // fixed tau_o for pulsed fits
};

// Uncorrelated rate per channel that makes the emitter fraction rho.
double background_rate_for_rho(double emitter_rate, double rho);

// cw pump with 2/w_p = 4 ns, gamma^-1 = 1 ms and rho = 0.735, so the
// background-free dip of an ideal emitter shows up with g2(0) near 0.46.
// 100 ns window, 1 ns bins.
Scenario cw_dip_scenario(std::uint64_t seed, double duration);

// Weak exponential pulses (tau_o = 6 ns, 100 ns period) on a slow emitter
// (gamma^-1 = 0.5 ms), 1.5 kHz signal, rho = 0.92. The 5 us window resolves
// the flat background level while staying short against the emitter's own
// slow recovery (1/(mean pump + gamma), a few hundred us).
Scenario pulsed_dip_scenario(std::uint64_t seed, double duration, double window = 5000.0);

// Same pulses on a fast emitter (gamma^-1 = 6.5 ns), per-pulse excitation
// near 1e-4, 0.8 kHz signal, rho = 0.64, 1 us window: a train of pulse peaks
// whose zero-delay peak carries the re-excitation within one pulse.
Scenario pulse_train_scenario(std::uint64_t seed, double duration);

std::vector<std::string_view> scenario_names();
Scenario scenario_by_name(std::string_view name, std::uint64_t seed, double duration); // throws invalid_config

} // namespace photonstat

#endif // PHOTONSTAT_PRESETS_HPP
