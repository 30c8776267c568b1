#include "photonstat/presets.hpp"

#include <cmath>

#include "photonstat/error.hpp"

namespace photonstat
{

namespace
{

constexpr double kHz = 1e-6; // counts/ns

// Pump amplitude that makes the detected emitter rate equal target, found by
// bisection in log space; the rate is monotone in the pump.
double pump_for_signal(SimConfig cfg, double target)
{
    double lo = 1e-12, hi = 10.0;
    for (int i = 0; i < 200 && hi / lo > 1.0 + 1e-12; ++i)
    {
        const double mid = std::sqrt(lo * hi);
        cfg.emitter.pump_rate = mid;
        (mean_emission_rate(cfg) * cfg.detection_efficiency < target ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
}

void finish(Scenario &s)
{
    s.signal_rate = mean_emission_rate(s.sim) * s.sim.detection_efficiency;
    const double per_channel = background_rate_for_rho(0.5 * s.signal_rate, s.rho);
    s.sim.background_rate = per_channel;
    s.background_rate = 2.0 * per_channel;
}

} // namespace

double background_rate_for_rho(double emitter_rate, double rho)
{
    require(emitter_rate >= 0.0, Errc::invalid_parameter, "emitter rate must be >= 0");
    require(rho > 0.0 && rho <= 1.0, Errc::invalid_parameter, "rho must lie in (0, 1]");
    return emitter_rate * (1.0 - rho) / rho;
}

Scenario cw_dip_scenario(std::uint64_t seed, double duration)
{
    Scenario s;
    s.name = "cw-dip";
    s.sim.emitter.pump_rate = 0.5;
    s.sim.emitter.decay_rate = 1e-6;
    s.sim.duration = duration;
    s.sim.seed = seed;
    s.correlate.window = 100.0;
    s.correlate.bin_width = 1.0;
    s.rho = std::sqrt(0.54);
    finish(s);
    return s;
}

Scenario pulsed_dip_scenario(std::uint64_t seed, double duration, double window)
{
    Scenario s;
    s.name = "pulsed-dip";
    s.sim.emitter.decay_rate = 2e-6;
    s.sim.pulse = PulseParams{6.0, 100.0};
    s.sim.duration = duration;
    s.sim.seed = seed;
    s.sim.emitter.pump_rate = pump_for_signal(s.sim, 1.5 * kHz);
    s.correlate.window = window;
    s.correlate.bin_width = 1.0;
    s.rho = 0.92;
    finish(s);
    return s;
}

Scenario pulse_train_scenario(std::uint64_t seed, double duration)
{
    Scenario s;
    s.name = "pulse-train";
    s.sim.emitter.decay_rate = 1.0 / 6.5;
    s.sim.pulse = PulseParams{6.0, 100.0};
    s.sim.duration = duration;
    s.sim.seed = seed;
    s.sim.emitter.pump_rate = pump_for_signal(s.sim, 0.8 * kHz);
    s.correlate.window = 1000.0;
    s.correlate.bin_width = 1.0;
    s.rho = 0.64;
    finish(s);
    return s;
}

std::vector<std::string_view> scenario_names()
{
    return {"cw-dip", "pulsed-dip", "pulse-train"};
}

Scenario scenario_by_name(std::string_view name, std::uint64_t seed, double duration)
{
    if (name == "cw-dip")
        return cw_dip_scenario(seed, duration);
    if (name == "pulsed-dip")
        return pulsed_dip_scenario(seed, duration);
    if (name == "pulse-train")
        return pulse_train_scenario(seed, duration);
    fail(Errc::invalid_config, "unknown scenario '" + std::string(name) + "'");
}

} // namespace photonstat
