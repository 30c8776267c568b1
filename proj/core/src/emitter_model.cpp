#include "photonstat/emitter_model.hpp"

#include <cmath>

#include "photonstat/error.hpp"

namespace photonstat
{

namespace
{
bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }
} // namespace

void EmitterParams::validate(bool allow_zero_pump) const
{
    const bool pump_ok = allow_zero_pump ? pump_rate >= 0.0 : pump_rate > 0.0;
    require(std::isfinite(pump_rate) && pump_ok, Errc::invalid_parameter,
            allow_zero_pump ? "pump rate must be >= 0" : "pump rate must be > 0");
    require(std::isfinite(decay_rate) && decay_rate >= 0.0, Errc::invalid_parameter,
            "decay rate must be >= 0");
    require(in_unit_interval(g2_zero), Errc::invalid_parameter, "g2(0) must lie in [0, 1]");
    require(in_unit_interval(initial_population), Errc::invalid_parameter,
            "initial excited population must lie in [0, 1]");
}

void PulseParams::validate() const
{
    require(std::isfinite(envelope_time) && envelope_time > 0.0, Errc::invalid_parameter,
            "pulse envelope time must be > 0");
    require(std::isfinite(period) && period > envelope_time, Errc::invalid_parameter,
            "pulse period must exceed the envelope time");
}

BackgroundMix BackgroundMix::from_intensities(double emitter, double background)
{
    require(emitter >= 0.0 && background >= 0.0, Errc::invalid_parameter,
            "intensities must be >= 0");
    require(emitter + background > 0.0, Errc::invalid_parameter,
            "emitter and background intensities are both zero");
    return BackgroundMix{emitter / (emitter + background)};
}

void BackgroundMix::validate() const
{
    require(in_unit_interval(emitter_fraction), Errc::invalid_parameter,
            "emitter fraction must lie in [0, 1]");
}

double excited_population(const EmitterParams &p, double tau)
{
    p.validate();
    require(tau >= 0.0, Errc::invalid_parameter, "delay must be >= 0");
    const double total = p.pump_rate + p.decay_rate;
    const double decay = std::exp(-total * tau);
    const double steady = p.pump_rate / total;
    return steady * (1.0 - decay) + p.initial_population * decay;
}

double g2_cw(const EmitterParams &p, double tau)
{
    p.validate();
    const double total = p.pump_rate + p.decay_rate;
    return 1.0 - (1.0 - p.g2_zero) * std::exp(-total * std::abs(tau));
}

double g2_pulsed(const EmitterParams &p, const PulseParams &pulse, double tau)
{
    p.validate();
    pulse.validate();
    require(tau >= 0.0, Errc::invalid_parameter, "delay must be >= 0");
    const double envelope = std::exp(-2.0 * tau / pulse.envelope_time);
    return envelope * (1.0 - (1.0 - p.g2_zero) * std::exp(-p.pump_rate * tau));
}

double g2_background_mixed(double g2, const BackgroundMix &mix)
{
    mix.validate();
    require(g2 >= 0.0, Errc::invalid_parameter, "g2 must be >= 0");
    const double rho2 = mix.emitter_fraction * mix.emitter_fraction;
    return 1.0 - rho2 + rho2 * g2;
}

BackgroundInversion invert_background(double g2_measured, const BackgroundMix &mix)
{
    mix.validate();
    require(mix.emitter_fraction > 0.0, Errc::degenerate_mix,
            "emitter fraction is zero; background inversion undefined");
    const double rho2 = mix.emitter_fraction * mix.emitter_fraction;
    const double value = (g2_measured - 1.0 + rho2) / rho2;
    return BackgroundInversion{value, value < 0.0};
}

double g2_integrated_zero(const EmitterParams &p, const PulseParams &pulse)
{
    p.validate();
    pulse.validate();
    return 1.0 - (1.0 - p.g2_zero) / (1.0 + 0.5 * p.pump_rate * pulse.envelope_time);
}

double pump_rate_from_integrated(double g2_int, double g2_zero, double envelope_time)
{
    require(envelope_time > 0.0, Errc::invalid_parameter, "envelope time must be > 0");
    require(g2_int > g2_zero, Errc::degenerate_input,
            "integrated g2 must exceed g2(0) to solve for the dip width");
    return envelope_time * (1.0 - g2_int) / (g2_int - g2_zero);
}

} // namespace photonstat
