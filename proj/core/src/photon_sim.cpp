#include "photonstat/photon_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "photonstat/error.hpp"
#include "photonstat/rng.hpp"
#include "random_engine.hpp"

namespace photonstat
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

// Ground-state waiting time under the pump schedule, sampled by inverting the
// cumulative hazard. Whole pulses are skipped in O(1), so weak pulsed pumping
// costs the same per excitation as strong pumping.
class PumpSchedule
{
public:
    explicit PumpSchedule(const SimConfig &cfg)
        : rate_(cfg.emitter.pump_rate), pulsed_(cfg.pulse.has_value()), shape_(cfg.pulse_shape)
    {
        if (pulsed_)
        {
            period_ = cfg.pulse->period;
            width_ = cfg.pulse->envelope_time;
            decay_ = 2.0 / width_;
            tail_ = std::exp(-decay_ * period_);
            per_pulse_ = shape_ == PulseShape::exponential ? rate_ / decay_ * -std::expm1(-decay_ * period_)
                                                           : rate_ * width_;
        }
    }

    double next_excitation(double t, detail::RandomEngine &rng) const
    {
        if (rate_ <= 0.0)
            return kInf;
        double hazard = rng.exponential();
        if (!pulsed_)
            return t + hazard / rate_;

        double pulse_index = std::floor(t / period_);
        const double phase = std::clamp(t - pulse_index * period_, 0.0, period_);
        double s = 0.0;
        if (shape_ == PulseShape::exponential)
        {
            // Hazard left in this pulse is rate/k (e^{-k phase} - e^{-k period}).
            const double head = std::exp(-decay_ * phase);
            const double remaining = rate_ / decay_ * (head - tail_);
            if (hazard < remaining)
            {
                s = -std::log(head - hazard * decay_ / rate_) / decay_;
            }
            else
            {
                pulse_index += 1.0 + skip_pulses(hazard, remaining);
                s = -std::log(1.0 - hazard * decay_ / rate_) / decay_;
            }
        }
        else
        {
            const double remaining = rate_ * std::max(0.0, width_ - std::min(phase, width_));
            if (hazard < remaining)
            {
                s = std::max(phase, 0.0) + hazard / rate_;
            }
            else
            {
                pulse_index += 1.0 + skip_pulses(hazard, remaining);
                s = hazard / rate_;
            }
        }
        if (!(s < period_))
            s = std::nextafter(period_, 0.0);
        return pulse_index * period_ + s;
    }

private:
    // Consumes the rest of the current pulse and every whole pulse the
    // hazard covers; leaves the hazard to spend in the landing pulse.
    double skip_pulses(double &hazard, double remaining) const
    {
        hazard -= remaining;
        const double skipped = std::floor(hazard / per_pulse_);
        hazard = std::clamp(hazard - skipped * per_pulse_, 0.0, std::nextafter(per_pulse_, 0.0));
        return skipped;
    }

    double rate_;
    bool pulsed_;
    PulseShape shape_;
    double period_ = 0.0;
    double width_ = 0.0;
    double decay_ = 0.0;
    double tail_ = 0.0;
    double per_pulse_ = 0.0;
};

std::size_t reserve_hint(double expected)
{
    constexpr double cap = 1 << 26;
    if (!(expected > 0.0))
        return 16;
    return static_cast<std::size_t>(std::min(expected * 1.05 + 64.0, cap));
}

void append_poisson(std::vector<double> &out, double rate, double duration, detail::RandomEngine &rng)
{
    if (rate <= 0.0)
        return;
    out.reserve(out.size() + reserve_hint(rate * duration));
    double t = rng.exponential() / rate;
    while (t <= duration)
    {
        out.push_back(t);
        t += rng.exponential() / rate;
    }
}

// Enforce the strictly-ascending invariant after merging, nudging exact ties
// by one ulp, then drop anything pushed past the acquisition end.
void make_strictly_ascending(std::vector<double> &times, double duration)
{
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] <= times[i - 1])
            times[i] = std::nextafter(times[i - 1], kInf);
    while (!times.empty() && times.back() > duration)
        times.pop_back();
}

void apply_dead_time(std::vector<double> &times, double dead_time)
{
    if (dead_time <= 0.0 || times.empty())
        return;
    std::size_t kept = 1;
    double last = times.front();
    for (std::size_t i = 1; i < times.size(); ++i)
    {
        if (times[i] - last >= dead_time)
        {
            times[kept++] = times[i];
            last = times[i];
        }
    }
    times.resize(kept);
}

} // namespace

void SimConfig::validate() const
{
    try
    {
        emitter.validate(/*allow_zero_pump=*/true);
        if (pulse)
            pulse->validate();
    }
    catch (const Error &e)
    {
        fail(Errc::invalid_config, e.what());
    }
    auto check = [](bool ok, const char *what) { require(ok, Errc::invalid_config, what); };
    check(std::isfinite(duration) && duration > 0.0, "duration must be > 0");
    check(detection_efficiency >= 0.0 && detection_efficiency <= 1.0,
          "detection efficiency must lie in [0, 1]");
    check(std::isfinite(dark_rate) && dark_rate >= 0.0, "dark rate must be >= 0");
    check(std::isfinite(background_rate) && background_rate >= 0.0, "background rate must be >= 0");
    check(std::isfinite(jitter_sigma) && jitter_sigma >= 0.0, "jitter sigma must be >= 0");
    check(std::isfinite(dead_time) && dead_time >= 0.0, "dead time must be >= 0");
}

void TimestampStream::validate() const
{
    require(std::isfinite(duration) && duration > 0.0, Errc::invalid_parameter,
            "stream duration must be > 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            fail(Errc::unsorted_input, "stream times are not strictly ascending at index " + std::to_string(i));
    if (!times.empty())
        require(times.front() >= 0.0 && times.back() <= duration, Errc::invalid_parameter,
                "stream times fall outside [0, duration]");
}

double steady_state_emission_rate(const EmitterParams &p)
{
    const double total = p.pump_rate + p.decay_rate;
    return total > 0.0 ? p.decay_rate * p.pump_rate / total : 0.0;
}

double mean_emission_rate(const SimConfig &cfg)
{
    cfg.validate();
    if (!cfg.pulse)
        return steady_state_emission_rate(cfg.emitter);

    const double gamma = cfg.emitter.decay_rate;
    const double w = cfg.emitter.pump_rate;
    const double period = cfg.pulse->period;
    const double width = cfg.pulse->envelope_time;
    auto pump = [&](double t) {
        if (cfg.pulse_shape == PulseShape::exponential)
            return w * std::exp(-2.0 * t / width);
        return t < width ? w : 0.0;
    };
    // RK4 over one period; the map rho(0) -> rho(period) is affine, so two
    // runs give its fixed point. The integral of rho rides along.
    // Keep h (w + gamma) well inside the RK4 stability region.
    const int steps = static_cast<int>(std::min(1e8, std::max(2e4, std::ceil(4.0 * period * (w + gamma)))));
    const double h = period / steps;
    auto run = [&](double rho) {
        double area = 0.0;
        auto f = [&](double t, double y) { return pump(t) * (1.0 - y) - gamma * y; };
        for (int i = 0; i < steps; ++i)
        {
            const double t = i * h;
            const double k1 = f(t, rho);
            const double k2 = f(t + 0.5 * h, rho + 0.5 * h * k1);
            const double k3 = f(t + 0.5 * h, rho + 0.5 * h * k2);
            const double k4 = f(t + h, rho + h * k3);
            const double next = rho + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            area += 0.5 * h * (rho + next);
            rho = next;
        }
        return std::pair{rho, area};
    };
    const auto [end0, area0] = run(0.0);
    const auto [end1, area1] = run(1.0);
    const double slope = end1 - end0;
    const double start = slope < 1.0 ? end0 / (1.0 - slope) : 0.0;
    const double area = area0 + start * (area1 - area0);
    return gamma * area / period;
}

std::vector<double> simulate_emission(const SimConfig &cfg)
{
    cfg.validate();
    const double gamma = cfg.emitter.decay_rate;
    const PumpSchedule pump(cfg);
    detail::RandomEngine rng(derive_seed(cfg.seed, Stream::emission));

    std::vector<double> emissions;
    const double rate_bound = cfg.pulse ? std::min(gamma, 1.0 / cfg.pulse->period)
                                        : steady_state_emission_rate(cfg.emitter);
    emissions.reserve(reserve_hint(rate_bound * cfg.duration));

    bool excited = rng.uniform() < cfg.emitter.initial_population;
    double t = 0.0;
    while (true)
    {
        if (!excited)
        {
            t = pump.next_excitation(t, rng);
            if (!(t < cfg.duration))
                break;
        }
        if (gamma <= 0.0)
            break;
        t += rng.exponential() / gamma;
        if (t > cfg.duration)
            break;
        if (!emissions.empty() && t <= emissions.back())
            t = std::nextafter(emissions.back(), kInf);
        emissions.push_back(t);
        excited = false;
    }
    return emissions;
}

HbtStreams detect_hbt(std::span<const double> emissions, const SimConfig &cfg)
{
    cfg.validate();
    for (std::size_t i = 1; i < emissions.size(); ++i)
        if (emissions[i] < emissions[i - 1])
            fail(Errc::unsorted_input, "emission times are not sorted");

    detail::RandomEngine routing(derive_seed(cfg.seed, Stream::routing));
    detail::RandomEngine jitter[2] = {detail::RandomEngine(derive_seed(cfg.seed, Stream::jitter_ch1)),
                                      detail::RandomEngine(derive_seed(cfg.seed, Stream::jitter_ch2))};
    std::vector<double> channel[2];
    const double efficiency = cfg.detection_efficiency;
    for (auto &c : channel)
        c.reserve(reserve_hint(0.5 * efficiency * static_cast<double>(emissions.size())));

    for (const double t : emissions)
    {
        // One draw decides both survival (high 53 bits) and the port (low bit).
        const std::uint64_t u = routing.bits();
        if (efficiency < 1.0 && static_cast<double>(u >> 11) * 0x1.0p-53 >= efficiency)
            continue;
        const int c = static_cast<int>(u & 1U);
        double detected = t;
        if (cfg.jitter_sigma > 0.0)
            detected += cfg.jitter_sigma * jitter[c].normal();
        if (detected < 0.0 || detected > cfg.duration)
            continue;
        channel[c].push_back(detected);
    }

    const double uncorrelated_rate = cfg.dark_rate + cfg.background_rate;
    const Stream uncorrelated_stream[2] = {Stream::uncorrelated_ch1, Stream::uncorrelated_ch2};
    HbtStreams out;
    TimestampStream *targets[2] = {&out.first, &out.second};
    for (int c = 0; c < 2; ++c)
    {
        auto &times = channel[c];
        if (cfg.jitter_sigma > 0.0)
            std::sort(times.begin(), times.end());
        if (uncorrelated_rate > 0.0)
        {
            detail::RandomEngine rng(derive_seed(cfg.seed, uncorrelated_stream[c]));
            std::vector<double> extra;
            append_poisson(extra, uncorrelated_rate, cfg.duration, rng);
            std::vector<double> merged;
            merged.reserve(times.size() + extra.size());
            std::merge(times.begin(), times.end(), extra.begin(), extra.end(), std::back_inserter(merged));
            times = std::move(merged);
        }
        make_strictly_ascending(times, cfg.duration);
        apply_dead_time(times, cfg.dead_time);
        targets[c]->channel = c + 1;
        targets[c]->duration = cfg.duration;
        targets[c]->times = std::move(times);
    }
    return out;
}

std::vector<IntensityPoint> pump_for_intensity_curve(std::span<const double> powers, const SimConfig &cfg,
                                                     const SaturationParams &sat, IntensityMode mode)
{
    try
    {
        sat.validate();
    }
    catch (const Error &e)
    {
        fail(Errc::invalid_config, e.what());
    }
    for (const double p : powers)
        require(std::isfinite(p) && p > 0.0, Errc::invalid_config, "pump powers must be > 0");

    std::vector<IntensityPoint> curve;
    curve.reserve(powers.size());
    if (mode == IntensityMode::closed_form)
    {
        for (const double p : powers)
            curve.push_back({p, sat.intensity(p)});
        return curve;
    }

    cfg.validate();
    require(cfg.emitter.decay_rate > 0.0, Errc::invalid_config,
            "simulated saturation curve needs a nonzero decay rate");
    constexpr double ns_per_s = 1e9;
    for (std::size_t i = 0; i < powers.size(); ++i)
    {
        SimConfig point = cfg;
        point.emitter.pump_rate = cfg.emitter.decay_rate * powers[i] / sat.saturation_power;
        point.seed = derive_seed(cfg.seed, Stream::emission, i + 1);
        const auto streams = simulate_streams(point);
        const double counts = static_cast<double>(streams.first.size() + streams.second.size());
        curve.push_back({powers[i], counts / cfg.duration * ns_per_s + sat.background_slope * powers[i]});
    }
    return curve;
}

} // namespace photonstat
