#ifndef PHOTONSTAT_EMITTER_MODEL_HPP
#define PHOTONSTAT_EMITTER_MODEL_HPP

// Closed-form population dynamics and second-order correlation models of a
// pumped three-level emitter (ground -> fast intermediate -> radiative upper
// state). The intermediate relaxation is taken as instantaneous, so the
// dynamics reduce to d(rho_e)/dt = w_p (1 - rho_e) - gamma rho_e.
//
// Units: all times in ns, all rates in 1/ns. A 1 ms radiative lifetime is
// therefore gamma = 1e-6 / ns.

namespace photonstat
{

inline constexpr double kDefaultDecayRate = 1.0e-6; // gamma^-1 ~ 1 ms

struct EmitterParams
{
    double pump_rate = 0.0;                    // w_p, 1/ns
    double decay_rate = kDefaultDecayRate;     // gamma, 1/ns
    double g2_zero = 0.0;                      // residual g2(0), [0, 1]
    double initial_population = 0.0;           // rho_e(0), [0, 1]

    // Throws Errc::invalid_parameter. The closed forms need w_p > 0; the
    // simulator also accepts an unpumped emitter.
    void validate(bool allow_zero_pump = false) const;
};

struct PulseParams
{
    double envelope_time = 6.0; // tau_o, ns
    double period = 100.0;      // ns (10 MHz repetition)

    void validate() const;
};

// Fraction rho = I_em / (I_em + I_bg) of the detected intensity that comes
// from the emitter.
struct BackgroundMix
{
    double emitter_fraction = 1.0;

    static BackgroundMix from_intensities(double emitter, double background);
    void validate() const;
};

double excited_population(const EmitterParams &p, double tau);

// Full cw model 1 - (1 - g2(0)) exp(-(w_p + gamma)|tau|). The dip is taken as
// symmetric in tau.
double g2_cw(const EmitterParams &p, double tau);

// Pulsed model: exponential pulse envelope times the reduced cw dip,
// exp(-2 tau / tau_o) [1 - (1 - g2(0)) exp(-w_p tau)], tau >= 0.
double g2_pulsed(const EmitterParams &p, const PulseParams &pulse, double tau);

// g2 seen through an uncorrelated background: 1 - rho^2 + rho^2 g2.
double g2_background_mixed(double g2, const BackgroundMix &mix);

struct BackgroundInversion
{
    double value = 0.0;
    bool negative = false; // noisy input can push the estimate below zero
};

// Inverse of g2_background_mixed. Not clamped.
BackgroundInversion invert_background(double g2_measured, const BackgroundMix &mix);

// Pulse-peak area of the pulsed model normalized by the envelope area:
// 1 - (1 - g2(0)) / (1 + w_p tau_o / 2).
double g2_integrated_zero(const EmitterParams &p, const PulseParams &pulse);

// Solves the integrated relation for the dip width 2/w_p (ns), despite the
// name returning a time rather than a rate:
// tau_o (1 - g2_int) / (g2_int - g2(0)). Requires g2_int > g2(0).
double pump_rate_from_integrated(double g2_int, double g2_zero, double envelope_time);

} // namespace photonstat

#endif // PHOTONSTAT_EMITTER_MODEL_HPP
