#ifndef PHOTONSTAT_SATURATION_HPP
#define PHOTONSTAT_SATURATION_HPP

namespace photonstat
{

// I(P) = A P / (P + P_sat) + beta P, with P in uW and I in counts/s.
struct SaturationParams
{
    double amplitude = 1.0;        // A, counts/s
    double saturation_power = 1.0; // P_sat, uW
    double background_slope = 0.0; // beta, counts/s per uW

    void validate() const;

    double emitter_intensity(double power) const
    {
        return amplitude * power / (power + saturation_power);
    }
    double intensity(double power) const
    {
        return emitter_intensity(power) + background_slope * power;
    }
};

} // namespace photonstat

#endif // PHOTONSTAT_SATURATION_HPP
