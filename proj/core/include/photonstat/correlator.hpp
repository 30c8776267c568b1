#ifndef PHOTONSTAT_CORRELATOR_HPP
#define PHOTONSTAT_CORRELATOR_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "photonstat/emitter_model.hpp"
#include "photonstat/photon_sim.hpp"

namespace photonstat
{

// Uniform delay bins centered on k * bin_width for k = -K..K, K =
// floor(window / bin_width - 1/2), so that zero delay sits at a bin center
// and every bin lies fully inside the window. Only delays with
// |t2 - t1| <= window are counted.
class DelayBinning
{
public:
    DelayBinning(double window, double bin_width);

    double window() const { return window_; }
    double bin_width() const { return bin_width_; }
    std::size_t bin_count() const { return 2 * half_bins_ + 1; }
    double lower_edge() const { return -(static_cast<double>(half_bins_) + 0.5) * bin_width_; }
    double center(std::size_t k) const;
    std::vector<double> edges() const;

    // Bin of a delay, or -1 if it falls outside the histogram.
    long index(double delay) const
    {
        if (delay < -window_ || delay > window_)
            return -1;
        const double x = (delay - lower_edge()) / bin_width_;
        if (x < 0.0)
            return -1;
        const auto k = static_cast<long>(x);
        return k < static_cast<long>(bin_count()) ? k : -1;
    }

private:
    double window_;
    double bin_width_;
    std::size_t half_bins_;
};

struct CoincidenceHistogram
{
    std::vector<double> bin_edges;      // size counts.size() + 1, uniform spacing
    std::vector<std::uint64_t> counts;  // coincidences per bin
    std::uint64_t total_pairs = 0;
    double window = 0.0;                // max |delay|, ns
    double duration = 0.0;              // acquisition time behind the counts, ns
    std::uint64_t events1 = 0;          // singles behind the counts
    std::uint64_t events2 = 0;

    std::optional<std::vector<double>> norm;     // normalized g2 estimate per bin
    std::optional<std::vector<double>> norm_err; // 1 sigma; zero-count bins use the one-count bound
    std::vector<bool> zero_count;                // flags bins whose error bar is one-sided

    bool empty_input = false;    // an input stream had no events
    bool low_statistics = false; // no coincidences at all

    std::size_t size() const { return counts.size(); }
    double bin_width() const { return bin_edges.size() > 1 ? bin_edges[1] - bin_edges[0] : 0.0; }
    double center(std::size_t k) const { return 0.5 * (bin_edges[k] + bin_edges[k + 1]); }
    std::vector<double> centers() const;

    // Sums counts and singles of another acquisition with the same binning.
    CoincidenceHistogram &operator+=(const CoincidenceHistogram &other);
};

enum class CorrelationMode
{
    // Every pair within the window. Needed for multi-peak pulse-train histograms.
    full,
    // Each start in stream 1 pairs only with the nearest stop in stream 2 at
    // or after t1 - window, TAC style.
    start_stop,
};

struct CorrelateOptions
{
    double window = 100.0;   // ns
    double bin_width = 1.0;  // ns
    CorrelationMode mode = CorrelationMode::full;
    unsigned workers = 1;    // result is identical for any worker count
};

// Histogram of delays t2 - t1 between events of stream 1 and stream 2.
CoincidenceHistogram cross_correlate(const TimestampStream &s1, const TimestampStream &s2,
                                     const CorrelateOptions &options);

// norm[k] = counts[k] / (rate1 rate2 bin_width duration).
CoincidenceHistogram normalize_cw(const CoincidenceHistogram &h, double rate1, double rate2, double duration);

// Uses the singles and duration recorded in the histogram.
CoincidenceHistogram normalize_cw(const CoincidenceHistogram &h);

// Expected uncorrelated coincidences per bin from the emitter x background,
// background x emitter and background x background cross terms, per-channel
// rates: (r_tot^2 - r_em^2) bin_width duration.
double background_coincidence_rate(double rate_emitter, double rate_background, double bin_width,
                                   double duration);

BackgroundMix intensity_ratio(double rate_emitter, double rate_background);

struct PeakIntegrationOptions
{
    double half_width = 17.5;         // ns, peaks are summed over about 35 ns
    double period = 100.0;            // ns
    double background_per_bin = 0.0; // expected uncorrelated counts per bin
    double background_sigma_per_bin = 0.0;
};

struct PeakIntegration
{
    double half_width = 0.0;
    double period = 0.0;
    double zero_peak_sum = 0.0;
    std::vector<double> side_peak_sums;
    std::vector<int> side_peak_orders; // k of each side peak at k * period
    std::size_t bins_per_peak = 0;
    double background_per_bin = 0.0;
    double background_per_peak = 0.0;

    double g2_int = 0.0;
    double sigma = 0.0;
};

// Zero-delay pulse peak over the mean of the side peaks, after removing the
// expected uncorrelated background from every peak. Poisson errors.
PeakIntegration integrate_peaks(const CoincidenceHistogram &h, const PeakIntegrationOptions &options);

struct FloorEstimate
{
    double per_bin = 0.0;
    double sigma = 0.0;
    std::size_t bins = 0;
};

// Mean counts per bin in the regions between pulse peaks (bin centers at
// least min_distance from every multiple of the period).
FloorEstimate estimate_interpeak_floor(const CoincidenceHistogram &h, double period, double min_distance);

} // namespace photonstat

#endif // PHOTONSTAT_CORRELATOR_HPP
