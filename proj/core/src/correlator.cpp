#include "photonstat/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "photonstat/error.hpp"

namespace photonstat
{

DelayBinning::DelayBinning(double window, double bin_width) : window_(window), bin_width_(bin_width)
{
    require(std::isfinite(window) && window > 0.0, Errc::invalid_parameter, "window must be > 0");
    require(std::isfinite(bin_width) && bin_width > 0.0, Errc::invalid_parameter, "bin width must be > 0");
    // Only bins lying wholly inside the window, so none is cut by it. The
    // relative slack keeps e.g. 0.35 / 0.1 from rounding down to 2.
    const double k = std::floor(window / bin_width * (1.0 + 1e-12) - 0.5);
    require(k >= 0.0, Errc::invalid_parameter, "window must be at least half a bin wide");
    half_bins_ = static_cast<std::size_t>(k);
}

double DelayBinning::center(std::size_t k) const
{
    return (static_cast<double>(k) - static_cast<double>(half_bins_)) * bin_width_;
}

std::vector<double> DelayBinning::edges() const
{
    std::vector<double> e(bin_count() + 1);
    for (std::size_t k = 0; k < e.size(); ++k)
        e[k] = (static_cast<double>(k) - static_cast<double>(half_bins_) - 0.5) * bin_width_;
    return e;
}

std::vector<double> CoincidenceHistogram::centers() const
{
    std::vector<double> c(counts.size());
    for (std::size_t k = 0; k < c.size(); ++k)
        c[k] = center(k);
    return c;
}

CoincidenceHistogram &CoincidenceHistogram::operator+=(const CoincidenceHistogram &other)
{
    require(bin_edges == other.bin_edges && window == other.window, Errc::invalid_parameter,
            "cannot add histograms with different binning");
    for (std::size_t k = 0; k < counts.size(); ++k)
        counts[k] += other.counts[k];
    total_pairs += other.total_pairs;
    duration += other.duration;
    events1 += other.events1;
    events2 += other.events2;
    norm.reset();
    norm_err.reset();
    zero_count.clear();
    empty_input = events1 == 0 || events2 == 0;
    low_statistics = total_pairs == 0;
    return *this;
}

namespace
{

// Two-pointer sweep over stream-1 events [begin, end). Delays are formed as
// t2 - t1 exactly as an all-pairs enumeration would form them; floating-point
// subtraction is monotone in each operand, so the pointer never skips a pair
// the binning would accept.
void sweep(std::span<const double> t1s, std::span<const double> t2s, std::size_t begin, std::size_t end,
           const DelayBinning &bins, CorrelationMode mode, std::vector<std::uint64_t> &counts)
{
    if (begin >= end)
        return;
    const double window = bins.window();
    const double first = t1s[begin];
    std::size_t j = static_cast<std::size_t>(
        std::partition_point(t2s.begin(), t2s.end(), [&](double t2) { return t2 - first < -window; }) -
        t2s.begin());

    for (std::size_t i = begin; i < end; ++i)
    {
        const double t1 = t1s[i];
        while (j < t2s.size() && t2s[j] - t1 < -window)
            ++j;
        for (std::size_t k = j; k < t2s.size(); ++k)
        {
            const double delay = t2s[k] - t1;
            if (delay > window)
                break;
            const long bin = bins.index(delay);
            if (bin >= 0)
                ++counts[static_cast<std::size_t>(bin)];
            if (mode == CorrelationMode::start_stop)
                break;
        }
    }
}

bool same_duration(double a, double b)
{
    return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

} // namespace

CoincidenceHistogram cross_correlate(const TimestampStream &s1, const TimestampStream &s2,
                                     const CorrelateOptions &options)
{
    s1.validate();
    s2.validate();
    require(same_duration(s1.duration, s2.duration), Errc::mismatched_duration,
            "streams have different acquisition durations");
    const DelayBinning bins(options.window, options.bin_width);

    CoincidenceHistogram h;
    h.bin_edges = bins.edges();
    h.counts.assign(bins.bin_count(), 0);
    h.window = options.window;
    h.duration = s1.duration;
    h.events1 = s1.size();
    h.events2 = s2.size();
    h.empty_input = s1.empty() || s2.empty();

    const std::span<const double> t1s(s1.times);
    const std::span<const double> t2s(s2.times);
    const std::size_t n = t1s.size();
    const unsigned workers = std::clamp<unsigned>(options.workers, 1U, 256U);
    if (workers == 1 || n < 2 * static_cast<std::size_t>(workers))
    {
        sweep(t1s, t2s, 0, n, bins, options.mode, h.counts);
    }
    else
    {
        std::vector<std::vector<std::uint64_t>> partial(workers, std::vector<std::uint64_t>(h.counts.size(), 0));
        {
            std::vector<std::jthread> pool;
            pool.reserve(workers);
            for (unsigned w = 0; w < workers; ++w)
            {
                const std::size_t begin = n * w / workers;
                const std::size_t end = n * (w + 1) / workers;
                pool.emplace_back([&, begin, end, w] { sweep(t1s, t2s, begin, end, bins, options.mode, partial[w]); });
            }
        }
        for (const auto &p : partial)
            for (std::size_t k = 0; k < h.counts.size(); ++k)
                h.counts[k] += p[k];
    }
    h.total_pairs = std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0});
    h.low_statistics = h.total_pairs == 0;
    return h;
}

CoincidenceHistogram normalize_cw(const CoincidenceHistogram &h, double rate1, double rate2, double duration)
{
    require(rate1 > 0.0 && rate2 > 0.0, Errc::zero_rate, "normalization needs nonzero singles rates");
    require(duration > 0.0, Errc::invalid_parameter, "duration must be > 0");
    const double expected = rate1 * rate2 * h.bin_width() * duration;
    require(expected > 0.0, Errc::zero_rate, "uncorrelated expectation is zero");

    CoincidenceHistogram out = h;
    std::vector<double> norm(h.size()), err(h.size());
    out.zero_count.assign(h.size(), false);
    for (std::size_t k = 0; k < h.size(); ++k)
    {
        const auto c = static_cast<double>(h.counts[k]);
        norm[k] = c / expected;
        err[k] = std::sqrt(std::max(c, 1.0)) / expected;
        out.zero_count[k] = h.counts[k] == 0;
    }
    out.norm = std::move(norm);
    out.norm_err = std::move(err);
    out.low_statistics = h.total_pairs == 0;
    return out;
}

CoincidenceHistogram normalize_cw(const CoincidenceHistogram &h)
{
    require(h.duration > 0.0, Errc::invalid_parameter, "histogram has no acquisition duration");
    return normalize_cw(h, static_cast<double>(h.events1) / h.duration, static_cast<double>(h.events2) / h.duration,
                        h.duration);
}

double background_coincidence_rate(double rate_emitter, double rate_background, double bin_width, double duration)
{
    require(rate_emitter >= 0.0 && rate_background >= 0.0, Errc::invalid_parameter, "rates must be >= 0");
    require(bin_width > 0.0 && duration > 0.0, Errc::invalid_parameter, "bin width and duration must be > 0");
    // (r_em + r_bg)^2 - r_em^2 without the cancellation.
    return (2.0 * rate_emitter + rate_background) * rate_background * bin_width * duration;
}

BackgroundMix intensity_ratio(double rate_emitter, double rate_background)
{
    require(rate_emitter >= 0.0 && rate_background >= 0.0, Errc::invalid_parameter, "rates must be >= 0");
    require(rate_emitter + rate_background > 0.0, Errc::zero_rate, "emitter and background rates are both zero");
    return BackgroundMix{rate_emitter / (rate_emitter + rate_background)};
}

PeakIntegration integrate_peaks(const CoincidenceHistogram &h, const PeakIntegrationOptions &options)
{
    require(options.period > 0.0, Errc::invalid_parameter, "period must be > 0");
    require(options.half_width > 0.0 && options.half_width <= 0.5 * options.period, Errc::invalid_parameter,
            "peak half-width must lie in (0, period / 2]");
    require(options.background_per_bin >= 0.0 && options.background_sigma_per_bin >= 0.0,
            Errc::invalid_parameter, "background must be >= 0");
    require(h.size() > 0, Errc::insufficient_peaks, "empty histogram");

    const double range = std::min(h.window, h.bin_edges.back());
    const double slack = 1e-9 * options.period;
    const int max_order = static_cast<int>(std::floor((range - options.half_width + slack) / options.period));
    require(max_order >= 1, Errc::insufficient_peaks, "histogram window holds fewer than 2 side peaks");

    auto peak_sum = [&](int order, std::size_t &bins) {
        const double center = order * options.period;
        double sum = 0.0;
        bins = 0;
        for (std::size_t k = 0; k < h.size(); ++k)
        {
            if (std::abs(h.center(k) - center) <= options.half_width + slack)
            {
                sum += static_cast<double>(h.counts[k]);
                ++bins;
            }
        }
        return sum;
    };

    PeakIntegration out;
    out.half_width = options.half_width;
    out.period = options.period;
    out.background_per_bin = options.background_per_bin;
    std::size_t bins = 0;
    out.zero_peak_sum = peak_sum(0, bins);
    out.bins_per_peak = bins;
    out.background_per_peak = options.background_per_bin * static_cast<double>(bins);

    double side_total = 0.0;
    for (int order = -max_order; order <= max_order; ++order)
    {
        if (order == 0)
            continue;
        std::size_t side_bins = 0;
        const double s = peak_sum(order, side_bins);
        out.side_peak_sums.push_back(s);
        out.side_peak_orders.push_back(order);
        side_total += s;
    }
    require(out.side_peak_sums.size() >= 2, Errc::insufficient_peaks, "fewer than 2 side peaks in window");

    const auto n = static_cast<double>(out.side_peak_sums.size());
    const double bg = out.background_per_peak;
    const double denominator = side_total / n - bg;
    require(denominator > 0.0, Errc::degenerate_input, "side peaks vanish after background removal");
    out.g2_int = (out.zero_peak_sum - bg) / denominator;

    const double bg_sigma = options.background_sigma_per_bin * static_cast<double>(bins);
    const double var = out.zero_peak_sum + out.g2_int * out.g2_int * side_total / (n * n) +
                       bg_sigma * bg_sigma * (out.g2_int - 1.0) * (out.g2_int - 1.0);
    out.sigma = std::sqrt(var) / denominator;
    return out;
}

FloorEstimate estimate_interpeak_floor(const CoincidenceHistogram &h, double period, double min_distance)
{
    require(period > 0.0, Errc::invalid_parameter, "period must be > 0");
    require(min_distance >= 0.0 && min_distance < 0.5 * period, Errc::invalid_parameter,
            "floor distance must lie in [0, period / 2)");
    FloorEstimate out;
    double sum = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k)
    {
        const double c = h.center(k);
        const double distance = std::abs(c - period * std::round(c / period));
        if (distance >= min_distance)
        {
            sum += static_cast<double>(h.counts[k]);
            ++out.bins;
        }
    }
    require(out.bins > 0, Errc::insufficient_peaks, "no inter-peak bins in histogram");
    out.per_bin = sum / static_cast<double>(out.bins);
    out.sigma = std::sqrt(std::max(sum, 1.0)) / static_cast<double>(out.bins);
    return out;
}

} // namespace photonstat
