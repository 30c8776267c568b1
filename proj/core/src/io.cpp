#include "photonstat/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <system_error>

#include "json.hpp"
#include "photonstat/error.hpp"

namespace photonstat
{

using nlohmann::ordered_json;

std::string format_double(double value)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int decimals)
{
    char buf[400];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, decimals);
    require(res.ec == std::errc{}, Errc::io_error, "number too large to format");
    return std::string(buf, res.ptr);
}

namespace
{

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true)
    {
        const std::size_t comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos)
            return fields;
        start = comma + 1;
    }
}

[[noreturn]] void parse_fail(std::size_t line, const std::string &what)
{
    fail(Errc::parse_error, "line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char *column)
{
    T value{};
    const char *first = field.data();
    const char *last = first + field.size();
    if (!field.empty() && field.front() == '+')
        ++first;
    const auto res = std::from_chars(first, last, value);
    if (field.empty() || res.ec != std::errc{} || res.ptr != last)
        parse_fail(line, std::string("bad ") + column + " value '" + std::string(field) + "'");
    if constexpr (std::is_floating_point_v<T>)
        if (!std::isfinite(value))
            parse_fail(line, std::string("non-finite ") + column);
    return value;
}

// Reads lines, skipping blank ones; checks the header against the accepted
// column layouts and returns the index of the layout that matched.
class CsvReader
{
public:
    CsvReader(std::istream &in, std::vector<std::vector<std::string_view>> layouts) : in_(in)
    {
        std::string header;
        if (!next_line(header))
            parse_fail(1, "missing header");
        const auto fields = split(header);
        for (std::size_t i = 0; i < layouts.size(); ++i)
            if (fields == layouts[i])
            {
                layout_ = i;
                columns_ = layouts[i].size();
                return;
            }
        parse_fail(line_, "unexpected header '" + std::string(trim(header)) + "'");
    }

    std::size_t layout() const { return layout_; }
    std::size_t line() const { return line_; }

    bool row(std::vector<std::string_view> &fields)
    {
        if (!next_line(current_))
            return false;
        fields = split(current_);
        if (fields.size() != columns_)
            parse_fail(line_, "expected " + std::to_string(columns_) + " fields, got " +
                                  std::to_string(fields.size()));
        return true;
    }

private:
    bool next_line(std::string &out)
    {
        while (std::getline(in_, out))
        {
            ++line_;
            if (!trim(out).empty())
                return true;
        }
        if (in_.bad())
            fail(Errc::io_error, "read failure");
        return false;
    }

    std::istream &in_;
    std::string current_;
    std::size_t line_ = 0;
    std::size_t layout_ = 0;
    std::size_t columns_ = 0;
};

void check_stream(std::ostream &out)
{
    require(static_cast<bool>(out), Errc::io_error, "write failure");
}

ordered_json number_or_null(double v)
{
    return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

} // namespace

void write_stream_csv(std::ostream &out, const TimestampStream &s)
{
    out << "channel,time_ns\n";
    const std::string channel = std::to_string(s.channel) + ",";
    for (const double t : s.times)
        out << channel << format_fixed(t, 6) << '\n';
    check_stream(out);
}

TimestampStream read_stream_csv(std::istream &in, double duration)
{
    CsvReader reader(in, {{"channel", "time_ns"}});
    TimestampStream s;
    s.duration = duration;
    std::vector<std::string_view> f;
    bool first = true;
    while (reader.row(f))
    {
        const int channel = parse_number<int>(f[0], reader.line(), "channel");
        if (first)
            s.channel = channel;
        else if (channel != s.channel)
            parse_fail(reader.line(), "mixed channels in one stream file");
        const double t = parse_number<double>(f[1], reader.line(), "time_ns");
        if (!s.times.empty() && !(t > s.times.back()))
            fail(Errc::unsorted_input,
                 "line " + std::to_string(reader.line()) + ": times are not strictly ascending");
        s.times.push_back(t);
        first = false;
    }
    if (duration > 0.0 && !s.times.empty() && (s.times.front() < 0.0 || s.times.back() > duration))
        fail(Errc::invalid_parameter, "stream times fall outside [0, duration]");
    return s;
}

void write_histogram_csv(std::ostream &out, const CoincidenceHistogram &h)
{
    out << "tau_ns,counts,g2,norm_err\n";
    for (std::size_t k = 0; k < h.size(); ++k)
    {
        out << format_double(h.center(k)) << ',' << h.counts[k] << ',';
        if (h.norm)
            out << format_double((*h.norm)[k]) << ',' << format_double((*h.norm_err)[k]);
        else
            out << ',';
        out << '\n';
    }
    check_stream(out);
}

CoincidenceHistogram read_histogram_csv(std::istream &in)
{
    CsvReader reader(in, {{"tau_ns", "counts", "g2", "norm_err"}});
    std::vector<double> centers, norm, err;
    std::vector<std::uint64_t> counts;
    std::size_t with_norm = 0;
    std::vector<std::string_view> f;
    while (reader.row(f))
    {
        centers.push_back(parse_number<double>(f[0], reader.line(), "tau_ns"));
        counts.push_back(parse_number<std::uint64_t>(f[1], reader.line(), "counts"));
        if (f[2].empty() != f[3].empty())
            parse_fail(reader.line(), "g2 and norm_err must be both present or both empty");
        if (!f[2].empty())
        {
            norm.push_back(parse_number<double>(f[2], reader.line(), "g2"));
            err.push_back(parse_number<double>(f[3], reader.line(), "norm_err"));
            ++with_norm;
        }
    }
    if (centers.size() < 2)
        parse_fail(reader.line(), "histogram needs at least 2 bins");
    if (with_norm != 0 && with_norm != centers.size())
        parse_fail(reader.line(), "g2 column is only partly filled");

    const double width = (centers.back() - centers.front()) / static_cast<double>(centers.size() - 1);
    if (!(width > 0.0))
        parse_fail(reader.line(), "tau_ns must be increasing");
    for (std::size_t k = 1; k < centers.size(); ++k)
        if (std::abs(centers[k] - centers[k - 1] - width) > 1e-6 * width)
            parse_fail(k + 2, "bins are not uniformly spaced");

    CoincidenceHistogram h;
    h.counts = std::move(counts);
    h.bin_edges.resize(centers.size() + 1);
    for (std::size_t k = 0; k < h.bin_edges.size(); ++k)
        h.bin_edges[k] = centers.front() + (static_cast<double>(k) - 0.5) * width;
    h.window = std::max(std::abs(h.bin_edges.front()), std::abs(h.bin_edges.back()));
    for (const auto c : h.counts)
        h.total_pairs += c;
    h.low_statistics = h.total_pairs == 0;
    if (with_norm)
    {
        h.zero_count.resize(h.size());
        for (std::size_t k = 0; k < h.size(); ++k)
            h.zero_count[k] = h.counts[k] == 0;
        h.norm = std::move(norm);
        h.norm_err = std::move(err);
    }
    return h;
}

void write_saturation_csv(std::ostream &out, std::span<const IntensityPoint> points, std::span<const double> sigmas)
{
    require(sigmas.empty() || sigmas.size() == points.size(), Errc::invalid_parameter,
            "sigma column does not match the data");
    out << (sigmas.empty() ? "power_uW,intensity_cps\n" : "power_uW,intensity_cps,sigma_cps\n");
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        out << format_double(points[i].power) << ',' << format_double(points[i].intensity);
        if (!sigmas.empty())
            out << ',' << format_double(sigmas[i]);
        out << '\n';
    }
    check_stream(out);
}

SaturationData read_saturation_csv(std::istream &in)
{
    CsvReader reader(in, {{"power_uW", "intensity_cps"}, {"power_uW", "intensity_cps", "sigma_cps"}});
    SaturationData data;
    std::vector<std::string_view> f;
    while (reader.row(f))
    {
        data.points.push_back({parse_number<double>(f[0], reader.line(), "power_uW"),
                               parse_number<double>(f[1], reader.line(), "intensity_cps")});
        if (reader.layout() == 1)
            data.sigmas.push_back(parse_number<double>(f[2], reader.line(), "sigma_cps"));
    }
    return data;
}

void write_sweep_csv(std::ostream &out, std::span<const SweepPoint> points)
{
    out << "x,value\n";
    for (const auto &p : points)
        out << format_double(p.x) << ',' << format_double(p.value) << '\n';
    check_stream(out);
}

std::string sim_config_to_json(const SimConfig &cfg)
{
    ordered_json j;
    j["pump_rate_per_ns"] = cfg.emitter.pump_rate;
    j["decay_rate_per_ns"] = cfg.emitter.decay_rate;
    j["g2_zero"] = cfg.emitter.g2_zero;
    j["initial_population"] = cfg.emitter.initial_population;
    if (cfg.pulse)
        j["pulse"] = {{"envelope_time_ns", cfg.pulse->envelope_time},
                      {"period_ns", cfg.pulse->period},
                      {"shape", cfg.pulse_shape == PulseShape::exponential ? "exponential" : "rectangular"}};
    else
        j["pulse"] = nullptr;
    j["duration_ns"] = cfg.duration;
    j["seed"] = cfg.seed;
    j["detection_efficiency"] = cfg.detection_efficiency;
    j["dark_rate_per_ns"] = cfg.dark_rate;
    j["background_rate_per_ns"] = cfg.background_rate;
    j["jitter_sigma_ns"] = cfg.jitter_sigma;
    j["dead_time_ns"] = cfg.dead_time;
    return j.dump(2);
}

SimConfig sim_config_from_json(std::string_view text)
{
    ordered_json j;
    try
    {
        j = ordered_json::parse(text);
    }
    catch (const nlohmann::json::exception &e)
    {
        fail(Errc::parse_error, std::string("config JSON: ") + e.what());
    }
    SimConfig cfg;
    try
    {
        auto get = [&](const char *key, double fallback) { return j.contains(key) ? j.at(key).get<double>() : fallback; };
        cfg.emitter.pump_rate = get("pump_rate_per_ns", cfg.emitter.pump_rate);
        cfg.emitter.decay_rate = get("decay_rate_per_ns", cfg.emitter.decay_rate);
        cfg.emitter.g2_zero = get("g2_zero", cfg.emitter.g2_zero);
        cfg.emitter.initial_population = get("initial_population", cfg.emitter.initial_population);
        if (j.contains("pulse") && !j.at("pulse").is_null())
        {
            const auto &p = j.at("pulse");
            PulseParams pulse;
            pulse.envelope_time = p.value("envelope_time_ns", pulse.envelope_time);
            pulse.period = p.value("period_ns", pulse.period);
            const std::string shape = p.value("shape", std::string("exponential"));
            if (shape == "exponential")
                cfg.pulse_shape = PulseShape::exponential;
            else if (shape == "rectangular")
                cfg.pulse_shape = PulseShape::rectangular;
            else
                fail(Errc::invalid_config, "unknown pulse shape '" + shape + "'");
            cfg.pulse = pulse;
        }
        cfg.duration = get("duration_ns", cfg.duration);
        if (j.contains("seed"))
            cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.detection_efficiency = get("detection_efficiency", cfg.detection_efficiency);
        cfg.dark_rate = get("dark_rate_per_ns", cfg.dark_rate);
        cfg.background_rate = get("background_rate_per_ns", cfg.background_rate);
        cfg.jitter_sigma = get("jitter_sigma_ns", cfg.jitter_sigma);
        cfg.dead_time = get("dead_time_ns", cfg.dead_time);
    }
    catch (const nlohmann::json::exception &e)
    {
        fail(Errc::parse_error, std::string("config JSON: ") + e.what());
    }
    return cfg;
}

std::string fit_result_to_json(const FitResult &fit)
{
    ordered_json j;
    ordered_json params = ordered_json::object();
    for (std::size_t i = 0; i < fit.names.size(); ++i)
        params[fit.names[i]] = {{"value", fit.values[i]},
                                {"sigma", number_or_null(fit.sigmas[i])},
                                {"fixed", static_cast<bool>(fit.fixed[i])}};
    j["params"] = params;
    ordered_json derived = ordered_json::object();
    for (const auto &d : fit.derived)
        derived[d.name] = {{"value", number_or_null(d.value)}, {"sigma", number_or_null(d.sigma)}};
    j["derived"] = derived;
    j["residual_norm"] = fit.residual_norm;
    j["gradient_norm"] = fit.gradient_norm;
    j["residual_count"] = fit.residual_count;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["flags"] = fit.flags;
    return j.dump(2);
}

std::string peak_integration_to_json(const PeakIntegration &p)
{
    ordered_json j;
    j["half_width_ns"] = p.half_width;
    j["period_ns"] = p.period;
    j["zero_peak_sum"] = p.zero_peak_sum;
    j["side_peak_orders"] = p.side_peak_orders;
    j["side_peak_sums"] = p.side_peak_sums;
    j["bins_per_peak"] = p.bins_per_peak;
    j["background_per_bin"] = p.background_per_bin;
    j["background_per_peak"] = p.background_per_peak;
    j["g2_int"] = number_or_null(p.g2_int);
    j["sigma"] = number_or_null(p.sigma);
    return j.dump(2);
}

} // namespace photonstat
