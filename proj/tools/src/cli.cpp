#include "photonstat_cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "photonstat/correlator.hpp"
#include "photonstat/error.hpp"
#include "photonstat/fiber_optics.hpp"
#include "photonstat/fitters.hpp"
#include "photonstat/io.hpp"
#include "photonstat/photon_sim.hpp"
#include "photonstat/presets.hpp"

namespace photonstat::cli
{

namespace
{

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char *kVersion = "0.1.0";
constexpr double kNsPerS = 1e9;

// Raised for our own argument checks, reported like a CLI11 parse error.
struct UsageError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

// Fit finished without converging; the report has already been written.
struct NotConverged : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

std::string escape(std::string_view text)
{
    std::string out;
    for (const char c : text)
    {
        if (c == '"' || c == '\\')
            out += '\\';
        if (c == '\n' || c == '\r')
        {
            out += ' ';
            continue;
        }
        out += c;
    }
    return out;
}

void error_line(std::ostream &err, std::string_view code, std::string_view message)
{
    err << "error: code=" << code << " message=\"" << escape(message) << "\"\n";
}

fs::path default_out_dir()
{
    if (const char *env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0')
        return env;
    return ".";
}

fs::path resolve_out_dir(const std::string &flag)
{
    return flag.empty() ? default_out_dir() : fs::path(flag);
}

void write_file(const fs::path &path, const std::function<void(std::ostream &)> &writer)
{
    std::error_code ec;
    if (path.has_parent_path())
        fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::io_error, "cannot open " + path.string() + " for writing");
    writer(out);
    out.flush();
    if (!out)
        fail(Errc::io_error, "failed writing " + path.string());
}

void write_text(const fs::path &path, const std::string &text)
{
    write_file(path, [&](std::ostream &o) { o << text << '\n'; });
}

std::ifstream open_input(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::io_error, "cannot open " + path.string());
    return in;
}

json read_json(const fs::path &path)
{
    auto in = open_input(path);
    try
    {
        return json::parse(in);
    }
    catch (const nlohmann::json::exception &e)
    {
        fail(Errc::parse_error, path.string() + ": " + e.what());
    }
}

// Reader errors carry the line number; prefix the file name.
template <typename F>
auto with_file_context(const fs::path &path, F &&reader)
{
    try
    {
        return reader();
    }
    catch (const Error &e)
    {
        fail(e.code(), path.string() + ": " + e.what());
    }
}

std::string kv(std::string_view key, double value)
{
    return std::string(key) + "=" + format_double(value);
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs
{
    std::string scenario;
    double wp = 0.0;
    double gamma = kDefaultDecayRate;
    double duration = 0.0;
    std::uint64_t seed = 0;
    bool pulsed = false;
    double tau_o = 6.0;
    double period = 100.0;
    std::string pulse_shape = "exponential";
    double efficiency = 1.0;
    double dark_cps = 0.0;
    double background_cps = 0.0;
    double rho = 0.0;
    double jitter = 0.0;
    double dead_time = 0.0;
    std::string out_dir;

    CLI::Option *wp_opt = nullptr, *gamma_opt = nullptr, *duration_opt = nullptr, *pulsed_opt = nullptr,
                *tau_o_opt = nullptr, *period_opt = nullptr, *shape_opt = nullptr, *eff_opt = nullptr,
                *dark_opt = nullptr, *bg_opt = nullptr, *rho_opt = nullptr, *jitter_opt = nullptr,
                *dead_opt = nullptr;
};

void add_simulation_flags(CLI::App &cmd, SimulateArgs &a)
{
    cmd.add_option("--scenario", a.scenario, "Start from a preset: cw-dip, pulsed-dip, pulse-train");
    a.wp_opt = cmd.add_option("--wp", a.wp, "Pump rate w_p (1/ns); the peak rate when pulsed");
    a.gamma_opt = cmd.add_option("--gamma", a.gamma, "Radiative decay rate (1/ns)");
    a.duration_opt = cmd.add_option("--duration", a.duration, "Acquisition time (ns)");
    a.pulsed_opt = cmd.add_flag("--pulsed", a.pulsed, "Pulsed pumping");
    a.tau_o_opt = cmd.add_option("--tau-o", a.tau_o, "Pulse envelope time (ns)");
    a.period_opt = cmd.add_option("--period", a.period, "Pulse period (ns)");
    a.shape_opt = cmd.add_option("--pulse-shape", a.pulse_shape, "exponential or rectangular")
                      ->check(CLI::IsMember({"exponential", "rectangular"}));
    a.eff_opt = cmd.add_option("--efficiency", a.efficiency, "Detection efficiency per photon");
    a.dark_opt = cmd.add_option("--dark-cps", a.dark_cps, "Dark counts per channel (1/s)");
    a.bg_opt = cmd.add_option("--background-cps", a.background_cps, "Background counts per channel (1/s)");
    a.rho_opt = cmd.add_option("--rho", a.rho, "Set the background so the emitter fraction is rho");
    a.jitter_opt = cmd.add_option("--jitter-ns", a.jitter, "Gaussian timing jitter sigma (ns)");
    a.dead_opt = cmd.add_option("--dead-time-ns", a.dead_time, "Detector dead time (ns)");
}

SimConfig build_sim_config(const SimulateArgs &a, std::optional<Scenario> &scenario)
{
    SimConfig cfg;
    if (!a.scenario.empty())
    {
        if (a.duration_opt->count() == 0)
            throw UsageError("--duration is required");
        scenario = scenario_by_name(a.scenario, a.seed, a.duration);
        cfg = scenario->sim;
    }
    else
    {
        if (a.wp_opt->count() == 0 || a.duration_opt->count() == 0)
            throw UsageError("--wp and --duration are required unless --scenario is given");
        cfg.emitter.decay_rate = kDefaultDecayRate;
        cfg.seed = a.seed;
    }
    auto given = [](const CLI::Option *o) { return o->count() > 0; };
    if (given(a.wp_opt))
        cfg.emitter.pump_rate = a.wp;
    if (given(a.gamma_opt))
        cfg.emitter.decay_rate = a.gamma;
    cfg.duration = a.duration;
    if (a.pulsed || given(a.tau_o_opt) || given(a.period_opt))
    {
        PulseParams p = cfg.pulse.value_or(PulseParams{});
        if (given(a.tau_o_opt))
            p.envelope_time = a.tau_o;
        if (given(a.period_opt))
            p.period = a.period;
        cfg.pulse = p;
    }
    if (given(a.shape_opt))
        cfg.pulse_shape = a.pulse_shape == "rectangular" ? PulseShape::rectangular : PulseShape::exponential;
    if (given(a.eff_opt))
        cfg.detection_efficiency = a.efficiency;
    if (given(a.dark_opt))
        cfg.dark_rate = a.dark_cps / kNsPerS;
    if (given(a.bg_opt))
        cfg.background_rate = a.background_cps / kNsPerS;
    if (given(a.jitter_opt))
        cfg.jitter_sigma = a.jitter;
    if (given(a.dead_opt))
        cfg.dead_time = a.dead_time;
    if (given(a.rho_opt))
    {
        if (given(a.bg_opt))
            throw UsageError("--rho and --background-cps are mutually exclusive");
        const double emitter = mean_emission_rate(cfg) * cfg.detection_efficiency;
        cfg.background_rate = background_rate_for_rho(0.5 * emitter, a.rho);
    }
    cfg.validate();
    return cfg;
}

struct SimulationOutput
{
    fs::path ch1, ch2, meta;
};

SimulationOutput run_simulation(const SimConfig &cfg, const std::optional<Scenario> &scenario, const fs::path &dir,
                                std::ostream &out)
{
    const HbtStreams streams = simulate_streams(cfg);
    SimulationOutput files{dir / "ch1.csv", dir / "ch2.csv", dir / "simulate.json"};
    write_file(files.ch1, [&](std::ostream &o) { write_stream_csv(o, streams.first); });
    write_file(files.ch2, [&](std::ostream &o) { write_stream_csv(o, streams.second); });

    json meta;
    meta["command"] = "simulate";
    meta["version"] = kVersion;
    meta["scenario"] = scenario ? json(scenario->name) : json(nullptr);
    meta["config"] = json::parse(sim_config_to_json(cfg));
    meta["expected_emitter_rate_cps"] = mean_emission_rate(cfg) * cfg.detection_efficiency * kNsPerS;
    json list = json::array();
    for (const auto *s : {&streams.first, &streams.second})
        list.push_back({{"file", "ch" + std::to_string(s->channel) + ".csv"},
                        {"channel", s->channel},
                        {"events", s->size()},
                        {"duration_ns", s->duration}});
    meta["streams"] = list;
    write_text(files.meta, meta.dump(2));

    out << "events_ch1=" << streams.first.size() << " events_ch2=" << streams.second.size() << '\n';
    out << "wrote " << files.ch1.string() << ' ' << files.ch2.string() << ' ' << files.meta.string() << '\n';
    return files;
}

// --------------------------------------------------------------- correlate

struct CorrelateArgs
{
    std::vector<std::string> inputs;
    std::string meta;
    double duration = 0.0, duration1 = 0.0, duration2 = 0.0;
    double window = 100.0;
    double bin = 1.0;
    std::string mode = "full";
    unsigned workers = 1;
    bool integrate = false;
    double half_width = 17.5;
    double period = 100.0;
    std::string background = "floor";
    double bg_per_bin = 0.0;
    double floor_distance = 35.0;
    std::string output;
    std::string out_dir;

    CLI::Option *duration_opt = nullptr, *d1_opt = nullptr, *d2_opt = nullptr, *bg_value_opt = nullptr;
};

void add_correlate_flags(CLI::App &cmd, CorrelateArgs &a)
{
    cmd.add_option("--window", a.window, "Largest |delay| kept (ns)");
    cmd.add_option("--bin", a.bin, "Bin width (ns)");
    cmd.add_option("--mode", a.mode, "full or start-stop")->check(CLI::IsMember({"full", "start-stop"}));
    cmd.add_option("--workers", a.workers, "Threads for the sweep; output does not depend on it")
        ->check(CLI::Range(1U, 256U));
    cmd.add_flag("--integrate-peaks", a.integrate, "Report the zero-peak over side-peak ratio");
    cmd.add_option("--peak-halfwidth", a.half_width, "Peak integration half-width (ns)");
    cmd.add_option("--peak-period", a.period, "Pulse period for peak integration (ns)");
    cmd.add_option("--background", a.background, "Peak background: floor, none or value")
        ->check(CLI::IsMember({"floor", "none", "value"}));
    a.bg_value_opt = cmd.add_option("--bg-per-bin", a.bg_per_bin, "Background counts per bin for --background value");
    cmd.add_option("--floor-distance", a.floor_distance, "Min distance of floor bins from any peak (ns)");
}

struct CorrelationOutput
{
    CoincidenceHistogram histogram;
    std::optional<PeakIntegration> peaks;
    json report;
};

CorrelateOptions correlate_options(const CorrelateArgs &a)
{
    CorrelateOptions o;
    o.window = a.window;
    o.bin_width = a.bin;
    o.mode = a.mode == "start-stop" ? CorrelationMode::start_stop : CorrelationMode::full;
    o.workers = a.workers;
    return o;
}

CorrelationOutput correlate_streams(const TimestampStream &s1, const TimestampStream &s2, const CorrelateArgs &a,
                                    std::ostream &out, std::ostream &err)
{
    CorrelationOutput r;
    CoincidenceHistogram h = cross_correlate(s1, s2, correlate_options(a));
    if (h.empty_input)
        err << "warning: empty input stream; histogram is all zero and not normalized\n";
    else
        h = normalize_cw(h);
    if (!h.empty_input && h.low_statistics)
        err << "warning: no coincidences in the window\n";

    json rep;
    rep["command"] = "correlate";
    rep["version"] = kVersion;
    rep["window_ns"] = a.window;
    rep["bin_ns"] = a.bin;
    rep["mode"] = a.mode;
    rep["duration_ns"] = h.duration;
    rep["events"] = {h.events1, h.events2};
    rep["singles_rate_cps"] = {s1.rate() * kNsPerS, s2.rate() * kNsPerS};
    rep["total_pairs"] = h.total_pairs;
    rep["empty_input"] = h.empty_input;
    rep["low_statistics"] = h.low_statistics;

    if (a.integrate)
    {
        PeakIntegrationOptions po;
        po.half_width = a.half_width;
        po.period = a.period;
        json bg;
        bg["method"] = a.background;
        if (a.background == "floor")
        {
            const FloorEstimate f = estimate_interpeak_floor(h, a.period, a.floor_distance);
            po.background_per_bin = f.per_bin;
            po.background_sigma_per_bin = f.sigma;
            bg["floor_bins"] = f.bins;
            bg["floor_distance_ns"] = a.floor_distance;
        }
        else if (a.background == "value")
        {
            if (a.bg_value_opt->count() == 0)
                throw UsageError("--background value needs --bg-per-bin");
            po.background_per_bin = a.bg_per_bin;
        }
        bg["per_bin"] = po.background_per_bin;
        bg["sigma_per_bin"] = po.background_sigma_per_bin;
        r.peaks = integrate_peaks(h, po);
        json peaks = json::parse(peak_integration_to_json(*r.peaks));
        peaks["background"] = bg;
        rep["peak_integration"] = peaks;
        out << kv("g2_int", r.peaks->g2_int) << ' ' << kv("sigma", r.peaks->sigma) << '\n';
    }
    r.histogram = std::move(h);
    r.report = std::move(rep);
    return r;
}

std::pair<double, double> resolve_durations(const CorrelateArgs &a)
{
    const bool pair = a.d1_opt->count() > 0 || a.d2_opt->count() > 0;
    const int sources = (a.meta.empty() ? 0 : 1) + (a.duration_opt->count() > 0 ? 1 : 0) + (pair ? 1 : 0);
    if (sources > 1)
        throw UsageError("give only one of --meta, --duration, --duration1/--duration2");
    if (pair)
    {
        if (a.d1_opt->count() == 0 || a.d2_opt->count() == 0)
            throw UsageError("--duration1 and --duration2 go together");
        return {a.duration1, a.duration2};
    }
    if (a.duration_opt->count() > 0)
        return {a.duration, a.duration};

    fs::path meta = a.meta;
    if (meta.empty())
    {
        // A simulate run leaves its sidecar next to the streams.
        meta = fs::path(a.inputs[0]).parent_path() / "simulate.json";
        if (!fs::exists(meta))
            throw UsageError("stream durations unknown; pass --meta, --duration or --duration1/--duration2");
    }
    const json j = read_json(meta);
    try
    {
        const auto &streams = j.at("streams");
        return {streams.at(0).at("duration_ns").get<double>(), streams.at(1).at("duration_ns").get<double>()};
    }
    catch (const nlohmann::json::exception &e)
    {
        fail(Errc::parse_error, meta.string() + ": " + e.what());
    }
}

TimestampStream load_stream(const fs::path &path, double duration)
{
    auto in = open_input(path);
    return with_file_context(path, [&] { return read_stream_csv(in, duration); });
}

// --------------------------------------------------------------------- fit

struct FitArgs
{
    std::string input;
    std::string model;
    double tau_o = 6.0;
    double fixed_rho = 1.0;
    std::string weighting = "model";
    int max_iterations = 200;
    std::string report;
    std::string out_dir;
    CLI::Option *rho_opt = nullptr;
};

void add_fit_flags(CLI::App &cmd, FitArgs &a)
{
    cmd.add_option("--tau-o", a.tau_o, "Fixed pulse envelope time for --model pulsed (ns)");
    a.rho_opt = cmd.add_option("--fix-rho", a.fixed_rho, "Hold rho at this value (pulsed model)");
    cmd.add_option("--weighting", a.weighting, "model, observed or none")
        ->check(CLI::IsMember({"model", "observed", "none"}));
    cmd.add_option("--max-iterations", a.max_iterations, "Solver iteration budget")->check(CLI::Range(1, 100000));
}

Weighting weighting_of(const std::string &name)
{
    if (name == "observed")
        return Weighting::observed;
    if (name == "none")
        return Weighting::none;
    return Weighting::model;
}

void print_fit(const FitResult &fit, std::ostream &out)
{
    for (std::size_t i = 0; i < fit.names.size(); ++i)
        out << fit.names[i] << '=' << format_double(fit.values[i]) << " sigma=" << format_double(fit.sigmas[i])
            << '\n';
    for (const auto &d : fit.derived)
        out << d.name << '=' << format_double(d.value) << " sigma=" << format_double(d.sigma) << '\n';
    out << "converged=" << (fit.converged ? "true" : "false") << " iterations=" << fit.iterations << '\n';
    for (const auto &f : fit.flags)
        out << "flag=" << f << '\n';
}

json fit_histogram_model(const CoincidenceHistogram &h, const FitArgs &a, std::ostream &out, bool &converged)
{
    if (!h.norm)
        fail(Errc::invalid_parameter, "histogram has no g2 column to fit");
    FitResult fit;
    if (a.model == "cw")
    {
        G2FitOptions o;
        o.weighting = weighting_of(a.weighting);
        o.solver.max_iterations = a.max_iterations;
        fit = fit_g2_cw(h, o);
    }
    else
    {
        PulsedFitOptions o;
        o.weighting = weighting_of(a.weighting);
        o.solver.max_iterations = a.max_iterations;
        if (a.rho_opt != nullptr && a.rho_opt->count() > 0)
            o.fixed_rho = a.fixed_rho;
        fit = fit_g2_pulsed(h, a.tau_o, o);
    }
    print_fit(fit, out);
    converged = fit.converged;
    json j = json::parse(fit_result_to_json(fit));
    json head;
    head["command"] = "fit";
    head["version"] = kVersion;
    head["model"] = a.model;
    if (a.model == "pulsed")
        head["tau_o_ns"] = a.tau_o;
    head["weighting"] = a.weighting;
    head.update(j);
    return head;
}

int cmd_fit(const FitArgs &a, std::ostream &out)
{
    const fs::path dir = resolve_out_dir(a.out_dir);
    const fs::path report = a.report.empty() ? dir / "fit.json" : fs::path(a.report);
    bool converged = false;
    json j;
    if (a.model == "saturation")
    {
        auto in = open_input(a.input);
        const SaturationData data = with_file_context(a.input, [&] { return read_saturation_csv(in); });
        LeastSquaresOptions solver;
        solver.max_iterations = a.max_iterations;
        const SaturationFit sf = fit_saturation(data.points, data.sigmas, solver);
        print_fit(sf.fit, out);
        converged = sf.fit.converged;
        j["command"] = "fit";
        j["version"] = kVersion;
        j["model"] = "saturation";
        j["weighted"] = !data.sigmas.empty();
        j.update(json::parse(fit_result_to_json(sf.fit)));
        const fs::path curve = report.parent_path() / "saturation_emitter.csv";
        write_file(curve, [&](std::ostream &o) { write_saturation_csv(o, sf.emitter_curve); });
        j["emitter_curve_file"] = curve.filename().string();
    }
    else
    {
        auto in = open_input(a.input);
        const CoincidenceHistogram h = with_file_context(a.input, [&] { return read_histogram_csv(in); });
        j = fit_histogram_model(h, a, out, converged);
    }
    write_text(report, j.dump(2));
    out << "wrote " << report.string() << '\n';
    if (!converged)
        throw NotConverged("fit did not converge; report written with converged=false");
    return ok;
}

// ---------------------------------------------------------------- geometry

struct GeometryArgs
{
    double a = 1.0, n = 1.45, r_over_a = 0.0, lambda = 1.0;
    bool sweep = false;
    double from = 0.0, to = 1.0;
    std::size_t points = 101;
    double lambda_from = 0.2, lambda_to = 2.0;
    std::string output;
    CLI::Option *r_opt = nullptr;
};

void emit_sweep(const GeometryArgs &g, const std::vector<SweepPoint> &points, std::ostream &out)
{
    if (g.output.empty())
    {
        write_sweep_csv(out, points);
        return;
    }
    write_file(g.output, [&](std::ostream &o) { write_sweep_csv(o, points); });
    out << "wrote " << g.output << '\n';
}

int cmd_channeling(const GeometryArgs &g, std::ostream &out)
{
    const FiberGeometry fg{g.a, g.n, 0.0, g.lambda};
    out << kv("efficiency", channeling_efficiency(g.n)) << '\n';
    out << kv("critical_offset_over_a", critical_offset(fg) / g.a) << '\n';
    out << kv("tir_area_fraction", tir_area_fraction(fg)) << '\n';
    return ok;
}

int cmd_confinement(const GeometryArgs &g, std::ostream &out)
{
    if (g.sweep)
    {
        emit_sweep(g, confinement_sweep(g.n, g.from, g.to, g.points), out);
        return ok;
    }
    if (g.r_opt->count() == 0)
        throw UsageError("confinement needs --r-over-a or --sweep");
    const FiberGeometry fg{g.a, g.n, g.r_over_a * g.a, g.lambda};
    const auto phi = azimuthal_solutions(fg);
    out << kv("efficiency", confinement_efficiency(fg)) << '\n';
    if (phi)
        out << kv("phi_plus", phi->plus) << ' ' << kv("phi_minus", phi->minus) << '\n';
    return ok;
}

int cmd_modes(const GeometryArgs &g, std::ostream &out)
{
    if (g.sweep)
    {
        if (g.points < 2 || !(g.lambda_from > 0.0) || !(g.lambda_to > g.lambda_from))
            throw UsageError("wavelength sweep needs 0 < --lambda-from < --lambda-to and --points >= 2");
        std::vector<double> lambdas(g.points);
        for (std::size_t i = 0; i < g.points; ++i)
            lambdas[i] = g.lambda_from + (g.lambda_to - g.lambda_from) * static_cast<double>(i) / (g.points - 1.0);
        emit_sweep(g, mode_count_sweep(g.a, g.n, lambdas), out);
        return ok;
    }
    const auto modes = wgm_mode_numbers({g.a, g.n, 0.0, g.lambda});
    if (modes.empty())
        out << "m=none count=0\n";
    else
        out << "m=" << modes.front() << ".." << modes.back() << " count=" << modes.size() << '\n';
    return ok;
}

// ---------------------------------------------------------------- pipeline

struct PipelineArgs
{
    std::string config;
    std::string out_dir;
    unsigned workers = 1;
    bool window_from_config = false;
    SimulateArgs sim;
    CorrelateArgs corr;
    FitArgs fit;
    CLI::Option *workers_opt = nullptr, *seed_opt = nullptr, *model_opt = nullptr, *window_opt = nullptr,
                *bin_opt = nullptr, *integrate_opt = nullptr;
};

template <typename T>
void take(const json &j, const char *key, T &target)
{
    if (j.contains(key))
        target = j.at(key).get<T>();
}

// Applies a pipeline config file: {"simulation": SimConfig JSON | {"scenario",
// "seed", "duration_ns"}, "correlate": {...}, "fit": {...}}. Flags given on the
// command line win.
void apply_pipeline_config(const json &j, PipelineArgs &p, std::optional<SimConfig> &explicit_sim)
{
    try
    {
        if (j.contains("simulation"))
        {
            const json &s = j.at("simulation");
            if (s.contains("scenario"))
            {
                take(s, "scenario", p.sim.scenario);
                if (p.seed_opt->count() == 0)
                    take(s, "seed", p.sim.seed);
                if (p.sim.duration_opt->count() == 0 && s.contains("duration_ns"))
                {
                    p.sim.duration = s.at("duration_ns").get<double>();
                    p.sim.duration_opt->add_result(format_double(p.sim.duration));
                }
            }
            else
            {
                explicit_sim = sim_config_from_json(s.dump());
            }
        }
        if (j.contains("correlate"))
        {
            const json &c = j.at("correlate");
            if (p.window_opt->count() == 0 && c.contains("window_ns"))
            {
                take(c, "window_ns", p.corr.window);
                p.window_from_config = true;
            }
            if (p.bin_opt->count() == 0)
                take(c, "bin_ns", p.corr.bin);
            take(c, "mode", p.corr.mode);
            if (p.integrate_opt->count() == 0)
                take(c, "integrate_peaks", p.corr.integrate);
            take(c, "peak_halfwidth_ns", p.corr.half_width);
            take(c, "peak_period_ns", p.corr.period);
            take(c, "background", p.corr.background);
            take(c, "floor_distance_ns", p.corr.floor_distance);
            if (p.workers_opt->count() == 0)
                take(c, "workers", p.workers);
        }
        if (j.contains("fit"))
        {
            const json &f = j.at("fit");
            if (p.model_opt->count() == 0)
                take(f, "model", p.fit.model);
            take(f, "tau_o_ns", p.fit.tau_o);
            take(f, "weighting", p.fit.weighting);
        }
    }
    catch (const nlohmann::json::exception &e)
    {
        fail(Errc::parse_error, "pipeline config: " + std::string(e.what()));
    }
}

int cmd_pipeline(PipelineArgs &p, std::ostream &out, std::ostream &err)
{
    std::optional<SimConfig> explicit_sim;
    if (!p.config.empty())
        apply_pipeline_config(read_json(p.config), p, explicit_sim);
    if (p.fit.model.empty())
        p.fit.model = "none";
    if (p.fit.model != "none" && p.fit.model != "cw" && p.fit.model != "pulsed")
        throw UsageError("pipeline fit model must be none, cw or pulsed");
    if (p.corr.mode != "full" && p.corr.mode != "start-stop")
        throw UsageError("correlate mode must be full or start-stop");

    std::optional<Scenario> scenario;
    SimConfig cfg;
    if (explicit_sim)
    {
        cfg = *explicit_sim;
        if (p.seed_opt->count() > 0)
            cfg.seed = p.sim.seed;
        cfg.validate();
    }
    else
    {
        if (p.seed_opt->count() == 0 && p.config.empty())
            throw UsageError("--seed is required");
        cfg = build_sim_config(p.sim, scenario);
    }
    if (scenario)
    {
        // Scenario windows apply unless overridden.
        if (p.window_opt->count() == 0 && !p.window_from_config)
            p.corr.window = scenario->correlate.window;
        if (p.fit.model == "pulsed")
            p.fit.tau_o = scenario->envelope_time;
    }
    p.corr.workers = p.workers;

    const fs::path dir = resolve_out_dir(p.out_dir);
    const SimulationOutput files = run_simulation(cfg, scenario, dir, out);
    const TimestampStream s1 = load_stream(files.ch1, cfg.duration);
    const TimestampStream s2 = load_stream(files.ch2, cfg.duration);
    CorrelationOutput c = correlate_streams(s1, s2, p.corr, out, err);
    c.report["inputs"] = {"ch1.csv", "ch2.csv"};
    write_file(dir / "histogram.csv", [&](std::ostream &o) { write_histogram_csv(o, c.histogram); });
    write_text(dir / "correlate.json", c.report.dump(2));

    json resolved;
    resolved["command"] = "pipeline";
    resolved["version"] = kVersion;
    resolved["simulation"] = json::parse(sim_config_to_json(cfg));
    resolved["correlate"] = {{"window_ns", p.corr.window},
                             {"bin_ns", p.corr.bin},
                             {"mode", p.corr.mode},
                             {"integrate_peaks", p.corr.integrate},
                             {"peak_halfwidth_ns", p.corr.half_width},
                             {"peak_period_ns", p.corr.period},
                             {"background", p.corr.background},
                             {"floor_distance_ns", p.corr.floor_distance}};
    resolved["fit"] = {{"model", p.fit.model}, {"tau_o_ns", p.fit.tau_o}, {"weighting", p.fit.weighting}};
    write_text(dir / "pipeline.json", resolved.dump(2));

    if (p.fit.model == "none")
        return ok;
    if (c.histogram.empty_input || !c.histogram.norm)
        fail(Errc::degenerate_input, "nothing to fit: an input stream is empty");
    bool converged = false;
    const json report = fit_histogram_model(c.histogram, p.fit, out, converged);
    write_text(dir / "fit.json", report.dump(2));
    out << "wrote " << (dir / "fit.json").string() << '\n';
    if (!converged)
        throw NotConverged("fit did not converge; report written with converged=false");
    return ok;
}

int exit_code_for(Errc code)
{
    switch (code)
    {
    case Errc::io_error:
        return io_failure;
    case Errc::no_convergence:
        return no_convergence;
    default:
        return usage_or_invalid;
    }
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Photon statistics toolkit: simulate, correlate, fit, geometry", "photonstat"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    std::string out_dir;
    app.add_option("--out", out_dir, std::string("Output directory (default $") + kOutDirEnv + " or .)");

    SimulateArgs sim;
    auto *simulate = app.add_subcommand("simulate", "Simulate two detector timestamp streams");
    add_simulation_flags(*simulate, sim);
    simulate->add_option("--seed", sim.seed, "RNG seed")->required();
    simulate->add_option("--out", sim.out_dir, "Output directory");

    CorrelateArgs corr;
    auto *correlate = app.add_subcommand("correlate", "Coincidence histogram of two stream CSVs");
    correlate->add_option("streams", corr.inputs, "ch1.csv ch2.csv")->required()->expected(2);
    correlate->add_option("--meta", corr.meta, "simulate.json sidecar holding the durations");
    corr.duration_opt = correlate->add_option("--duration", corr.duration, "Duration of both streams (ns)");
    corr.d1_opt = correlate->add_option("--duration1", corr.duration1, "Duration of stream 1 (ns)");
    corr.d2_opt = correlate->add_option("--duration2", corr.duration2, "Duration of stream 2 (ns)");
    add_correlate_flags(*correlate, corr);
    correlate->add_option("--output", corr.output, "Histogram CSV path (default <out>/histogram.csv)");
    correlate->add_option("--out", corr.out_dir, "Output directory");

    FitArgs fit;
    auto *fitcmd = app.add_subcommand("fit", "Fit a histogram or saturation CSV");
    fitcmd->add_option("input", fit.input, "histogram.csv or saturation CSV")->required();
    fitcmd->add_option("--model", fit.model, "cw, pulsed or saturation")
        ->required()
        ->check(CLI::IsMember({"cw", "pulsed", "saturation"}));
    add_fit_flags(*fitcmd, fit);
    fitcmd->add_option("--report", fit.report, "Report path (default <out>/fit.json)");
    fitcmd->add_option("--out", fit.out_dir, "Output directory");

    GeometryArgs geo;
    auto *geometry = app.add_subcommand("geometry", "Ray-optics fiber calculators");
    geometry->require_subcommand(1);
    auto *channeling = geometry->add_subcommand("channeling", "Channeling efficiency, r_c and TIR area share");
    channeling->add_option("--n", geo.n, "Refractive index");
    channeling->add_option("--a", geo.a, "Core radius (um)");
    auto *confinement = geometry->add_subcommand("confinement", "TIR confinement efficiency");
    confinement->add_option("--n", geo.n, "Refractive index");
    geo.r_opt = confinement->add_option("--r-over-a", geo.r_over_a, "Emitter offset over core radius");
    confinement->add_flag("--sweep", geo.sweep, "Table over r/a");
    confinement->add_option("--from", geo.from, "Sweep start (r/a)");
    confinement->add_option("--to", geo.to, "Sweep end (r/a)");
    confinement->add_option("--points", geo.points, "Sweep points");
    confinement->add_option("--output", geo.output, "Write the sweep CSV here instead of stdout");
    auto *modes = geometry->add_subcommand("modes", "Whispering-gallery mode numbers");
    modes->add_option("--a", geo.a, "Core radius (um)");
    modes->add_option("--lambda", geo.lambda, "Vacuum wavelength (um)");
    modes->add_option("--n", geo.n, "Refractive index");
    modes->add_flag("--sweep", geo.sweep, "Mode count over wavelength");
    modes->add_option("--lambda-from", geo.lambda_from, "Sweep start (um)");
    modes->add_option("--lambda-to", geo.lambda_to, "Sweep end (um)");
    modes->add_option("--points", geo.points, "Sweep points");
    modes->add_option("--output", geo.output, "Write the sweep CSV here instead of stdout");

    PipelineArgs pipe;
    auto *pipeline = app.add_subcommand("pipeline", "simulate -> correlate -> fit in one run");
    pipeline->add_option("--config", pipe.config, "Pipeline JSON config");
    add_simulation_flags(*pipeline, pipe.sim);
    pipe.seed_opt = pipeline->add_option("--seed", pipe.sim.seed, "RNG seed");
    pipe.window_opt = pipeline->add_option("--window", pipe.corr.window, "Largest |delay| kept (ns)");
    pipe.bin_opt = pipeline->add_option("--bin", pipe.corr.bin, "Bin width (ns)");
    pipe.integrate_opt = pipeline->add_flag("--integrate-peaks", pipe.corr.integrate, "Peak-integrated g2");
    pipeline->add_option("--peak-halfwidth", pipe.corr.half_width, "Peak integration half-width (ns)");
    pipe.workers_opt = pipeline->add_option("--workers", pipe.workers, "Correlator threads")
                           ->check(CLI::Range(1U, 256U));
    pipe.model_opt = pipeline->add_option("--model", pipe.fit.model, "none, cw or pulsed");
    pipeline->add_option("--tau-o-fit", pipe.fit.tau_o, "Fixed tau_o for the pulsed fit (ns)");
    pipeline->add_option("--out", pipe.out_dir, "Output directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try
    {
        app.parse(reversed);
    }
    catch (const CLI::CallForHelp &)
    {
        out << app.help();
        return ok;
    }
    catch (const CLI::CallForAllHelp &)
    {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    }
    catch (const CLI::CallForVersion &)
    {
        out << kVersion << '\n';
        return ok;
    }
    catch (const CLI::ParseError &e)
    {
        error_line(err, "usage", e.what());
        const CLI::App *failed = &app;
        for (auto *sub : app.get_subcommands())
        {
            failed = sub;
            for (auto *inner : sub->get_subcommands())
                failed = inner;
        }
        err << failed->help();
        return usage_or_invalid;
    }

    auto pick_dir = [&](const std::string &local) { return local.empty() ? out_dir : local; };
    try
    {
        if (simulate->parsed())
        {
            std::optional<Scenario> scenario;
            const SimConfig cfg = build_sim_config(sim, scenario);
            run_simulation(cfg, scenario, resolve_out_dir(pick_dir(sim.out_dir)), out);
            return ok;
        }
        if (correlate->parsed())
        {
            const auto [d1, d2] = resolve_durations(corr);
            const TimestampStream s1 = load_stream(corr.inputs[0], d1);
            TimestampStream s2 = load_stream(corr.inputs[1], d2);
            CorrelationOutput c = correlate_streams(s1, s2, corr, out, err);
            c.report["inputs"] = corr.inputs;
            const fs::path dir = resolve_out_dir(pick_dir(corr.out_dir));
            const fs::path hist = corr.output.empty() ? dir / "histogram.csv" : fs::path(corr.output);
            write_file(hist, [&](std::ostream &o) { write_histogram_csv(o, c.histogram); });
            fs::path sidecar = hist;
            sidecar.replace_extension(".json");
            write_text(sidecar, c.report.dump(2));
            out << "total_pairs=" << c.histogram.total_pairs << '\n';
            out << "wrote " << hist.string() << ' ' << sidecar.string() << '\n';
            return ok;
        }
        if (fitcmd->parsed())
        {
            fit.out_dir = pick_dir(fit.out_dir);
            return cmd_fit(fit, out);
        }
        if (channeling->parsed())
            return cmd_channeling(geo, out);
        if (confinement->parsed())
            return cmd_confinement(geo, out);
        if (modes->parsed())
            return cmd_modes(geo, out);
        if (pipeline->parsed())
        {
            pipe.out_dir = pick_dir(pipe.out_dir);
            return cmd_pipeline(pipe, out, err);
        }
    }
    catch (const UsageError &e)
    {
        error_line(err, "usage", e.what());
        return usage_or_invalid;
    }
    catch (const NotConverged &e)
    {
        error_line(err, to_string(Errc::no_convergence), e.what());
        return no_convergence;
    }
    catch (const Error &e)
    {
        error_line(err, to_string(e.code()), e.what());
        return exit_code_for(e.code());
    }
    catch (const std::exception &e)
    {
        error_line(err, "internal", e.what());
        return usage_or_invalid;
    }
    error_line(err, "usage", "no command given");
    return usage_or_invalid;
}

} // namespace photonstat::cli
