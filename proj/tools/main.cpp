// homsim: simulate, correlate, fit, track, tune, and report on pulsed
// two-photon interference experiments from the command line.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "homsim/config.hpp"
#include "homsim/correlator.hpp"
#include "homsim/errors.hpp"
#include "homsim/fit.hpp"
#include "homsim/model.hpp"
#include "homsim/presets.hpp"
#include "homsim/sim.hpp"
#include "homsim/tags.hpp"
#include "homsim/tuning.hpp"

namespace {

#ifndef HOMSIM_VERSION
#define HOMSIM_VERSION "0.0.0"
#endif
constexpr const char* kToolVersion = "homsim " HOMSIM_VERSION;

using homsim::config_error;
using homsim::io_error;
using json = nlohmann::json;

struct Timer {
    std::chrono::steady_clock::time_point start =
        std::chrono::steady_clock::now();
    double elapsed_s() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start)
            .count();
    }
};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory '" + dir +
                           "': " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void write_manifest(const std::string& out_dir, homsim::RunManifest manifest,
                    const Timer& timer) {
    manifest.tool_version = kToolVersion;
    manifest.wall_time_s = timer.elapsed_s();
    homsim::write_text_file(
        join_path(out_dir, "manifest_" + manifest.subcommand + ".json"),
        homsim::to_json(manifest));
}

// Options shared by the generating subcommands.
struct SourceArgs {
    std::string config_path;
    std::string preset_name;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_given = false;

    void attach(CLI::App* cmd, bool need_source) {
        auto* config =
            cmd->add_option("--config", config_path, "JSON configuration file");
        auto* preset =
            cmd->add_option("--preset", preset_name, "built-in scenario name");
        config->excludes(preset);
        if (need_source) {
            // require one of the two; enforced after parse for a clearer
            // message than CLI11's default.
        }
        cmd->add_option("--out", out_dir, "output directory")
            ->capture_default_str();
        cmd->add_option("--seed", seed, "override the random seed")
            ->each([this](const std::string&) { seed_given = true; });
    }

    void require_source() const {
        if (config_path.empty() && preset_name.empty())
            throw config_error("give either --preset or --config");
    }
};

// --- simulate ---------------------------------------------------------------

void run_simulate(const SourceArgs& src) {
    Timer timer;
    src.require_source();
    ensure_dir(src.out_dir);

    homsim::RunManifest manifest;
    manifest.subcommand = "simulate";
    manifest.config_path = src.config_path;
    manifest.preset = src.preset_name;
    if (!src.config_path.empty()) manifest.inputs.push_back(src.config_path);

    bool is_scan = false;
    homsim::SimConfig sim_cfg;
    homsim::ScanConfig scan_cfg;

    if (!src.preset_name.empty()) {
        const homsim::Preset& p = homsim::preset(src.preset_name);
        switch (p.kind) {
            case homsim::Preset::Kind::Sim: sim_cfg = p.sim; break;
            case homsim::Preset::Kind::Scan:
                scan_cfg = p.scan;
                is_scan = true;
                break;
            case homsim::Preset::Kind::Tune:
                throw config_error("preset '" + p.name +
                                   "' is a tuning scenario; use the tune "
                                   "subcommand");
        }
    } else {
        const std::string text = homsim::read_text_file(src.config_path);
        const json peek = [&] {
            try {
                return json::parse(text);
            } catch (const json::parse_error& e) {
                throw config_error(std::string("invalid JSON: ") + e.what());
            }
        }();
        if (peek.is_object() && peek.contains("mode")) {
            sim_cfg = homsim::sim_config_from_json(text);
        } else if (peek.is_object() && peek.contains("emitter")) {
            scan_cfg = homsim::scan_config_from_json(text);
            is_scan = true;
        } else {
            throw config_error(
                "config must contain 'mode' (time-tag simulation) or "
                "'emitter' (excitation scan)");
        }
    }

    if (is_scan) {
        if (src.seed_given) scan_cfg.rng_seed = src.seed;
        manifest.rng_seed = scan_cfg.rng_seed;
        const homsim::ScanResult scan = homsim::simulate_excitation_scan(scan_cfg);
        homsim::write_text_file(join_path(src.out_dir, "scan.csv"),
                                homsim::scan_to_csv(scan));
        manifest.outputs = {"scan.csv"};
        write_manifest(src.out_dir, manifest, timer);
        std::printf("wrote %s (%zu rows x %zu points)\n",
                    join_path(src.out_dir, "scan.csv").c_str(),
                    scan.rows.size(), scan.freq_mhz.size());
        return;
    }

    if (src.seed_given) sim_cfg.rng_seed = src.seed;
    manifest.rng_seed = sim_cfg.rng_seed;
    const auto streams = homsim::simulate(sim_cfg);
    homsim::write_tags(streams[0], join_path(src.out_dir, "ch0.ttag"));
    homsim::write_tags(streams[1], join_path(src.out_dir, "ch1.ttag"));
    homsim::write_text_file(join_path(src.out_dir, "config_used.json"),
                            homsim::to_json(sim_cfg));
    manifest.outputs = {"ch0.ttag", "ch1.ttag", "config_used.json"};
    write_manifest(src.out_dir, manifest, timer);
    std::printf("wrote %s (%zu tags) and %s (%zu tags)\n",
                join_path(src.out_dir, "ch0.ttag").c_str(),
                streams[0].size(), join_path(src.out_dir, "ch1.ttag").c_str(),
                streams[1].size());
}

// --- correlate / track --------------------------------------------------------

struct CorrelateArgs {
    std::string ch0, ch1;
    std::string preset_name;
    std::string out_dir = ".";
    homsim::CorrelationConfig config;
    double period_ns = 40.0;
    int n_max = 13;
    std::optional<double> narrow_halfwidth_ns;

    CLI::Option* opt_bw = nullptr;
    CLI::Option* opt_lag = nullptr;
    CLI::Option* opt_window = nullptr;
    CLI::Option* opt_step = nullptr;
    CLI::Option* opt_period = nullptr;

    void attach(CLI::App* cmd, bool with_windows) {
        cmd->add_option("ch0", ch0, "channel-0 tag file")->required();
        cmd->add_option("ch1", ch1, "channel-1 tag file")->required();
        cmd->add_option("--preset", preset_name,
                        "take binning defaults from this scenario");
        cmd->add_option("--out", out_dir, "output directory")
            ->capture_default_str();
        opt_bw = cmd->add_option("--bin-width", config.bin_width_ps,
                                 "histogram bin width, ps")
                     ->capture_default_str();
        opt_lag = cmd->add_option("--max-lag", config.max_lag_ns,
                                  "maximum delay magnitude, ns")
                      ->capture_default_str();
        if (with_windows) {
            opt_window = cmd->add_option("--window", config.window_length_s,
                                         "sliding window length, s")
                             ->capture_default_str();
            opt_step = cmd->add_option("--step", config.window_step_s,
                                       "sliding window step, s")
                           ->capture_default_str();
            opt_period =
                cmd->add_option("--period", period_ns, "pulse period, ns")
                    ->capture_default_str();
            cmd->add_option("--n-max", n_max, "outermost side peak used")
                ->capture_default_str();
            double narrow = 0.0;
            cmd->add_option("--narrow-halfwidth", narrow,
                            "post-selection halfwidth, ns")
                ->each([this](const std::string& v) {
                    narrow_halfwidth_ns = std::stod(v);
                });
        }
    }

    // Preset supplies defaults; explicit flags win.
    void apply_preset() {
        if (preset_name.empty()) return;
        const homsim::Preset& p = homsim::preset(preset_name);
        if (p.kind != homsim::Preset::Kind::Sim)
            throw config_error("preset '" + p.name +
                               "' does not describe a time-tag experiment");
        if (opt_bw && !opt_bw->count()) config.bin_width_ps = p.correlation.bin_width_ps;
        if (opt_lag && !opt_lag->count()) config.max_lag_ns = p.correlation.max_lag_ns;
        if (opt_window && !opt_window->count())
            config.window_length_s = p.correlation.window_length_s;
        if (opt_step && !opt_step->count())
            config.window_step_s = p.correlation.window_step_s;
        if (opt_period && !opt_period->count()) period_ns = p.sim.period_ns;
    }
};

void run_correlate(CorrelateArgs& args) {
    Timer timer;
    args.apply_preset();
    args.config.validate();
    ensure_dir(args.out_dir);

    const homsim::CorrelationHistogram hist =
        homsim::cross_correlate_files(args.ch0, args.ch1, args.config);
    homsim::write_text_file(join_path(args.out_dir, "histogram.csv"),
                            homsim::histogram_to_csv(hist));

    homsim::RunManifest manifest;
    manifest.subcommand = "correlate";
    manifest.preset = args.preset_name;
    manifest.inputs = {args.ch0, args.ch1};
    manifest.outputs = {"histogram.csv"};
    write_manifest(args.out_dir, manifest, timer);
    std::printf("wrote %s (%zu bins of %lld ps)\n",
                join_path(args.out_dir, "histogram.csv").c_str(), hist.n_bins(),
                static_cast<long long>(hist.bin_width_ps));
}

void run_track(CorrelateArgs& args) {
    Timer timer;
    args.apply_preset();
    args.config.validate();
    if (!(args.period_ns > 0)) throw config_error("--period must be positive");
    ensure_dir(args.out_dir);

    // Keep every requested peak inside the histogram span.
    const int span_max = static_cast<int>(
        std::floor(args.config.max_lag_ns / args.period_ns - 0.5 + 1e-9));
    const int n_max = std::min(args.n_max, span_max);
    if (n_max < 2)
        throw config_error("--max-lag spans too few pulse periods for "
                           "side-peak normalization");

    const homsim::VisibilitySeries series = homsim::sliding_visibility_files(
        args.ch0, args.ch1, args.config, args.period_ns, n_max,
        args.narrow_halfwidth_ns);
    homsim::write_text_file(join_path(args.out_dir, "series.csv"),
                            homsim::series_to_csv(series));

    homsim::RunManifest manifest;
    manifest.subcommand = "track";
    manifest.preset = args.preset_name;
    manifest.inputs = {args.ch0, args.ch1};
    manifest.outputs = {"series.csv"};
    write_manifest(args.out_dir, manifest, timer);
    std::printf("wrote %s (%zu windows)\n",
                join_path(args.out_dir, "series.csv").c_str(), series.size());
}

// --- fit ----------------------------------------------------------------------

struct FitArgs {
    std::string input;
    std::string model = "hom";
    std::string preset_name;
    std::string out_dir = ".";
    double period_ns = 40.0;
    double jitter_sigma_ps = 0.0;
    std::vector<std::string> fixes;

    CLI::Option* opt_model = nullptr;
    CLI::Option* opt_period = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("input", input, "histogram.csv or scan.csv")
            ->required();
        opt_model = cmd->add_option("--model", model,
                                    "fit model: hom, hbt, or lines")
                        ->capture_default_str();
        cmd->add_option("--preset", preset_name,
                        "take model and period defaults from this scenario");
        cmd->add_option("--out", out_dir, "output directory")
            ->capture_default_str();
        opt_period = cmd->add_option("--period", period_ns, "pulse period, ns")
                         ->capture_default_str();
        cmd->add_option("--jitter-sigma", jitter_sigma_ps,
                        "detector-response sigma convolved into the model, ps")
            ->capture_default_str();
        cmd->add_option("--fix", fixes,
                        "hold a parameter fixed, e.g. --fix detuning_mhz=354 "
                        "(repeatable)");
    }
};

homsim::HomFitOptions parse_fixes(const std::vector<std::string>& fixes,
                                  double period_ns, double conv_sigma_ps) {
    homsim::HomFitOptions opt;
    opt.period_ns = period_ns;
    opt.conv_sigma_ps = conv_sigma_ps;
    for (const std::string& fix : fixes) {
        const std::size_t eq = fix.find('=');
        if (eq == std::string::npos)
            throw config_error("--fix expects NAME=VALUE, got '" + fix + "'");
        const std::string name = fix.substr(0, eq);
        char* end = nullptr;
        const std::string value_str = fix.substr(eq + 1);
        const double value = std::strtod(value_str.c_str(), &end);
        if (end == value_str.c_str() || *end != '\0')
            throw config_error("--fix " + name + ": bad value '" + value_str +
                               "'");
        if (name == "detuning_mhz") opt.detuning_mhz = value;
        else if (name == "v_factor") opt.v_factor = value;
        else if (name == "t1_1_ns") opt.t1_1_ns = value;
        else if (name == "t1_2_ns") opt.t1_2_ns = value;
        else if (name == "t2_1_ns") opt.t2_1_ns = value;
        else if (name == "t2_2_ns") opt.t2_2_ns = value;
        else if (name == "sigma_joint_mhz") opt.sigma_joint_mhz = value;
        else
            throw config_error(
                "--fix " + name +
                ": unknown parameter (expected one of detuning_mhz, v_factor, "
                "t1_1_ns, t1_2_ns, t2_1_ns, t2_2_ns, sigma_joint_mhz)");
    }
    return opt;
}

void run_fit(FitArgs& args) {
    Timer timer;
    if (!args.preset_name.empty()) {
        const homsim::Preset& p = homsim::preset(args.preset_name);
        if (!args.opt_model->count()) {
            if (p.fit_model.empty())
                throw config_error("preset '" + p.name +
                                   "' has no standard fit model; pass --model");
            args.model = p.fit_model;
        }
        if (!args.opt_period->count() && p.kind == homsim::Preset::Kind::Sim)
            args.period_ns = p.sim.period_ns;
    }
    ensure_dir(args.out_dir);

    homsim::RunManifest manifest;
    manifest.subcommand = "fit";
    manifest.preset = args.preset_name;
    manifest.inputs = {args.input};

    const std::string text = homsim::read_text_file(args.input);

    if (args.model == "hom") {
        const homsim::CorrelationHistogram hist =
            homsim::histogram_from_csv(text);
        const homsim::HomFitOptions opt =
            parse_fixes(args.fixes, args.period_ns, args.jitter_sigma_ps);
        const homsim::HomFitResult r = homsim::fit_hom(hist, opt);
        homsim::write_text_file(join_path(args.out_dir, "fit.json"),
                                homsim::to_json(r));
        homsim::write_text_file(join_path(args.out_dir, "fit.csv"),
                                homsim::to_csv(r));
        manifest.outputs = {"fit.json", "fit.csv"};
        write_manifest(args.out_dir, manifest, timer);
        std::printf(
            "hom fit: detuning %.6g +- %.2g MHz, v %.4g +- %.2g, "
            "chi2/dof %.4g%s%s\n",
            r.detuning_mhz, r.detuning_err_mhz, r.v_factor, r.v_factor_err,
            r.chi2_per_dof, r.resolution_limited ? " [resolution-limited]" : "",
            r.detuning_unidentifiable ? " [detuning unidentifiable]" : "");
    } else if (args.model == "hbt") {
        if (!args.fixes.empty())
            throw config_error("--fix applies to the hom model only");
        const homsim::CorrelationHistogram hist =
            homsim::histogram_from_csv(text);
        const homsim::HbtFitResult r = homsim::fit_hbt(hist, args.period_ns);
        homsim::write_text_file(join_path(args.out_dir, "fit.json"),
                                homsim::to_json(r));
        homsim::write_text_file(join_path(args.out_dir, "fit.csv"),
                                homsim::to_csv(r));
        manifest.outputs = {"fit.json", "fit.csv"};
        write_manifest(args.out_dir, manifest, timer);
        std::printf(
            "hbt fit: t1 %.6g +- %.2g ns, g2(0) area %.4g +- %.2g, "
            "chi2/dof %.4g\n",
            r.t1_ns, r.t1_err_ns, r.g2_zero_area, r.g2_zero_err,
            r.chi2_per_dof);
    } else if (args.model == "lines") {
        if (!args.fixes.empty())
            throw config_error("--fix applies to the hom model only");
        const homsim::ScanResult scan = homsim::scan_from_csv(text);
        std::vector<homsim::LorentzianFit> fits;
        std::string lines_csv =
            "row,center_mhz,center_err_mhz,fwhm_mhz,fwhm_err_mhz,amplitude,"
            "offset,chi2_per_dof\n";
        char buf[256];
        std::size_t n_failed = 0;
        for (std::size_t r = 0; r < scan.rows.size(); ++r) {
            try {
                const homsim::LorentzianFit f =
                    homsim::fit_lorentzian(scan.freq_mhz, scan.rows[r]);
                std::snprintf(buf, sizeof(buf),
                              "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                              r, f.center_mhz, f.center_err_mhz, f.fwhm_mhz,
                              f.fwhm_err_mhz, f.amplitude, f.offset,
                              f.chi2_per_dof);
                lines_csv += buf;
                fits.push_back(f);
            } catch (const homsim::numerical_error&) {
                ++n_failed;
            }
        }
        const homsim::WanderingStats stats = homsim::wandering_stats(fits);
        double mean_fwhm = 0.0;
        for (const homsim::LorentzianFit& f : fits) mean_fwhm += f.fwhm_mhz;
        mean_fwhm /= static_cast<double>(fits.size());

        json j;
        j["model"] = "lines";
        j["n_rows"] = scan.rows.size();
        j["n_fitted"] = fits.size();
        j["n_failed"] = n_failed;
        j["wander_sigma_mhz"] = stats.sigma_mhz;
        j["wander_sigma_err_mhz"] = stats.sigma_err_mhz;
        j["mean_fwhm_mhz"] = mean_fwhm;
        std::string fit_csv = "parameter,value,error\n";
        std::snprintf(buf, sizeof(buf), "wander_sigma_mhz,%.10g,%.10g\n",
                      stats.sigma_mhz, stats.sigma_err_mhz);
        fit_csv += buf;
        std::snprintf(buf, sizeof(buf), "mean_fwhm_mhz,%.10g,0\n", mean_fwhm);
        fit_csv += buf;

        homsim::write_text_file(join_path(args.out_dir, "fit.json"),
                                j.dump(2) + "\n");
        homsim::write_text_file(join_path(args.out_dir, "fit.csv"), fit_csv);
        homsim::write_text_file(join_path(args.out_dir, "lines.csv"), lines_csv);
        manifest.outputs = {"fit.json", "fit.csv", "lines.csv"};
        write_manifest(args.out_dir, manifest, timer);
        std::printf(
            "line fits: %zu/%zu rows, wander sigma %.4g +- %.2g MHz, mean "
            "fwhm %.4g MHz\n",
            fits.size(), scan.rows.size(), stats.sigma_mhz,
            stats.sigma_err_mhz, mean_fwhm);
    } else {
        throw config_error("--model must be hom, hbt, or lines");
    }
}

// --- tune ---------------------------------------------------------------------

int run_tune(const SourceArgs& src) {
    Timer timer;
    src.require_source();
    ensure_dir(src.out_dir);

    homsim::TuneSetup setup;
    if (!src.preset_name.empty()) {
        const homsim::Preset& p = homsim::preset(src.preset_name);
        if (p.kind != homsim::Preset::Kind::Tune)
            throw config_error("preset '" + p.name +
                               "' is not a tuning scenario");
        setup = p.tune;
    } else {
        setup = homsim::tune_setup_from_json(
            homsim::read_text_file(src.config_path));
    }
    if (src.seed_given) setup.rng_seed = src.seed;

    homsim::Rng rng(setup.rng_seed);
    const homsim::TuneResult result =
        homsim::auto_tune(setup.emitter1, setup.emitter2, setup.shift,
                          setup.probe_noise_mhz, setup.step_dose, rng,
                          setup.options);

    homsim::write_text_file(join_path(src.out_dir, "transcript.csv"),
                            homsim::to_csv(result));
    homsim::RunManifest manifest;
    manifest.subcommand = "tune";
    manifest.config_path = src.config_path;
    manifest.preset = src.preset_name;
    manifest.rng_seed = setup.rng_seed;
    if (!src.config_path.empty()) manifest.inputs.push_back(src.config_path);
    manifest.outputs = {"transcript.csv"};
    write_manifest(src.out_dir, manifest, timer);

    if (!result.success) {
        std::fprintf(stderr, "tuning failed: %s\n",
                     result.failure_reason.c_str());
        return 3;
    }
    std::printf(
        "tuned in %d steps: total dose %.4g, final measured detuning %.4g "
        "MHz\n",
        result.n_steps, result.total_dose,
        result.transcript.back().measured_detuning_mhz);
    return 0;
}

// --- report -------------------------------------------------------------------

struct Summary {
    std::string text;
    std::string csv = "key,value\n";

    void line(const std::string& s) { text += s + "\n"; }
    void kv(const std::string& key, const std::string& value) {
        csv += key + "," + value + "\n";
    }
    void kv(const std::string& key, double value) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.10g", value);
        kv(key, buf);
    }
};

std::string fmt_g(double v, const char* spec = "%.6g") {
    char buf[48];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

void report_fit(const std::string& path, Summary& s) {
    json j;
    try {
        j = json::parse(homsim::read_text_file(path));
    } catch (const json::parse_error&) {
        s.line("[fit] unreadable fit.json");
        return;
    }
    const std::string kind = j.contains("model") && j["model"].is_string()
                                 ? j["model"].get<std::string>()
                                 : "unknown";
    s.line("[fit:" + kind + "]");
    s.kv("fit.model", kind);
    if (j.contains("parameters") && j["parameters"].is_object()) {
        for (auto it = j["parameters"].begin(); it != j["parameters"].end();
             ++it) {
            if (!it->is_object() || !it->contains("value")) continue;
            const double value = (*it)["value"].get<double>();
            const double error =
                it->contains("error") ? (*it)["error"].get<double>() : 0.0;
            s.line("  " + it.key() + " = " + fmt_g(value) + " +- " +
                   fmt_g(error));
            s.kv("fit." + it.key(), value);
            s.kv("fit." + it.key() + "_err", error);
        }
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it->is_number()) {
            s.line("  " + it.key() + " = " + fmt_g(it->get<double>()));
            s.kv("fit." + it.key(), it->get<double>());
        } else if (it->is_boolean()) {
            const std::string v = it->get<bool>() ? "true" : "false";
            s.line("  " + it.key() + " = " + v);
            s.kv("fit." + it.key(), v);
        }
    }
}

// Mean visibility plus drop-out windows more than 3 sigma below the mean.
void report_series(const std::string& path, Summary& s,
                   double* mean_out = nullptr) {
    const std::string text = homsim::read_text_file(path);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> vis;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double t, v, ve, f, fe;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &t, &v, &ve, &f,
                        &fe) == 5)
            vis.push_back(v);
    }
    if (vis.empty()) {
        s.line("[series] no windows");
        return;
    }
    double mean = 0.0;
    for (double v : vis) mean += v;
    mean /= static_cast<double>(vis.size());
    double var = 0.0;
    for (double v : vis) var += (v - mean) * (v - mean);
    const double sd =
        vis.size() > 1 ? std::sqrt(var / static_cast<double>(vis.size() - 1))
                       : 0.0;
    std::size_t anomalies = 0;
    for (double v : vis)
        if (sd > 0 && v < mean - 3.0 * sd) ++anomalies;
    s.line("[series] windows=" + std::to_string(vis.size()) +
           " mean_visibility=" + fmt_g(mean) + " std=" + fmt_g(sd) +
           " anomalies_3sigma=" + std::to_string(anomalies));
    s.kv("series.windows", static_cast<double>(vis.size()));
    s.kv("series.mean_visibility", mean);
    s.kv("series.std_visibility", sd);
    s.kv("series.anomalies_3sigma", static_cast<double>(anomalies));
    if (mean_out) *mean_out = mean;
}

void report_transcript(const std::string& path, Summary& s) {
    const std::string text = homsim::read_text_file(path);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    int steps = 0;
    double dose = 0.0, detuning = 0.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int step;
        double d, n1, n2, m;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &step, &d, &n1,
                        &n2, &m) == 5) {
            steps = step;
            dose = d;
            detuning = m;
        }
    }
    s.line("[tune] steps=" + std::to_string(steps) + " total_dose=" +
           fmt_g(dose) + " final_measured_detuning_mhz=" + fmt_g(detuning));
    s.kv("tune.steps", steps);
    s.kv("tune.total_dose", dose);
    s.kv("tune.final_measured_detuning_mhz", detuning);
}

struct ReportArgs {
    std::string run_dir;
    std::string out_dir;
};

void run_report(const ReportArgs& args) {
    Timer timer;
    const std::string out_dir =
        args.out_dir.empty() ? args.run_dir : args.out_dir;
    if (!std::filesystem::is_directory(args.run_dir))
        throw io_error("run directory not found: " + args.run_dir);
    ensure_dir(out_dir);

    Summary s;
    s.line("run directory: " + args.run_dir);

    // Collect manifests to learn what ran and which preset produced it.
    std::string preset_name;
    std::vector<std::string> recorded;
    for (const char* sub :
         {"simulate", "correlate", "fit", "track", "tune"}) {
        const std::string mpath =
            join_path(args.run_dir, std::string("manifest_") + sub + ".json");
        if (!std::filesystem::exists(mpath)) continue;
        recorded.push_back(sub);
        try {
            const json m = json::parse(homsim::read_text_file(mpath));
            if (preset_name.empty() && m.contains("preset") &&
                m["preset"].is_string())
                preset_name = m["preset"].get<std::string>();
        } catch (const json::parse_error&) {
        }
    }
    if (!recorded.empty()) {
        std::string joined;
        for (const std::string& r : recorded) {
            if (!joined.empty()) joined += ";";
            joined += r;
        }
        s.line("subcommands recorded: " + joined);
        s.kv("report.subcommands", joined);
    }
    if (!preset_name.empty()) {
        s.line("preset: " + preset_name);
        s.kv("report.preset", preset_name);
    }

    const std::string hist_path = join_path(args.run_dir, "histogram.csv");
    double measured_vis = std::numeric_limits<double>::quiet_NaN();
    bool have_series_mean = false;

    if (std::filesystem::exists(hist_path)) {
        const homsim::CorrelationHistogram hist =
            homsim::histogram_from_csv(homsim::read_text_file(hist_path));
        std::uint64_t total = 0;
        for (std::uint64_t c : hist.counts) total += c;
        s.line("[histogram] bins=" + std::to_string(hist.n_bins()) +
               " bin_width_ps=" + std::to_string(hist.bin_width_ps) +
               " total_pairs=" + std::to_string(total));
        s.kv("histogram.bins", static_cast<double>(hist.n_bins()));
        s.kv("histogram.bin_width_ps", static_cast<double>(hist.bin_width_ps));
        s.kv("histogram.total_pairs", static_cast<double>(total));
    }
    const std::string fit_path = join_path(args.run_dir, "fit.json");
    if (std::filesystem::exists(fit_path)) report_fit(fit_path, s);
    const std::string series_path = join_path(args.run_dir, "series.csv");
    if (std::filesystem::exists(series_path)) {
        double mean = std::numeric_limits<double>::quiet_NaN();
        report_series(series_path, s, &mean);
        if (std::isfinite(mean)) {
            measured_vis = mean;
            have_series_mean = true;
        }
    }
    const std::string transcript_path =
        join_path(args.run_dir, "transcript.csv");
    if (std::filesystem::exists(transcript_path))
        report_transcript(transcript_path, s);

    // Predicted-vs-measured visibility when the producing scenario is known.
    if (!preset_name.empty()) {
        const homsim::Preset& p = homsim::preset(preset_name);
        if (p.kind == homsim::Preset::Kind::Sim &&
            p.sim.mode == homsim::SimMode::HOM_DISTINCT &&
            p.sim.emitters.size() == 2) {
            homsim::TwoEmitterParams params;
            params.emitter1 = p.sim.emitters[0];
            params.emitter2 = p.sim.emitters[1];
            params.detuning_mhz = p.sim.emitters[1].center_freq_mhz -
                                  p.sim.emitters[0].center_freq_mhz;
            params.v_factor = p.sim.v_factor;
            params.sigma1_mhz = p.sim.diffusion[0].sigma_mhz;
            params.sigma2_mhz = p.sim.diffusion[1].sigma_mhz;
            params.period_ns = p.sim.period_ns;
            const double predicted = homsim::predict_visibility(params);

            if (!have_series_mean && std::filesystem::exists(hist_path)) {
                const homsim::CorrelationHistogram hist =
                    homsim::histogram_from_csv(
                        homsim::read_text_file(hist_path));
                const int n_max = std::min(
                    13, static_cast<int>(std::floor(
                            hist.bin_center_ps(hist.n_bins() - 1) / 1000.0 /
                                p.sim.period_ns -
                            0.5 + 1e-9)));
                if (n_max >= 2) {
                    const homsim::PeakAreas areas = homsim::peak_areas(
                        hist, p.sim.period_ns, n_max);
                    measured_vis =
                        homsim::visibility_from_areas(areas).visibility;
                }
            }
            s.kv("predicted.visibility", predicted);
            if (std::isfinite(measured_vis)) {
                s.line("[visibility] predicted=" + fmt_g(predicted) +
                       " measured=" + fmt_g(measured_vis) + " difference=" +
                       fmt_g(measured_vis - predicted));
                s.kv("measured.visibility", measured_vis);
                s.kv("visibility.difference", measured_vis - predicted);
            } else {
                s.line("[visibility] predicted=" + fmt_g(predicted) +
                       " (no measured visibility artifact)");
            }
        }
    }

    homsim::write_text_file(join_path(out_dir, "summary.txt"), s.text);
    homsim::write_text_file(join_path(out_dir, "summary.csv"), s.csv);

    homsim::RunManifest manifest;
    manifest.subcommand = "report";
    manifest.preset = preset_name;
    manifest.inputs = {args.run_dir};
    manifest.outputs = {"summary.txt", "summary.csv"};
    write_manifest(out_dir, manifest, timer);
    std::fputs(s.text.c_str(), stdout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pulsed two-photon interference toolkit"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    SourceArgs sim_args;
    CLI::App* sim_cmd = app.add_subcommand(
        "simulate", "generate time tags (or an excitation scan)");
    sim_args.attach(sim_cmd, true);

    CorrelateArgs corr_args;
    CLI::App* corr_cmd =
        app.add_subcommand("correlate", "histogram pair delays from tag files");
    corr_args.attach(corr_cmd, false);

    FitArgs fit_args;
    CLI::App* fit_cmd =
        app.add_subcommand("fit", "fit a histogram or scan artifact");
    fit_args.attach(fit_cmd);

    CorrelateArgs track_args;
    CLI::App* track_cmd = app.add_subcommand(
        "track", "sliding-window visibility over tag files");
    track_args.attach(track_cmd, true);

    SourceArgs tune_args;
    CLI::App* tune_cmd = app.add_subcommand(
        "tune", "closed-loop frequency tuning toward resonance");
    tune_args.attach(tune_cmd, true);

    ReportArgs report_args;
    CLI::App* report_cmd =
        app.add_subcommand("report", "summarize the artifacts of a run");
    report_cmd->add_option("run_dir", report_args.run_dir, "run directory")
        ->required();
    report_cmd->add_option("--out", report_args.out_dir,
                           "write the summary elsewhere");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim_cmd->parsed()) {
            run_simulate(sim_args);
        } else if (corr_cmd->parsed()) {
            run_correlate(corr_args);
        } else if (fit_cmd->parsed()) {
            run_fit(fit_args);
        } else if (track_cmd->parsed()) {
            run_track(track_args);
        } else if (tune_cmd->parsed()) {
            return run_tune(tune_args);
        } else if (report_cmd->parsed()) {
            run_report(report_args);
        }
    } catch (const homsim::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const homsim::numerical_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const homsim::io_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
