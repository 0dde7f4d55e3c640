#include "homsim/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "json.hpp"

#include "homsim/errors.hpp"

namespace homsim {
namespace {

using nlohmann::json;

std::string join(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw config_error(path + ": " + what);
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("invalid JSON: ") + e.what());
    }
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path.empty() ? "config" : path, "expected an object");
}

// Typos should not silently fall back to defaults.
void check_keys(const json& j, const std::string& base,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) fail(join(base, it.key()), "unknown field");
    }
}

bool has(const json& j, const char* key) { return j.find(key) != j.end(); }

double get_num(const json& j, const std::string& base, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) fail(join(base, key), "missing required field");
    if (!it->is_number()) fail(join(base, key), "expected a number");
    return it->get<double>();
}

double get_num_or(const json& j, const std::string& base, const char* key,
                  double fallback) {
    if (!has(j, key)) return fallback;
    return get_num(j, base, key);
}

std::int64_t get_int_or(const json& j, const std::string& base, const char* key,
                        std::int64_t fallback) {
    if (!has(j, key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        fail(join(base, key), "expected an integer");
    return v.get<std::int64_t>();
}

std::uint64_t get_seed_or(const json& j, const std::string& base, const char* key,
                          std::uint64_t fallback) {
    if (!has(j, key)) return fallback;
    const json& v = j.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    fail(join(base, key), "expected a non-negative integer");
}

bool get_bool_or(const json& j, const std::string& base, const char* key,
                 bool fallback) {
    if (!has(j, key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean()) fail(join(base, key), "expected true or false");
    return v.get<bool>();
}

std::string get_str(const json& j, const std::string& base, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) fail(join(base, key), "missing required field");
    if (!it->is_string()) fail(join(base, key), "expected a string");
    return it->get<std::string>();
}

EmitterParams parse_emitter(const json& j, const std::string& base) {
    require_object(j, base);
    check_keys(j, base, {"t1_ns", "t2_ns", "fwhm_mhz", "center_freq_mhz"});
    const double t1 = get_num(j, base, "t1_ns");
    const double center = get_num_or(j, base, "center_freq_mhz", 0.0);
    const bool has_t2 = has(j, "t2_ns");
    const bool has_fwhm = has(j, "fwhm_mhz");
    if (has_t2 == has_fwhm)
        fail(base, "specify exactly one of t2_ns or fwhm_mhz");
    try {
        if (has_t2)
            return EmitterParams::from_t2(t1, get_num(j, base, "t2_ns"), center);
        return EmitterParams::from_fwhm(t1, get_num(j, base, "fwhm_mhz"), center);
    } catch (const config_error& e) {
        fail(base, e.what());
    }
}

SpectralDiffusionParams parse_diffusion(const json& j, const std::string& base) {
    require_object(j, base);
    check_keys(j, base, {"sigma_mhz", "corr_time_s"});
    SpectralDiffusionParams d;
    d.sigma_mhz = get_num(j, base, "sigma_mhz");
    d.corr_time_s = get_num_or(j, base, "corr_time_s", d.corr_time_s);
    return d;
}

StarkShiftParams parse_shift(const json& j, const std::string& base) {
    require_object(j, base);
    check_keys(j, base,
               {"max_shift_ghz", "dose_scale", "sign", "range_lo_ghz",
                "range_hi_ghz"});
    StarkShiftParams s;
    s.max_shift_ghz = get_num_or(j, base, "max_shift_ghz", s.max_shift_ghz);
    s.dose_scale = get_num_or(j, base, "dose_scale", s.dose_scale);
    s.sign = static_cast<int>(get_int_or(j, base, "sign", s.sign));
    s.range_lo_ghz = get_num_or(j, base, "range_lo_ghz", s.range_lo_ghz);
    s.range_hi_ghz = get_num_or(j, base, "range_hi_ghz", s.range_hi_ghz);
    return s;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_double(const std::string& field, const char* what, std::size_t row) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0')
        throw io_error("CSV row " + std::to_string(row) + ": bad " + what +
                       " value '" + field + "'");
    return v;
}

}  // namespace

SimConfig sim_config_from_json(const std::string& text) {
    const json j = parse_json(text);
    require_object(j, "");
    check_keys(j, "",
               {"mode", "emitters", "diffusion", "period_ns", "emission_prob",
                "duration_s", "v_factor", "detector_jitter_ps", "dead_time_ps",
                "background_rate_cps", "rng_seed", "bin_resolution_ps"});

    SimConfig cfg;
    const std::string mode = get_str(j, "", "mode");
    if (mode == "hbt")
        cfg.mode = SimMode::HBT;
    else if (mode == "hom_single")
        cfg.mode = SimMode::HOM_SINGLE;
    else if (mode == "hom_distinct")
        cfg.mode = SimMode::HOM_DISTINCT;
    else
        fail("mode", "expected one of hbt, hom_single, hom_distinct");

    auto eit = j.find("emitters");
    if (eit == j.end()) fail("emitters", "missing required field");
    if (!eit->is_array()) fail("emitters", "expected an array");
    for (std::size_t i = 0; i < eit->size(); ++i)
        cfg.emitters.push_back(
            parse_emitter((*eit)[i], "emitters[" + std::to_string(i) + "]"));

    if (has(j, "diffusion")) {
        const json& dj = j.at("diffusion");
        if (!dj.is_array()) fail("diffusion", "expected an array");
        for (std::size_t i = 0; i < dj.size(); ++i)
            cfg.diffusion.push_back(
                parse_diffusion(dj[i], "diffusion[" + std::to_string(i) + "]"));
    } else {
        cfg.diffusion.assign(cfg.emitters.size(), SpectralDiffusionParams{});
    }

    cfg.period_ns = get_num_or(j, "", "period_ns", cfg.period_ns);
    cfg.emission_prob = get_num_or(j, "", "emission_prob", cfg.emission_prob);
    cfg.duration_s = get_num_or(j, "", "duration_s", cfg.duration_s);
    cfg.v_factor = get_num_or(j, "", "v_factor", cfg.v_factor);
    cfg.detector_jitter_ps =
        get_num_or(j, "", "detector_jitter_ps", cfg.detector_jitter_ps);
    cfg.dead_time_ps = get_num_or(j, "", "dead_time_ps", cfg.dead_time_ps);
    cfg.background_rate_cps =
        get_num_or(j, "", "background_rate_cps", cfg.background_rate_cps);
    cfg.rng_seed = get_seed_or(j, "", "rng_seed", cfg.rng_seed);
    cfg.bin_resolution_ps =
        get_num_or(j, "", "bin_resolution_ps", cfg.bin_resolution_ps);

    cfg.validate();
    return cfg;
}

ScanConfig scan_config_from_json(const std::string& text) {
    const json j = parse_json(text);
    require_object(j, "");
    check_keys(j, "",
               {"emitter", "diffusion", "half_range_mhz", "n_points", "n_rows",
                "row_time_s", "peak_counts", "baseline_counts", "poisson_noise",
                "pump_power_uw", "rng_seed"});

    ScanConfig cfg;
    auto eit = j.find("emitter");
    if (eit == j.end()) fail("emitter", "missing required field");
    cfg.emitter = parse_emitter(*eit, "emitter");
    if (has(j, "diffusion")) cfg.diffusion = parse_diffusion(j.at("diffusion"), "diffusion");

    cfg.half_range_mhz = get_num_or(j, "", "half_range_mhz", cfg.half_range_mhz);
    cfg.n_points = static_cast<int>(get_int_or(j, "", "n_points", cfg.n_points));
    cfg.n_rows = static_cast<int>(get_int_or(j, "", "n_rows", cfg.n_rows));
    cfg.row_time_s = get_num_or(j, "", "row_time_s", cfg.row_time_s);
    cfg.peak_counts = get_num_or(j, "", "peak_counts", cfg.peak_counts);
    cfg.baseline_counts =
        get_num_or(j, "", "baseline_counts", cfg.baseline_counts);
    cfg.poisson_noise = get_bool_or(j, "", "poisson_noise", cfg.poisson_noise);
    if (has(j, "pump_power_uw"))
        cfg.pump_power_uw = get_num(j, "", "pump_power_uw");
    cfg.rng_seed = get_seed_or(j, "", "rng_seed", cfg.rng_seed);

    cfg.validate();
    return cfg;
}

TuneSetup tune_setup_from_json(const std::string& text) {
    const json j = parse_json(text);
    require_object(j, "");
    check_keys(j, "",
               {"emitter1", "emitter2", "shift", "probe_noise_mhz", "step_dose",
                "options", "rng_seed"});

    TuneSetup setup;
    auto e1 = j.find("emitter1");
    if (e1 == j.end()) fail("emitter1", "missing required field");
    setup.emitter1 = parse_emitter(*e1, "emitter1");
    auto e2 = j.find("emitter2");
    if (e2 == j.end()) fail("emitter2", "missing required field");
    setup.emitter2 = parse_emitter(*e2, "emitter2");
    if (has(j, "shift")) setup.shift = parse_shift(j.at("shift"), "shift");

    setup.probe_noise_mhz =
        get_num_or(j, "", "probe_noise_mhz", setup.probe_noise_mhz);
    setup.step_dose = get_num_or(j, "", "step_dose", setup.step_dose);
    setup.rng_seed = get_seed_or(j, "", "rng_seed", setup.rng_seed);

    if (has(j, "options")) {
        const json& oj = j.at("options");
        require_object(oj, "options");
        check_keys(oj, "options",
                   {"target_mhz", "dose_budget", "max_steps", "probe_averages",
                    "safety"});
        TuneOptions& o = setup.options;
        o.target_mhz = get_num_or(oj, "options", "target_mhz", o.target_mhz);
        o.dose_budget = get_num_or(oj, "options", "dose_budget", o.dose_budget);
        o.max_steps =
            static_cast<int>(get_int_or(oj, "options", "max_steps", o.max_steps));
        o.probe_averages = static_cast<int>(
            get_int_or(oj, "options", "probe_averages", o.probe_averages));
        o.safety = get_num_or(oj, "options", "safety", o.safety);
    }
    return setup;
}

std::string to_json(const SimConfig& config) {
    json j;
    switch (config.mode) {
        case SimMode::HBT: j["mode"] = "hbt"; break;
        case SimMode::HOM_SINGLE: j["mode"] = "hom_single"; break;
        case SimMode::HOM_DISTINCT: j["mode"] = "hom_distinct"; break;
    }
    j["emitters"] = json::array();
    for (const EmitterParams& e : config.emitters)
        j["emitters"].push_back({{"t1_ns", e.t1_ns},
                                 {"t2_ns", e.t2_ns},
                                 {"center_freq_mhz", e.center_freq_mhz}});
    j["diffusion"] = json::array();
    for (const SpectralDiffusionParams& d : config.diffusion)
        j["diffusion"].push_back(
            {{"sigma_mhz", d.sigma_mhz}, {"corr_time_s", d.corr_time_s}});
    j["period_ns"] = config.period_ns;
    j["emission_prob"] = config.emission_prob;
    j["duration_s"] = config.duration_s;
    j["v_factor"] = config.v_factor;
    j["detector_jitter_ps"] = config.detector_jitter_ps;
    j["dead_time_ps"] = config.dead_time_ps;
    j["background_rate_cps"] = config.background_rate_cps;
    j["rng_seed"] = config.rng_seed;
    j["bin_resolution_ps"] = config.bin_resolution_ps;
    return j.dump(2) + "\n";
}

std::string to_json(const RunManifest& manifest) {
    json j;
    j["subcommand"] = manifest.subcommand;
    j["config_path"] = manifest.config_path;
    j["preset"] = manifest.preset;
    j["tool_version"] = manifest.tool_version;
    j["rng_seed"] = manifest.rng_seed;
    j["inputs"] = manifest.inputs;
    j["outputs"] = manifest.outputs;
    j["wall_time_s"] = manifest.wall_time_s;
    return j.dump(2) + "\n";
}

std::string histogram_to_csv(const CorrelationHistogram& hist) {
    std::string out = "delay_ps,counts\n";
    char buf[64];
    for (std::size_t i = 0; i < hist.n_bins(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.10g,%" PRIu64 "\n",
                      hist.bin_center_ps(i), hist.counts[i]);
        out += buf;
    }
    return out;
}

CorrelationHistogram histogram_from_csv(const std::string& text) {
    const std::vector<std::string> lines = split_lines(text);
    if (lines.empty() || lines[0] != "delay_ps,counts")
        throw io_error("histogram CSV: expected header 'delay_ps,counts'");
    if (lines.size() < 3)
        throw io_error("histogram CSV: need at least two data rows");

    std::vector<double> delays;
    CorrelationHistogram hist;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> f = split_fields(lines[i]);
        if (f.size() != 2)
            throw io_error("histogram CSV row " + std::to_string(i) +
                           ": expected 2 fields");
        delays.push_back(parse_double(f[0], "delay", i));
        const double c = parse_double(f[1], "count", i);
        if (c < 0) throw io_error("histogram CSV row " + std::to_string(i) +
                                  ": negative count");
        hist.counts.push_back(static_cast<std::uint64_t>(std::llround(c)));
    }

    const double bw = delays[1] - delays[0];
    if (!(bw > 0)) throw io_error("histogram CSV: delays must be increasing");
    hist.bin_width_ps = std::llround(bw);
    hist.first_bin =
        std::llround(delays[0] / static_cast<double>(hist.bin_width_ps) - 0.5);
    for (std::size_t i = 0; i < delays.size(); ++i) {
        if (std::abs(hist.bin_center_ps(i) - delays[i]) > 0.25 * bw)
            throw io_error("histogram CSV: delays are not on a uniform grid");
    }
    return hist;
}

std::string series_to_csv(const VisibilitySeries& series) {
    std::string out =
        "window_start_s,visibility,visibility_err,v_factor,v_factor_err\n";
    for (const VisibilityPoint& p : series) {
        out += fmt(p.window_start_s) + "," + fmt(p.estimate.visibility) + "," +
               fmt(p.estimate.visibility_err) + "," + fmt(p.estimate.v_factor) +
               "," + fmt(p.estimate.v_factor_err) + "\n";
    }
    return out;
}

std::string scan_to_csv(const ScanResult& scan) {
    std::string out = "freq_mhz";
    for (std::size_t r = 0; r < scan.rows.size(); ++r)
        out += ",row_" + std::to_string(r);
    out += "\n";
    for (std::size_t i = 0; i < scan.freq_mhz.size(); ++i) {
        out += fmt(scan.freq_mhz[i]);
        for (const std::vector<double>& row : scan.rows) out += "," + fmt(row[i]);
        out += "\n";
    }
    return out;
}

ScanResult scan_from_csv(const std::string& text) {
    const std::vector<std::string> lines = split_lines(text);
    if (lines.empty()) throw io_error("scan CSV: empty file");
    const std::vector<std::string> header = split_fields(lines[0]);
    if (header.empty() || header[0] != "freq_mhz")
        throw io_error("scan CSV: expected header starting with 'freq_mhz'");
    const std::size_t n_rows = header.size() - 1;
    if (n_rows == 0) throw io_error("scan CSV: no row columns");

    ScanResult scan;
    scan.rows.assign(n_rows, {});
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> f = split_fields(lines[i]);
        if (f.size() != header.size())
            throw io_error("scan CSV row " + std::to_string(i) +
                           ": expected " + std::to_string(header.size()) +
                           " fields");
        scan.freq_mhz.push_back(parse_double(f[0], "frequency", i));
        for (std::size_t r = 0; r < n_rows; ++r)
            scan.rows[r].push_back(parse_double(f[r + 1], "count", i));
    }
    if (scan.freq_mhz.empty()) throw io_error("scan CSV: no data rows");
    return scan;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open file for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw io_error("read failed: " + path);
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open file for writing: " + path);
    out << content;
    out.flush();
    if (!out) throw io_error("write failed: " + path);
}

}  // namespace homsim
