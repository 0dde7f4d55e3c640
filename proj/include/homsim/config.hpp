#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "homsim/correlator.hpp"
#include "homsim/sim.hpp"
#include "homsim/tuning.hpp"

namespace homsim {

// Everything a tuning run needs besides the random stream.
struct TuneSetup {
    EmitterParams emitter1;
    EmitterParams emitter2;
    StarkShiftParams shift;
    double probe_noise_mhz = 20.0;
    double step_dose = 2.0;
    TuneOptions options;
    std::uint64_t rng_seed = 1;
};

// JSON -> config.  Errors carry the offending field path, e.g.
// "emitters[1].t1_ns: expected a positive number".
SimConfig sim_config_from_json(const std::string& text);
ScanConfig scan_config_from_json(const std::string& text);
TuneSetup tune_setup_from_json(const std::string& text);

// Effective-configuration dump (parses back via sim_config_from_json).
std::string to_json(const SimConfig& config);

// Record of one tool invocation, written next to its artifacts.  Wall time
// is the only field allowed to differ between reruns of the same command.
struct RunManifest {
    std::string subcommand;
    std::string config_path;  // empty when a built-in preset was used
    std::string preset;       // empty when an explicit config was used
    std::string tool_version;
    std::uint64_t rng_seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wall_time_s = 0.0;
};
std::string to_json(const RunManifest& manifest);

// --- artifact serialization ------------------------------------------------

// Histogram CSV: header "delay_ps,counts", one row per bin, delays at bin
// centers.  Reading reconstructs bin width and indexing from the delays;
// tag totals and wall times are not stored.
std::string histogram_to_csv(const CorrelationHistogram& hist);
CorrelationHistogram histogram_from_csv(const std::string& text);

// Sliding-window series CSV.
std::string series_to_csv(const VisibilitySeries& series);

// Excitation-scan CSV: header "freq_mhz,row_0,...", one row per grid point.
// Ground-truth centers are simulation-internal and are not stored.
std::string scan_to_csv(const ScanResult& scan);
ScanResult scan_from_csv(const std::string& text);

// Whole-file helpers; failures throw io_error naming the path.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace homsim
