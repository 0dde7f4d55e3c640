#pragma once

#include <string>
#include <vector>

#include "homsim/config.hpp"

namespace homsim {

// Named, ready-to-run scenario.  Sim presets carry a suggested correlation
// setup (histogram binning plus sliding-window geometry) and the fit model
// that matches the measurement, so downstream commands can run without extra
// flags.  Exactly one of the payloads is meaningful, selected by `kind`.
struct Preset {
    enum class Kind { Sim, Scan, Tune };

    std::string name;
    std::string description;
    Kind kind = Kind::Sim;

    SimConfig sim;
    ScanConfig scan;
    TuneSetup tune;

    CorrelationConfig correlation;
    std::string fit_model;  // "hom", "hbt", or empty when no standard fit
};

// Lookup by name; throws config_error listing the available names.
const Preset& preset(const std::string& name);

const std::vector<Preset>& all_presets();

}  // namespace homsim
