#pragma once

#include <string>
#include <vector>

#include "homsim/model.hpp"
#include "homsim/rng.hpp"
#include "homsim/sim.hpp"

namespace homsim {

// Closed-loop frequency tuning: one emitter's zero-phonon line is pushed by a
// saturating, dose-dependent shift while both lines are re-measured between
// doses, until the measured detuning falls below the target.

struct TuneOptions {
    double target_mhz = 50.0;   // stop once |measured detuning| is below this
    double dose_budget = 20.0;  // cumulative dose limit (same unit as doses)
    int max_steps = 64;         // dose/probe iterations before giving up
    int probe_averages = 3;     // independent readings averaged per probe
    double safety = 0.95;       // fraction of the measured gap closed per step
};

struct TuneStep {
    int step = 0;            // 0 is the initial probe, before any dose
    double dose = 0.0;       // cumulative dose applied so far
    double nu1_mhz = 0.0;    // probed line position of the fixed emitter
    double nu2_mhz = 0.0;    // probed line position of the tuned emitter
    double measured_detuning_mhz = 0.0;  // nu1 - nu2 as probed
};

struct TuneResult {
    bool success = false;
    std::string failure_reason;  // empty when success
    double final_detuning_mhz = 0.0;  // true detuning when the loop stopped
    double total_dose = 0.0;
    int n_steps = 0;  // dose steps applied (probes = n_steps + re-probes + 1)
    std::vector<TuneStep> transcript;
};

// Tunes emitter 2 toward emitter 1.  Each probe reads both line centers with
// Gaussian error probe_noise_mhz / sqrt(probe_averages); each step applies at
// most step_dose.  Requires an initial true detuning of at most 100 GHz.
// Infeasibility (saturation headroom smaller than the remaining gap), an
// exhausted dose budget, or hitting max_steps produce a failure result that
// still carries the transcript.
TuneResult auto_tune(const EmitterParams& e1, const EmitterParams& e2,
                     const StarkShiftParams& shift_params,
                     double probe_noise_mhz, double step_dose, Rng& rng,
                     const TuneOptions& options = {});

// "step,dose,nu1_MHz,nu2_MHz,measured_detuning_MHz" rows.
std::string to_csv(const TuneResult& result);

}  // namespace homsim
