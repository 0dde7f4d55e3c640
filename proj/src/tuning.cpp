#include "homsim/tuning.hpp"

#include <cmath>
#include <cstdio>

#include "homsim/errors.hpp"

namespace homsim {

namespace {

// Averaged line-position reading with independent Gaussian errors.
double probe_line(double truth_mhz, double noise_mhz, int averages, Rng& rng) {
    if (noise_mhz == 0.0) return truth_mhz;
    double sum = 0.0;
    for (int i = 0; i < averages; ++i) sum += rng.normal(truth_mhz, noise_mhz);
    return sum / averages;
}

}  // namespace

TuneResult auto_tune(const EmitterParams& e1, const EmitterParams& e2,
                     const StarkShiftParams& shift_params,
                     double probe_noise_mhz, double step_dose, Rng& rng,
                     const TuneOptions& options) {
    if (probe_noise_mhz < 0.0) {
        throw config_error("probe_noise_mhz must be >= 0");
    }
    if (!(step_dose > 0.0)) throw config_error("step_dose must be > 0");
    if (!(options.target_mhz > 0.0)) {
        throw config_error("target_mhz must be > 0");
    }
    if (!(options.dose_budget > 0.0)) {
        throw config_error("dose_budget must be > 0");
    }
    if (options.max_steps < 1) throw config_error("max_steps must be >= 1");
    if (options.probe_averages < 1) {
        throw config_error("probe_averages must be >= 1");
    }
    if (!(options.safety > 0.0 && options.safety < 1.0)) {
        throw config_error("safety must be in (0, 1)");
    }
    stark_shift(0.0, shift_params);  // validates the shift parameters

    const double initial_gap = std::abs(e1.center_freq_mhz - e2.center_freq_mhz);
    if (initial_gap > 100.0e3) {
        throw config_error(
            "initial detuning exceeds 100 GHz; lines cannot be co-tuned");
    }

    const double d0 = shift_params.dose_scale;
    const double smax_mhz = shift_params.sign * shift_params.max_shift_ghz * 1e3;

    TuneResult res;
    double dose = 0.0;
    auto nu2_true = [&] {
        return e2.center_freq_mhz + 1e3 * stark_shift(dose, shift_params);
    };

    auto record = [&](int extra_averages) {
        int averages = options.probe_averages * extra_averages;
        TuneStep row;
        row.step = static_cast<int>(res.transcript.size());
        row.dose = dose;
        row.nu1_mhz = probe_line(e1.center_freq_mhz, probe_noise_mhz, averages, rng);
        row.nu2_mhz = probe_line(nu2_true(), probe_noise_mhz, averages, rng);
        row.measured_detuning_mhz = row.nu1_mhz - row.nu2_mhz;
        res.transcript.push_back(row);
        return row.measured_detuning_mhz;
    };

    auto fail = [&](std::string reason) {
        res.success = false;
        res.failure_reason = std::move(reason);
        res.final_detuning_mhz = e1.center_freq_mhz - nu2_true();
        res.total_dose = dose;
        return res;
    };

    double measured = record(1);
    const double detuning_sigma =
        probe_noise_mhz * std::sqrt(2.0 / options.probe_averages);
    int consecutive_reprobes = 0;

    while (true) {
        if (std::abs(measured) < options.target_mhz) break;
        if (res.n_steps >= options.max_steps) {
            return fail("step limit reached before target");
        }

        // Shift still available before saturation, signed like the shift.
        double headroom = smax_mhz * std::exp(-dose / d0);
        double needed = measured;  // move nu2 by nu1 - nu2
        if (needed * headroom <= 0.0) {
            // The gap points against the achievable shift direction.  With
            // noisy probes a small overshoot can masquerade as this; refine
            // the measurement at the same dose before giving up.
            if (probe_noise_mhz > 0.0 && consecutive_reprobes < 5 &&
                std::abs(measured) <
                    options.target_mhz + 6.0 * detuning_sigma) {
                ++consecutive_reprobes;
                measured = record(3);
                continue;
            }
            return fail("unreachable: shift direction points away from the gap");
        }
        if (std::abs(needed) >= std::abs(headroom) * (1.0 - 1e-9)) {
            return fail("unreachable: saturation headroom below remaining gap");
        }

        double delta = -d0 * std::log1p(-options.safety * needed / headroom);
        delta = std::min(delta, step_dose);
        if (dose + delta > options.dose_budget) {
            delta = options.dose_budget - dose;
            if (delta <= 0.0) return fail("dose budget exhausted");
        }
        dose += delta;
        ++res.n_steps;
        consecutive_reprobes = 0;
        measured = record(1);
    }

    res.success = true;
    res.final_detuning_mhz = e1.center_freq_mhz - nu2_true();
    res.total_dose = dose;
    return res;
}

std::string to_csv(const TuneResult& result) {
    std::string out = "step,dose,nu1_MHz,nu2_MHz,measured_detuning_MHz\n";
    char line[192];
    for (const auto& row : result.transcript) {
        std::snprintf(line, sizeof(line), "%d,%.10g,%.10g,%.10g,%.10g\n",
                      row.step, row.dose, row.nu1_mhz, row.nu2_mhz,
                      row.measured_detuning_mhz);
        out += line;
    }
    return out;
}

}  // namespace homsim
