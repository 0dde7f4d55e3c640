#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "homsim/model.hpp"
#include "homsim/rng.hpp"
#include "homsim/tags.hpp"

namespace homsim {

// Slow center-frequency wander of one emitter, modeled as a stationary
// Ornstein-Uhlenbeck process (std sigma, autocorrelation time corr_time).
struct SpectralDiffusionParams {
    double sigma_mhz = 0.0;
    double corr_time_s = 200.0;

    void validate() const;
};

// Dose-dependent saturating frequency shift used to tune one emitter onto
// the other: shift(D) = sign * max_shift * (1 - exp(-D/dose_scale)).
struct StarkShiftParams {
    double max_shift_ghz = 75.0;
    double dose_scale = 1.0;   // characteristic dose (arbitrary unit)
    int sign = 1;              // direction of the shift
    // Accepted physical range for max_shift (configurable).
    double range_lo_ghz = 50.0;
    double range_hi_ghz = 100.0;

    void validate() const;
};

enum class SimMode { HBT, HOM_SINGLE, HOM_DISTINCT };

// Full Monte Carlo configuration.  One emitter for HBT/HOM_SINGLE, two for
// HOM_DISTINCT; `diffusion` entries pair with `emitters` (empty means no
// wander).  Detected-photon probability per pulse subsumes quantum
// efficiency and collection losses.
struct SimConfig {
    SimMode mode = SimMode::HOM_DISTINCT;
    std::vector<EmitterParams> emitters;
    std::vector<SpectralDiffusionParams> diffusion;
    double period_ns = 40.0;
    double emission_prob = 8e-4;
    double duration_s = 30.0;
    double v_factor = 1.0;
    double detector_jitter_ps = 150.0;
    double dead_time_ps = 25000.0;
    double background_rate_cps = 25.0;
    std::uint64_t rng_seed = 1;
    double bin_resolution_ps = 1.0;

    void validate() const;
    std::uint64_t n_slots() const;
};

// Exact one-step update of the wander process over an arbitrary time lapse:
// x' = x*exp(-dt/tau_c) + N(0, sigma^2*(1 - exp(-2dt/tau_c))).
double ou_step(double current_freq_mhz, double dt_s,
               const SpectralDiffusionParams& params, Rng& rng);

// Frequency shift in GHz after a cumulative dose.
double stark_shift(double dose, const StarkShiftParams& params);

// Runs the Monte Carlo and returns one sorted stream per detector channel.
// Identical configs (including rng_seed) produce bit-identical streams.
std::array<TimeTagStream, 2> simulate(const SimConfig& config);

// --- excitation-frequency scans -------------------------------------------

// Repeated laser scans across one emitter's line; each row integrates a
// Lorentzian centered at the current wandering frequency.
struct ScanConfig {
    EmitterParams emitter;
    SpectralDiffusionParams diffusion;
    double half_range_mhz = 400.0;
    int n_points = 161;
    int n_rows = 60;
    double row_time_s = 3.0;
    double peak_counts = 400.0;
    double baseline_counts = 5.0;
    bool poisson_noise = true;
    // When set, overrides diffusion.sigma_mhz via the pump-power map.
    std::optional<double> pump_power_uw;
    std::uint64_t rng_seed = 1;

    void validate() const;
};

struct ScanResult {
    std::vector<double> freq_mhz;               // scan grid (common to rows)
    std::vector<std::vector<double>> rows;      // counts per row
    std::vector<double> true_centers_mhz;       // ground truth per row
};

// Measured wander amplitude by pump power (uW -> MHz); data-driven map.
const std::map<double, double>& default_pump_sigma_map();

ScanResult simulate_excitation_scan(
    const ScanConfig& config,
    const std::map<double, double>& sigma_by_power = default_pump_sigma_map());

}  // namespace homsim
