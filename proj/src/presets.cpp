#include "homsim/presets.hpp"

#include <utility>

#include "homsim/errors.hpp"

namespace homsim {
namespace {

CorrelationConfig corr(std::int64_t bin_width_ps, double max_lag_ns = 600.0,
                       double window_s = 30.0, double step_s = 1.0) {
    CorrelationConfig c;
    c.bin_width_ps = bin_width_ps;
    c.max_lag_ns = max_lag_ns;
    c.window_length_s = window_s;
    c.window_step_s = step_s;
    return c;
}

Preset sim_preset(std::string name, std::string description, SimConfig sim,
                  CorrelationConfig correlation, std::string fit_model) {
    Preset p;
    p.name = std::move(name);
    p.description = std::move(description);
    p.kind = Preset::Kind::Sim;
    p.sim = std::move(sim);
    p.correlation = correlation;
    p.fit_model = std::move(fit_model);
    return p;
}

SimConfig pair_sim(double t1_a, double fwhm_a, double t1_b, double fwhm_b,
                   double detuning_mhz, double v_factor, double sigma_mhz,
                   double corr_time_s, double emission_prob, double duration_s,
                   std::uint64_t seed) {
    SimConfig cfg;
    cfg.mode = SimMode::HOM_DISTINCT;
    cfg.emitters = {EmitterParams::from_fwhm(t1_a, fwhm_a, 0.0),
                    EmitterParams::from_fwhm(t1_b, fwhm_b, detuning_mhz)};
    cfg.diffusion = {{sigma_mhz, corr_time_s}, {sigma_mhz, corr_time_s}};
    cfg.v_factor = v_factor;
    cfg.emission_prob = emission_prob;
    cfg.duration_s = duration_s;
    cfg.rng_seed = seed;
    return cfg;
}

ScanConfig scan_config(double pump_power_uw, std::uint64_t seed) {
    ScanConfig cfg;
    cfg.emitter = EmitterParams::from_fwhm(4.0, 52.0, 0.0);
    cfg.diffusion = {0.0, 1.0};  // sigma comes from the pump-power map
    cfg.half_range_mhz = 500.0;
    cfg.pump_power_uw = pump_power_uw;
    cfg.rng_seed = seed;
    return cfg;
}

std::vector<Preset> build_catalogue() {
    std::vector<Preset> presets;

    // Reference molecule pair, detuned by 40 MHz, with gentle slow wander.
    presets.push_back(sim_preset(
        "couple1",
        "Distinct-molecule interference at 40 MHz detuning with slow spectral "
        "wander; 30 s acquisition.",
        pair_sim(4.25, 59.0, 3.88, 63.0, 40.0, 0.96, 8.0, 200.0, 8e-4, 30.0, 1),
        corr(250), "hom"));

    presets.push_back(sim_preset(
        "couple1-zero",
        "Reference pair tuned onto resonance (zero detuning); 120 s.",
        pair_sim(4.25, 59.0, 3.88, 63.0, 0.0, 0.96, 8.0, 200.0, 8e-4, 120.0, 2),
        corr(250), "hom"));

    presets.push_back(sim_preset(
        "couple1-50",
        "Reference pair at 50 MHz detuning; 120 s.",
        pair_sim(4.25, 59.0, 3.88, 63.0, 50.0, 0.96, 8.0, 200.0, 8e-4, 120.0, 3),
        corr(250), "hom"));

    presets.push_back(sim_preset(
        "couple1-drift",
        "Reference pair around an 80 MHz offset with strong fast wander "
        "(150 MHz amplitude, 20 s memory); 180 s.",
        pair_sim(4.25, 59.0, 3.88, 63.0, 80.0, 0.96, 150.0, 20.0, 8e-4, 180.0,
                 4),
        corr(500), "hom"));

    presets.push_back(sim_preset(
        "couple2",
        "Second molecule pair at 120 MHz with moderate wander; 300 s, sized "
        "for sliding-window tracking.",
        pair_sim(4.60, 55.0, 4.10, 70.0, 120.0, 0.90, 30.0, 100.0, 8e-4, 300.0,
                 5),
        corr(500), "hom"));

    {
        SimConfig cfg = pair_sim(4.0, 45.0, 4.0, 45.0, 354.0, 0.99, 5.0, 200.0,
                                 1.6e-3, 30.0, 6);
        cfg.detector_jitter_ps = 0.0;
        presets.push_back(sim_preset(
            "beats354",
            "Narrow twin lines 354 MHz apart, 100 ps bins, no detector "
            "jitter: clean quantum beats.",
            cfg, corr(100, 300.0), "hom"));
    }

    presets.push_back(sim_preset(
        "beats630",
        "630 MHz beat sampled with 500 ps bins and 150 ps detector jitter: "
        "contrast washed out by binning.",
        pair_sim(4.0, 45.0, 4.0, 45.0, 630.0, 0.99, 5.0, 200.0, 1.6e-3, 30.0,
                 7),
        corr(500), "hom"));

    {
        SimConfig cfg = pair_sim(4.0, 45.0, 4.0, 45.0, 900.0, 0.99, 5.0, 200.0,
                                 1.6e-3, 30.0, 8);
        cfg.detector_jitter_ps = 0.0;
        presets.push_back(sim_preset(
            "nyquist-900",
            "900 MHz beat at 500 ps bins, just below the folding frequency "
            "of the sampling.",
            cfg, corr(500), "hom"));
    }

    {
        SimConfig cfg = pair_sim(4.0, 45.0, 4.0, 45.0, 1200.0, 0.99, 5.0,
                                 200.0, 1.6e-3, 30.0, 9);
        cfg.detector_jitter_ps = 0.0;
        presets.push_back(sim_preset(
            "nyquist-1200",
            "1.2 GHz beat at 500 ps bins: folds back to 800 MHz and flips "
            "the sign of the fitted contrast.",
            cfg, corr(500), "hom"));
    }

    {
        SimConfig cfg;
        cfg.mode = SimMode::HBT;
        cfg.emitters = {EmitterParams::from_fwhm(4.0, 52.0, 0.0)};
        cfg.diffusion = {{8.0, 200.0}};
        cfg.emission_prob = 1.6e-3;
        cfg.duration_s = 360.0;
        cfg.rng_seed = 10;
        presets.push_back(sim_preset(
            "hbt",
            "Single-molecule intensity autocorrelation over 360 s with "
            "background, detector jitter, and dead time.",
            cfg, corr(250), "hbt"));
    }

    {
        SimConfig cfg;
        cfg.mode = SimMode::HOM_SINGLE;
        cfg.emitters = {EmitterParams::from_fwhm(4.0, 45.0, 0.0)};
        cfg.diffusion = {{5.0, 200.0}};
        cfg.v_factor = 0.99;
        cfg.emission_prob = 1.6e-3;
        cfg.duration_s = 360.0;
        cfg.rng_seed = 11;
        presets.push_back(sim_preset(
            "hom-single",
            "One molecule interfering with its own delayed emission; 360 s, "
            "100 ps bins.",
            cfg, corr(100), ""));
    }

    {
        Preset p;
        p.name = "tune";
        p.description =
            "Dose-controlled line shifting: close a -60 GHz gap to below "
            "50 MHz against 20 MHz probe noise.";
        p.kind = Preset::Kind::Tune;
        p.tune.emitter1 = EmitterParams::from_fwhm(4.0, 52.0, 0.0);
        p.tune.emitter2 = EmitterParams::from_fwhm(4.0, 52.0, -60e3);
        p.tune.shift.max_shift_ghz = 100.0;
        p.tune.shift.dose_scale = 1.0;
        p.tune.shift.sign = 1;
        p.tune.probe_noise_mhz = 20.0;
        p.tune.step_dose = 2.0;
        p.tune.rng_seed = 12;
        presets.push_back(std::move(p));
    }

    const std::uint64_t scan_seeds[3] = {13, 14, 15};
    const double powers[3] = {0.0, 2.0, 5.0};
    const char* scan_names[3] = {"scan-p0", "scan-p2", "scan-p5"};
    const char* scan_desc[3] = {
        "Repeated excitation scans without pump light: narrow line wander.",
        "Repeated excitation scans at 2 uW pump: strongly broadened wander.",
        "Repeated excitation scans at 5 uW pump: broadened line wander."};
    for (int i = 0; i < 3; ++i) {
        Preset p;
        p.name = scan_names[i];
        p.description = scan_desc[i];
        p.kind = Preset::Kind::Scan;
        p.scan = scan_config(powers[i], scan_seeds[i]);
        presets.push_back(std::move(p));
    }

    return presets;
}

}  // namespace

const std::vector<Preset>& all_presets() {
    static const std::vector<Preset> catalogue = build_catalogue();
    return catalogue;
}

const Preset& preset(const std::string& name) {
    for (const Preset& p : all_presets())
        if (p.name == name) return p;
    std::string names;
    for (const Preset& p : all_presets()) {
        if (!names.empty()) names += ", ";
        names += p.name;
    }
    throw config_error("unknown preset '" + name + "' (available: " + names +
                       ")");
}

}  // namespace homsim
