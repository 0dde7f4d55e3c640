#include "homsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "homsim/errors.hpp"
#include "homsim/units.hpp"

namespace homsim {

namespace {

std::size_t required_emitters(SimMode mode) {
    return mode == SimMode::HOM_DISTINCT ? 2 : 1;
}

// Pure-dephasing rate 1/t2* in 1/ns; zero for a lifetime-limited emitter.
double dephasing_rate(const EmitterParams& e) {
    double t2s = dephasing_time(e.t1_ns, e.t2_ns);
    return std::isinf(t2s) ? 0.0 : 1.0 / t2s;
}

}  // namespace

void SpectralDiffusionParams::validate() const {
    if (!(sigma_mhz >= 0.0)) {
        throw config_error("diffusion sigma_mhz must be >= 0");
    }
    if (!(corr_time_s > 0.0)) {
        throw config_error("diffusion corr_time_s must be > 0");
    }
}

void StarkShiftParams::validate() const {
    if (!(dose_scale > 0.0)) {
        throw config_error("stark dose_scale must be > 0");
    }
    if (sign != 1 && sign != -1) {
        throw config_error("stark sign must be +1 or -1");
    }
    if (!(range_lo_ghz > 0.0) || !(range_hi_ghz >= range_lo_ghz)) {
        throw config_error("stark range bounds must satisfy 0 < lo <= hi");
    }
    if (!(max_shift_ghz >= range_lo_ghz && max_shift_ghz <= range_hi_ghz)) {
        char msg[128];
        std::snprintf(msg, sizeof(msg),
                      "stark max_shift_ghz %.3g outside accepted range [%.3g, %.3g]",
                      max_shift_ghz, range_lo_ghz, range_hi_ghz);
        throw config_error(msg);
    }
}

void SimConfig::validate() const {
    std::size_t need = required_emitters(mode);
    if (emitters.size() != need) {
        throw config_error("sim mode requires " + std::to_string(need) +
                           " emitter(s), got " + std::to_string(emitters.size()));
    }
    for (const auto& e : emitters) e.validate();
    if (!diffusion.empty() && diffusion.size() != emitters.size()) {
        throw config_error("diffusion list must be empty or match emitter count");
    }
    for (const auto& d : diffusion) d.validate();
    if (!(period_ns > 0.0)) throw config_error("period_ns must be > 0");
    if (!(emission_prob >= 0.0 && emission_prob <= 1.0)) {
        throw config_error("emission_prob must be in [0, 1]");
    }
    if (!(duration_s > 0.0)) throw config_error("duration_s must be > 0");
    if (!(v_factor >= 0.0 && v_factor <= 1.0)) {
        throw config_error("v_factor must be in [0, 1]");
    }
    if (!(detector_jitter_ps >= 0.0)) {
        throw config_error("detector_jitter_ps must be >= 0");
    }
    if (!(dead_time_ps >= 0.0)) throw config_error("dead_time_ps must be >= 0");
    if (!(background_rate_cps >= 0.0)) {
        throw config_error("background_rate_cps must be >= 0");
    }
    if (!(bin_resolution_ps > 0.0)) {
        throw config_error("bin_resolution_ps must be > 0");
    }
}

std::uint64_t SimConfig::n_slots() const {
    return static_cast<std::uint64_t>(std::floor(duration_s * ns_per_s / period_ns));
}

double ou_step(double current_freq_mhz, double dt_s,
               const SpectralDiffusionParams& params, Rng& rng) {
    params.validate();
    if (!(dt_s >= 0.0)) throw config_error("ou_step dt_s must be >= 0");
    // sigma == 0 means the line does not wander at all; dt == 0 is a no-op.
    if (params.sigma_mhz == 0.0 || dt_s == 0.0) return current_freq_mhz;
    double a = std::exp(-dt_s / params.corr_time_s);
    double sd = params.sigma_mhz * std::sqrt(1.0 - a * a);
    return current_freq_mhz * a + sd * rng.normal();
}

double stark_shift(double dose, const StarkShiftParams& params) {
    params.validate();
    if (!(dose >= 0.0)) throw config_error("stark dose must be >= 0");
    return params.sign * params.max_shift_ghz * (1.0 - std::exp(-dose / params.dose_scale));
}

namespace {

// Per-emitter Monte Carlo state.  The wander process is advanced lazily: only
// when the emitter actually fires, by the exact multi-slot update.
struct EmitterState {
    double t1_ns = 0.0;
    double deph_rate = 0.0;  // 1/t2*, 1/ns
    double center_mhz = 0.0;
    SpectralDiffusionParams diff;
    double x_mhz = 0.0;  // current wander offset
    std::uint64_t last_slot = 0;

    EmitterState(const EmitterParams& e, const SpectralDiffusionParams& d, Rng& rng)
        : t1_ns(e.t1_ns),
          deph_rate(dephasing_rate(e)),
          center_mhz(e.center_freq_mhz),
          diff(d) {
        // Start from the stationary distribution.
        if (diff.sigma_mhz > 0.0) x_mhz = rng.normal(0.0, diff.sigma_mhz);
    }

    // Instantaneous emission frequency at the given pulse slot.
    double freq_at(std::uint64_t slot, double period_ns, Rng& rng) {
        if (diff.sigma_mhz > 0.0 && slot > last_slot) {
            double dt_s = static_cast<double>(slot - last_slot) * period_ns * s_per_ns;
            x_mhz = ou_step(x_mhz, dt_s, diff, rng);
        }
        last_slot = slot;
        return center_mhz + x_mhz;
    }
};

// Iterates occupied slots without visiting empty ones: after each occupied
// slot, geometric_skips(q) empty slots are jumped in one draw.
class SlotWalker {
public:
    SlotWalker(double q, std::uint64_t n_slots, Rng& rng)
        : q_(q), n_(n_slots), rng_(rng) {
        cur_ = (q_ > 0.0) ? rng_.geometric_skips(q_) : n_;
    }

    bool valid() const { return cur_ < n_; }
    std::uint64_t slot() const { return cur_; }
    void advance() { cur_ += 1 + rng_.geometric_skips(q_); }

private:
    double q_;
    std::uint64_t n_;
    Rng& rng_;
    std::uint64_t cur_;
};

void run_hbt(const SimConfig& cfg, Rng& rng, std::array<std::vector<double>, 2>& raw) {
    const EmitterParams& e = cfg.emitters[0];
    SlotWalker walk(cfg.emission_prob, cfg.n_slots(), rng);
    for (; walk.valid(); walk.advance()) {
        double t = static_cast<double>(walk.slot()) * cfg.period_ns +
                   rng.exponential(e.t1_ns);
        raw[rng.bernoulli(0.5) ? 1 : 0].push_back(t);
    }
}

void run_hom_distinct(const SimConfig& cfg, Rng& rng,
                      std::array<std::vector<double>, 2>& raw) {
    const double p = cfg.emission_prob;
    const double q = 1.0 - (1.0 - p) * (1.0 - p);
    if (q <= 0.0) return;
    // Conditional slot composition given at least one photon.
    const double p_both = p * p / q;
    const double p_only1 = p * (1.0 - p) / q;

    EmitterState e1(cfg.emitters[0],
                    cfg.diffusion.empty() ? SpectralDiffusionParams{} : cfg.diffusion[0],
                    rng);
    EmitterState e2(cfg.emitters[1],
                    cfg.diffusion.empty() ? SpectralDiffusionParams{} : cfg.diffusion[1],
                    rng);

    SlotWalker walk(q, cfg.n_slots(), rng);
    for (; walk.valid(); walk.advance()) {
        std::uint64_t slot = walk.slot();
        double t0 = static_cast<double>(slot) * cfg.period_ns;
        double u = rng.uniform();
        if (u <= p_both) {
            double f1 = e1.freq_at(slot, cfg.period_ns, rng);
            double f2 = e2.freq_at(slot, cfg.period_ns, rng);
            double d1 = rng.exponential(e1.t1_ns);
            double d2 = rng.exponential(e2.t1_ns);
            double dt = d1 - d2;
            // Overlap of the two single-photon wavepackets at the combiner:
            // residual mutual coherence decays with the pure-dephasing rates
            // and beats at the instantaneous detuning.
            double env = std::exp(-std::abs(dt) * (e1.deph_rate + e2.deph_rate));
            double beat = std::cos(rad_per_mhz_ns * (f1 - f2) * dt);
            double p_diff = 0.5 * (1.0 - cfg.v_factor * env * beat);
            bool different = rng.bernoulli(p_diff);
            int c1 = rng.bernoulli(0.5) ? 1 : 0;
            int c2 = different ? 1 - c1 : c1;
            raw[c1].push_back(t0 + d1);
            raw[c2].push_back(t0 + d2);
        } else if (u <= p_both + p_only1) {
            e1.freq_at(slot, cfg.period_ns, rng);
            raw[rng.bernoulli(0.5) ? 1 : 0].push_back(t0 + rng.exponential(e1.t1_ns));
        } else {
            e2.freq_at(slot, cfg.period_ns, rng);
            raw[rng.bernoulli(0.5) ? 1 : 0].push_back(t0 + rng.exponential(e2.t1_ns));
        }
    }
}

// One emitter behind an unbalanced interferometer whose path imbalance equals
// the pulse period: a photon taking the long path can overlap the next
// pulse's photon taking the short path.
void run_hom_single(const SimConfig& cfg, Rng& rng,
                    std::array<std::vector<double>, 2>& raw) {
    const EmitterParams& e = cfg.emitters[0];
    const double two_rate = 2.0 * dephasing_rate(e);

    struct Pending {
        std::uint64_t slot;
        double arrival;
    };
    std::optional<Pending> pending;

    auto route_alone = [&](double arrival) {
        raw[rng.bernoulli(0.5) ? 1 : 0].push_back(arrival);
    };

    SlotWalker walk(cfg.emission_prob, cfg.n_slots(), rng);
    for (; walk.valid(); walk.advance()) {
        std::uint64_t slot = walk.slot();
        bool long_path = rng.bernoulli(0.5);
        double d = rng.exponential(e.t1_ns);
        double arrival = static_cast<double>(slot) * cfg.period_ns + d +
                         (long_path ? cfg.period_ns : 0.0);
        if (!long_path && pending && pending->slot + 1 == slot) {
            // Same nominal output slot: interfere.  The two photons share one
            // center frequency, so only pure dephasing degrades the overlap.
            double dt = pending->arrival - arrival;
            double env = std::exp(-std::abs(dt) * two_rate);
            double p_diff = 0.5 * (1.0 - cfg.v_factor * env);
            bool different = rng.bernoulli(p_diff);
            int c1 = rng.bernoulli(0.5) ? 1 : 0;
            int c2 = different ? 1 - c1 : c1;
            raw[c1].push_back(pending->arrival);
            raw[c2].push_back(arrival);
            pending.reset();
        } else {
            if (pending) {
                route_alone(pending->arrival);
                pending.reset();
            }
            if (long_path) {
                pending = Pending{slot, arrival};
            } else {
                route_alone(arrival);
            }
        }
    }
    if (pending) route_alone(pending->arrival);
}

}  // namespace

std::array<TimeTagStream, 2> simulate(const SimConfig& config) {
    config.validate();
    Rng rng(config.rng_seed);

    std::array<std::vector<double>, 2> raw;  // arrival times in ns

    switch (config.mode) {
        case SimMode::HBT:
            run_hbt(config, rng, raw);
            break;
        case SimMode::HOM_SINGLE:
            run_hom_single(config, rng, raw);
            break;
        case SimMode::HOM_DISTINCT:
            run_hom_distinct(config, rng, raw);
            break;
    }

    // Detector chain, applied per channel in a fixed order so runs are
    // bit-identical: jitter, sort, dead time, background, quantization.
    if (config.detector_jitter_ps > 0.0) {
        double sd_ns = config.detector_jitter_ps * ns_per_ps;
        for (auto& ch : raw) {
            for (double& t : ch) t += rng.normal(0.0, sd_ns);
        }
    }
    for (auto& ch : raw) std::sort(ch.begin(), ch.end());

    if (config.dead_time_ps > 0.0) {
        double dead_ns = config.dead_time_ps * ns_per_ps;
        for (auto& ch : raw) {
            std::size_t kept = 0;
            for (double t : ch) {
                // A click at exactly the dead time after the previous kept
                // click is detected.
                if (kept == 0 || t - ch[kept - 1] >= dead_ns) ch[kept++] = t;
            }
            ch.resize(kept);
        }
    }

    if (config.background_rate_cps > 0.0) {
        double mean_gap_ns = ns_per_s / config.background_rate_cps;
        double duration_ns = config.duration_s * ns_per_s;
        for (auto& ch : raw) {
            std::size_t old_n = ch.size();
            for (double t = rng.exponential(mean_gap_ns); t < duration_ns;
                 t += rng.exponential(mean_gap_ns)) {
                ch.push_back(t);
            }
            std::inplace_merge(ch.begin(), ch.begin() + old_n, ch.end());
        }
    }

    std::array<TimeTagStream, 2> out;
    const double res = config.bin_resolution_ps;
    for (int c = 0; c < 2; ++c) {
        out[c].tags.reserve(raw[c].size());
        for (double t_ns : raw[c]) {
            if (t_ns < 0.0) continue;  // jitter can push early clicks negative
            double t_ps = std::llround(t_ns * ps_per_ns / res) * res;
            if (t_ps < 0.0) continue;
            TimeTag tag;
            tag.t_ps = static_cast<std::uint64_t>(std::llround(t_ps));
            tag.channel = static_cast<std::uint8_t>(c);
            out[c].tags.push_back(tag);
        }
        raw[c].clear();
        raw[c].shrink_to_fit();
    }
    return out;
}

void ScanConfig::validate() const {
    emitter.validate();
    diffusion.validate();
    if (!(half_range_mhz > 0.0)) throw config_error("scan half_range_mhz must be > 0");
    if (n_points < 2) throw config_error("scan n_points must be >= 2");
    if (n_rows < 1) throw config_error("scan n_rows must be >= 1");
    if (!(row_time_s > 0.0)) throw config_error("scan row_time_s must be > 0");
    if (!(peak_counts >= 0.0)) throw config_error("scan peak_counts must be >= 0");
    if (!(baseline_counts >= 0.0)) {
        throw config_error("scan baseline_counts must be >= 0");
    }
}

const std::map<double, double>& default_pump_sigma_map() {
    // Wander amplitude vs pump power, from repeated-scan line tracking.
    static const std::map<double, double> map = {
        {0.0, 8.0},
        {2.0, 84.0},
        {5.0, 71.0},
    };
    return map;
}

ScanResult simulate_excitation_scan(const ScanConfig& config,
                                    const std::map<double, double>& sigma_by_power) {
    config.validate();
    SpectralDiffusionParams diff = config.diffusion;
    if (config.pump_power_uw) {
        auto it = sigma_by_power.find(*config.pump_power_uw);
        if (it == sigma_by_power.end()) {
            char msg[96];
            std::snprintf(msg, sizeof(msg),
                          "no wander calibration for pump power %.6g uW",
                          *config.pump_power_uw);
            throw config_error(msg);
        }
        diff.sigma_mhz = it->second;
        diff.validate();
    }

    Rng rng(config.rng_seed);
    ScanResult result;
    result.freq_mhz.resize(config.n_points);
    double step = 2.0 * config.half_range_mhz / (config.n_points - 1);
    for (int j = 0; j < config.n_points; ++j) {
        result.freq_mhz[j] = config.emitter.center_freq_mhz -
                             config.half_range_mhz + j * step;
    }

    double hw = config.emitter.fwhm_mhz / 2.0;
    double x = (diff.sigma_mhz > 0.0) ? rng.normal(0.0, diff.sigma_mhz) : 0.0;
    result.rows.reserve(config.n_rows);
    result.true_centers_mhz.reserve(config.n_rows);
    for (int r = 0; r < config.n_rows; ++r) {
        if (r > 0) x = ou_step(x, config.row_time_s, diff, rng);
        double center = config.emitter.center_freq_mhz + x;
        result.true_centers_mhz.push_back(center);
        std::vector<double> row(config.n_points);
        for (int j = 0; j < config.n_points; ++j) {
            double df = result.freq_mhz[j] - center;
            double mean = config.baseline_counts +
                          config.peak_counts * hw * hw / (df * df + hw * hw);
            row[j] = config.poisson_noise
                         ? static_cast<double>(rng.poisson(mean))
                         : mean;
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

}  // namespace homsim
