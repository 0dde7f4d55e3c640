#include "homsim/fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "doctest.h"
#include "homsim/correlator.hpp"
#include "homsim/errors.hpp"
#include "homsim/model.hpp"
#include "homsim/rng.hpp"
#include "homsim/sim.hpp"
#include "homsim/units.hpp"

using namespace homsim;

namespace {

CorrelationHistogram synth_hist(const std::function<double(double)>& f,
                                std::int64_t bw_ps, double max_lag_ns,
                                double big) {
    CorrelationHistogram h;
    h.bin_width_ps = bw_ps;
    std::int64_t n_half =
        static_cast<std::int64_t>(max_lag_ns * ps_per_ns) / bw_ps + 1;
    h.first_bin = -n_half;
    h.counts.resize(static_cast<std::size_t>(2 * n_half));
    for (std::size_t j = 0; j < h.counts.size(); ++j) {
        double tau_ns = h.bin_center_ps(j) * ns_per_ps;
        h.counts[j] = static_cast<std::uint64_t>(
            std::llround(big * std::max(f(tau_ns), 0.0)));
    }
    return h;
}

SimConfig pair_sim(double t1_1, double fwhm1, double t1_2, double fwhm2,
                   double detuning_mhz, double v, double sigma1, double sigma2,
                   double p, double duration_s, std::uint64_t seed) {
    SimConfig cfg;
    cfg.mode = SimMode::HOM_DISTINCT;
    cfg.emitters = {EmitterParams::from_fwhm(t1_1, fwhm1, 0.0),
                    EmitterParams::from_fwhm(t1_2, fwhm2, detuning_mhz)};
    cfg.diffusion = {{sigma1, 1e-4}, {sigma2, 1e-4}};
    cfg.v_factor = v;
    cfg.emission_prob = p;
    cfg.duration_s = duration_s;
    cfg.detector_jitter_ps = 0.0;
    cfg.dead_time_ps = 0.0;
    cfg.background_rate_cps = 0.0;
    cfg.rng_seed = seed;
    return cfg;
}

CorrelationHistogram correlate_pair(const std::array<TimeTagStream, 2>& s,
                                    std::int64_t bw_ps, double max_lag_ns) {
    CorrelationConfig cc;
    cc.bin_width_ps = bw_ps;
    cc.max_lag_ns = max_lag_ns;
    return cross_correlate(s[0], s[1], cc);
}

}  // namespace

TEST_CASE("analytic model gradient matches central finite differences") {
    Rng rng(42);
    auto run_points = [&](double conv_sigma_ps, int n_points) {
        for (int trial = 0; trial < n_points; ++trial) {
            // The model is exactly linear in the scale, so checking at unit
            // scale loses nothing and keeps finite-difference roundoff (which
            // grows with the function value) below the tolerance floor.
            std::array<double, 7> p = {
                1000.0 * rng.uniform(),       // detuning
                rng.uniform(),                // v
                2.0 + 4.0 * rng.uniform(),    // t1_1
                2.0 + 4.0 * rng.uniform(),    // t1_2
                0.05 + 0.45 * rng.uniform(),  // rc2
                50.0 * rng.uniform(),         // sigma_joint
                1.0,                          // scale
            };
            double tau = -300.0 + 600.0 * rng.uniform();
            std::array<double, 7> grad{};
            hom_fit_model(tau, p, 40.0, conv_sigma_ps, &grad);
            for (int k = 0; k < 7; ++k) {
                double h = 6e-6 * std::max(std::abs(p[k]), 1.0);
                std::array<double, 7> pp = p, pm = p;
                pp[k] += h;
                pm[k] -= h;
                double fd = (hom_fit_model(tau, pp, 40.0, conv_sigma_ps) -
                             hom_fit_model(tau, pm, 40.0, conv_sigma_ps)) /
                            (2.0 * h);
                CAPTURE(trial);
                CAPTURE(k);
                CHECK(std::abs(fd - grad[k]) <
                      1e-5 * (std::abs(grad[k]) + std::abs(fd)) + 1e-8);
            }
        }
    };
    run_points(0.0, 100);
    run_points(212.0, 20);  // detector-response convolution path
}

TEST_CASE("model symmetry and convolution smoothing") {
    std::array<double, 7> p = {354.0, 0.9, 4.2, 3.9, 0.38, 11.3, 100.0};
    for (double tau : {0.3, 7.7, 39.9, 123.4}) {
        CHECK(hom_fit_model(tau, p, 40.0) ==
              doctest::Approx(hom_fit_model(-tau, p, 40.0)).epsilon(1e-12));
    }
    // Smoothing a cusp lowers the apex.
    CHECK(hom_fit_model(40.0, p, 40.0, 500.0) < hom_fit_model(40.0, p, 40.0));
    // Far from the cusp the convolution shifts the value only at the level of
    // the local curvature (~sigma^2 * f''/2, about a percent here).
    CHECK(hom_fit_model(20.0, p, 40.0, 500.0) ==
          doctest::Approx(hom_fit_model(20.0, p, 40.0)).epsilon(0.02));
}

TEST_CASE("noiseless interference histogram: fit is the identity") {
    TwoEmitterParams truth;
    truth.emitter1 = EmitterParams::from_fwhm(4.25, 59.0);
    truth.emitter2 = EmitterParams::from_fwhm(3.88, 63.0);
    truth.detuning_mhz = 354.0;
    truth.v_factor = 0.96;
    truth.sigma1_mhz = 8.0;
    truth.sigma2_mhz = 8.0;
    truth.period_ns = 40.0;
    double rc2_true = 1.0 / truth.emitter1.t2_ns + 1.0 / truth.emitter2.t2_ns;
    double sj_true = std::sqrt(truth.sigma1_mhz * truth.sigma1_mhz +
                               truth.sigma2_mhz * truth.sigma2_mhz);

    const double big = 1e7;
    auto hist = synth_hist(
        [&](double tau) { return g2_hom_distinct(tau, truth); }, 250, 300.0, big);

    SUBCASE("all parameters free") {
        HomFitOptions opt;
        opt.period_ns = 40.0;
        HomFitResult r = fit_hom(hist, opt);
        CHECK(r.converged);
        CHECK(r.detuning_mhz == doctest::Approx(354.0).epsilon(1e-4));
        CHECK(r.v_factor == doctest::Approx(0.96).epsilon(1e-4));
        // Lifetimes are exchange-symmetric: compare as a sorted pair.
        double lo = std::min(r.t1_1_ns, r.t1_2_ns);
        double hi = std::max(r.t1_1_ns, r.t1_2_ns);
        CHECK(lo == doctest::Approx(3.88).epsilon(1e-4));
        CHECK(hi == doctest::Approx(4.25).epsilon(1e-4));
        // Only the summed coherence rate is identifiable; it is reported as
        // the symmetric split t2_1 = t2_2 = 2/rc2.
        CHECK(2.0 / r.t2_1_ns == doctest::Approx(rc2_true).epsilon(1e-4));
        CHECK(r.sigma_joint_mhz == doctest::Approx(sj_true).epsilon(1e-4));
        CHECK(r.scale == doctest::Approx(big).epsilon(1e-4));
        CHECK(r.chi2_per_dof < 1e-3);
        CHECK_FALSE(r.resolution_limited);
        CHECK_FALSE(r.detuning_unidentifiable);
        CHECK(r.free_names.size() == 7);
        CHECK(r.covariance.size() == 49);
    }

    SUBCASE("fixed lifetimes and coherence times are honored") {
        HomFitOptions opt;
        opt.period_ns = 40.0;
        opt.detuning_mhz = 354.0;
        opt.t1_1_ns = 4.25;
        opt.t1_2_ns = 3.88;
        opt.t2_1_ns = truth.emitter1.t2_ns;
        opt.t2_2_ns = truth.emitter2.t2_ns;
        HomFitResult r = fit_hom(hist, opt);
        CHECK(r.converged);
        CHECK(r.detuning_mhz == 354.0);
        CHECK(r.t1_1_ns == 4.25);
        CHECK(r.t2_1_ns == truth.emitter1.t2_ns);
        CHECK(r.t2_2_ns == truth.emitter2.t2_ns);
        CHECK(r.v_factor == doctest::Approx(0.96).epsilon(1e-6));
        CHECK(r.sigma_joint_mhz == doctest::Approx(sj_true).epsilon(1e-4));
        CHECK(r.free_names.size() == 3);  // v, sigma_joint, scale
    }

    SUBCASE("fixing one coherence time decomposes the fitted rate") {
        HomFitOptions opt;
        opt.period_ns = 40.0;
        opt.detuning_mhz = 354.0;
        opt.t1_1_ns = 4.25;
        opt.t1_2_ns = 3.88;
        opt.t2_1_ns = truth.emitter1.t2_ns;
        HomFitResult r = fit_hom(hist, opt);
        CHECK(r.t2_1_ns == truth.emitter1.t2_ns);
        CHECK(r.t2_2_ns == doctest::Approx(truth.emitter2.t2_ns).epsilon(1e-3));
    }
}

TEST_CASE("histogram preconditions are enforced") {
    TwoEmitterParams truth;
    truth.emitter1 = EmitterParams::from_fwhm(4.0, 60.0);
    truth.emitter2 = EmitterParams::from_fwhm(4.0, 60.0);
    truth.period_ns = 40.0;
    auto small = synth_hist(
        [&](double tau) { return g2_hom_distinct(tau, truth); }, 250, 100.0, 1e5);
    CHECK_THROWS_AS(fit_hom(small), config_error);
    CHECK_THROWS_AS(fit_hbt(small, 40.0), config_error);

    auto empty = synth_hist([](double) { return 0.0; }, 250, 300.0, 1.0);
    CHECK_THROWS_AS(fit_hom(empty), numerical_error);
}

TEST_CASE("pulsed autocorrelation fit recovers the lifetime") {
    SUBCASE("sampled analytic curve") {
        auto hist = synth_hist(
            [&](double tau) { return g2_hbt_model(tau, 4.0, 40.0); }, 250, 300.0,
            1e7);
        HbtFitResult r = fit_hbt(hist, 40.0);
        CHECK(r.converged);
        CHECK(r.t1_ns == doctest::Approx(4.0).epsilon(0.01));
        CHECK(std::abs(r.g2_zero_area) < 0.01);
        CHECK(r.chi2_per_dof < 0.1);
    }

    SUBCASE("full detector chain at realistic statistics") {
        // The weighted least-squares estimate needs reasonable per-bin counts;
        // this matches the statistics of a six-minute acquisition.
        SimConfig cfg;
        cfg.mode = SimMode::HBT;
        cfg.emitters = {EmitterParams::from_fwhm(4.25, 59.0)};
        cfg.emission_prob = 1.6e-3;
        cfg.duration_s = 360.0;
        cfg.detector_jitter_ps = 150.0;
        cfg.dead_time_ps = 25000.0;
        cfg.background_rate_cps = 25.0;
        cfg.rng_seed = 72;
        auto s = simulate(cfg);
        auto hist = correlate_pair(s, 250, 300.0);
        HbtFitResult r = fit_hbt(hist, 40.0);
        CHECK(r.converged);
        CHECK(r.t1_err_ns < 0.05);
        CHECK(std::abs(r.t1_ns - 4.25) < 3.0 * r.t1_err_ns);
        CHECK(std::abs(r.g2_zero_area) < 0.02);
        CHECK(r.g2_zero_err < 0.02);
        CHECK(r.chi2_per_dof < 2.0);
    }
}

TEST_CASE("lorentzian line fit") {
    SUBCASE("noiseless profile is recovered to parts per million") {
        std::vector<double> f, y;
        double c = 37.0, fwhm = 52.0, amp = 400.0, off = 5.0;
        double hw = fwhm / 2.0;
        for (int j = 0; j < 161; ++j) {
            double x = -400.0 + 5.0 * j;
            f.push_back(x);
            y.push_back(off + amp * hw * hw / ((x - c) * (x - c) + hw * hw));
        }
        LorentzianFit r = fit_lorentzian(f, y);
        CHECK(r.converged);
        CHECK(r.center_mhz == doctest::Approx(c).epsilon(1e-6));
        CHECK(r.fwhm_mhz == doctest::Approx(fwhm).epsilon(1e-6));
        CHECK(r.amplitude == doctest::Approx(amp).epsilon(1e-6));
        CHECK(r.offset == doctest::Approx(off).epsilon(1e-6));
        CHECK(r.covariance[0][0] >= 0.0);
    }

    SUBCASE("flat and undersized scans are rejected") {
        std::vector<double> f(20), flat(20, 7.0);
        for (int j = 0; j < 20; ++j) f[j] = j;
        CHECK_THROWS_AS(fit_lorentzian(f, flat), numerical_error);
        std::vector<double> f5(5), y5(5, 1.0);
        CHECK_THROWS_AS(fit_lorentzian(f5, y5), config_error);
        std::vector<double> y19(19, 1.0);
        CHECK_THROWS_AS(fit_lorentzian(f, y19), config_error);
    }

    SUBCASE("noisy rows give the configured linewidth within errors") {
        ScanConfig sc;
        sc.emitter = EmitterParams::from_fwhm(4.0, 52.0, 0.0);
        sc.diffusion = {0.0, 1.0};
        sc.n_rows = 60;
        sc.rng_seed = 77;
        auto scan = simulate_excitation_scan(sc);
        double mean_fwhm = 0.0;
        int n = 0;
        for (const auto& row : scan.rows) {
            LorentzianFit r = fit_lorentzian(scan.freq_mhz, row);
            CHECK(r.fwhm_err_mhz < 4.0);
            CHECK(std::abs(r.fwhm_mhz - 52.0) < 4.0 * r.fwhm_err_mhz);
            mean_fwhm += r.fwhm_mhz;
            ++n;
        }
        mean_fwhm /= n;
        CHECK(mean_fwhm == doctest::Approx(52.0).epsilon(0.02));
    }
}

TEST_CASE("wandering statistics over repeated line fits") {
    SUBCASE("identical centers give zero sigma") {
        std::vector<LorentzianFit> fits(12);
        for (auto& f : fits) f.center_mhz = 123.0;
        WanderingStats w = wandering_stats(fits);
        CHECK(w.sigma_mhz == 0.0);
        CHECK(w.sigma_err_mhz == 0.0);
        CHECK(w.centers_mhz.size() == 12);
        std::uint64_t total = 0;
        for (auto c : w.hist_counts) total += c;
        CHECK(total == 12);
    }

    SUBCASE("too few fits are rejected") {
        std::vector<LorentzianFit> fits(9);
        CHECK_THROWS_AS(wandering_stats(fits), config_error);
    }

    SUBCASE("simulated wander amplitudes are recovered") {
        auto run = [&](std::optional<double> pump, double sigma,
                       std::uint64_t seed) {
            ScanConfig sc;
            sc.emitter = EmitterParams::from_fwhm(4.0, 52.0, 0.0);
            sc.diffusion = {sigma, 1.0};
            sc.half_range_mhz = 500.0;
            sc.n_rows = 60;
            sc.pump_power_uw = pump;
            sc.rng_seed = seed;
            auto scan = simulate_excitation_scan(sc);
            std::vector<LorentzianFit> fits;
            for (const auto& row : scan.rows) {
                fits.push_back(fit_lorentzian(scan.freq_mhz, row));
            }
            return wandering_stats(fits);
        };
        WanderingStats w20 = run(std::nullopt, 20.0, 101);
        CHECK(std::abs(w20.sigma_mhz - 20.0) < 5.0);
        CHECK(w20.sigma_err_mhz > 0.5);
        CHECK(w20.sigma_err_mhz < 10.0);
        WanderingStats w84 = run(2.0, 0.0, 102);  // pump map sets 84 MHz
        CHECK(std::abs(w84.sigma_mhz - 84.0) < 21.0);
    }
}

TEST_CASE("binning washout depresses the fitted overlap monotonically") {
    SimConfig cfg =
        pair_sim(4.0, 45.0, 4.0, 45.0, 630.0, 0.99, 5.0, 5.0, 0.05, 0.4, 201);
    auto s = simulate(cfg);
    std::vector<double> vhat;
    for (std::int64_t bw : {100, 250, 500}) {
        auto hist = correlate_pair(s, bw, 300.0);
        HomFitOptions opt;
        opt.period_ns = 40.0;
        HomFitResult r = fit_hom(hist, opt);
        CHECK(r.converged);
        CHECK(std::abs(r.detuning_mhz - 630.0) < 20.0);
        vhat.push_back(r.v_factor);
    }
    CHECK(vhat[0] > vhat[1]);
    CHECK(vhat[1] > vhat[2]);
    CHECK(vhat[0] > 0.9);           // 100 ps bins barely wash out the beat
    CHECK(std::abs(vhat[2] - 0.99 * 0.845) < 0.08);  // sinc at 500 ps
}

TEST_CASE("detuning sensitivity across the identifiable band") {
    std::vector<double> errors;
    int n_converged = 0;
    for (double true_dnu : {150.0, 300.0, 500.0, 650.0, 800.0}) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            SimConfig cfg = pair_sim(4.25, 59.0, 3.88, 63.0, true_dnu, 0.96, 8.0,
                                     8.0, 8e-4, 30.0, 300 + seed);
            auto s = simulate(cfg);
            auto hist = correlate_pair(s, 250, 300.0);
            HomFitOptions opt;
            opt.period_ns = 40.0;
            HomFitResult r = fit_hom(hist, opt);
            if (r.converged) ++n_converged;
            errors.push_back(std::abs(r.detuning_mhz - true_dnu));
        }
    }
    CHECK(n_converged >= 13);
    std::sort(errors.begin(), errors.end());
    double median = errors[errors.size() / 2];
    CAPTURE(median);
    CHECK(median <= 20.0);

    // Below ~100 MHz the beat is indistinguishable from the wander envelope.
    SimConfig cfg = pair_sim(4.25, 59.0, 3.88, 63.0, 30.0, 0.96, 8.0, 8.0, 8e-4,
                             30.0, 399);
    auto s = simulate(cfg);
    auto hist = correlate_pair(s, 250, 300.0);
    HomFitOptions opt;
    opt.period_ns = 40.0;
    HomFitResult r = fit_hom(hist, opt);
    CHECK(r.detuning_unidentifiable);
}

TEST_CASE("detuning confidence intervals are calibrated") {
    int hits = 0, n_total = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        SimConfig cfg = pair_sim(4.0, 45.0, 4.0, 45.0, 500.0, 0.9, 5.0, 5.0,
                                 0.05, 0.3, 1000 + seed);
        auto s = simulate(cfg);
        auto hist = correlate_pair(s, 250, 300.0);
        HomFitOptions opt;
        opt.period_ns = 40.0;
        HomFitResult r = fit_hom(hist, opt);
        if (!r.converged) continue;
        ++n_total;
        if (std::abs(r.detuning_mhz - 500.0) <= r.detuning_err_mhz) ++hits;
    }
    REQUIRE(n_total >= 195);
    double frac = static_cast<double>(hits) / n_total;
    CAPTURE(frac);
    CHECK(frac >= 0.60);
    CHECK(frac <= 0.75);
}

TEST_CASE("fit-result serialization carries parameters and flags") {
    TwoEmitterParams truth;
    truth.emitter1 = EmitterParams::from_fwhm(4.0, 60.0);
    truth.emitter2 = EmitterParams::from_fwhm(4.0, 60.0, 354.0);
    truth.detuning_mhz = 354.0;
    truth.v_factor = 0.9;
    truth.period_ns = 40.0;
    auto hist = synth_hist(
        [&](double tau) { return g2_hom_distinct(tau, truth); }, 250, 300.0, 1e6);
    HomFitOptions opt;
    opt.period_ns = 40.0;
    HomFitResult r = fit_hom(hist, opt);
    std::string js = to_json(r);
    CHECK(js.find("\"detuning_mhz\"") != std::string::npos);
    CHECK(js.find("\"chi2_per_dof\"") != std::string::npos);
    CHECK(js.find("\"covariance\"") != std::string::npos);
    CHECK(js.find("\"resolution_limited\"") != std::string::npos);
    std::string cs = to_csv(r);
    CHECK(cs.rfind("parameter,value,error\n", 0) == 0);
    CHECK(cs.find("v_factor,") != std::string::npos);
}
