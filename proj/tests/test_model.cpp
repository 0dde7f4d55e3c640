#include "homsim/model.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "doctest.h"
#include "homsim/errors.hpp"
#include "homsim/rng.hpp"
#include "homsim/units.hpp"

using namespace homsim;

namespace {

// Reference parameter set used throughout: two near-identical emitters with
// ~4 ns lifetimes, ~60 MHz linewidths, strong mode overlap, small slow
// frequency wander, 25 MHz pulse rate.
TwoEmitterParams reference_pair(double detuning_mhz = 0.0) {
    TwoEmitterParams p;
    p.emitter1 = EmitterParams::from_fwhm(4.25, 59.0);
    p.emitter2 = EmitterParams::from_fwhm(3.88, 63.0);
    p.detuning_mhz = detuning_mhz;
    p.v_factor = 0.96;
    p.sigma1_mhz = 8.0;
    p.sigma2_mhz = 8.0;
    p.period_ns = 40.0;
    return p;
}

// Emitters whose pulse period dwarfs the lifetime, so inter-peak tail
// overlap is below 1e-6 and idealized identities hold exactly.
TwoEmitterParams separated_pair(double v, double detuning_mhz) {
    TwoEmitterParams p;
    p.emitter1 = EmitterParams::from_t2(1.4, 2.8);
    p.emitter2 = EmitterParams::from_t2(1.4, 2.8);
    p.detuning_mhz = detuning_mhz;
    p.v_factor = v;
    p.period_ns = 40.0;
    return p;
}

}  // namespace

TEST_CASE("coherence time from linewidth and back") {
    CHECK(t2_from_fwhm(52.0) == doctest::Approx(6.121343965072898).epsilon(1e-12));
    CHECK(t2_from_fwhm(45.0) == doctest::Approx(7.07355302630646).epsilon(1e-12));
    CHECK(fwhm_from_t2(t2_from_fwhm(63.0)) == doctest::Approx(63.0).epsilon(1e-12));
    CHECK_THROWS_AS(t2_from_fwhm(0.0), config_error);
    CHECK_THROWS_AS(t2_from_fwhm(-5.0), config_error);
    CHECK_THROWS_AS(fwhm_from_t2(0.0), config_error);
}

TEST_CASE("pure-dephasing time") {
    CHECK(dephasing_time(4.0, 6.1) == doctest::Approx(25.68421052631578).epsilon(1e-12));
    CHECK(dephasing_time(4.0, 4.0) == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(std::isinf(dephasing_time(4.0, 8.0)));
    CHECK_THROWS_AS(dephasing_time(4.0, 8.1), config_error);
}

TEST_CASE("visibility upper bound t2/(2*t1)") {
    CHECK(max_visibility(4.0, t2_from_fwhm(45.0)) ==
          doctest::Approx(0.8841941282883075).epsilon(1e-12));
    CHECK(max_visibility(4.0, 8.0) == doctest::Approx(1.0));
    CHECK(max_visibility(4.0, 4.0) == doctest::Approx(0.5));
    CHECK(max_visibility(1.0, 3.0) == doctest::Approx(1.0));  // clamped
}

TEST_CASE("first-order coherence envelope") {
    auto e = EmitterParams::from_t2(4.0, 6.1);
    CHECK(g1_envelope(0.0, e) == doctest::Approx(1.0));
    CHECK(g1_envelope(6.1, e) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(g1_envelope(-6.1, e) == doctest::Approx(g1_envelope(6.1, e)));
}

TEST_CASE("emitter parameter validation") {
    CHECK_THROWS_AS(EmitterParams::from_t2(4.0, 9.0), config_error);  // t2 > 2 t1
    CHECK_THROWS_AS(EmitterParams::from_t2(-1.0, 1.0), config_error);
    EmitterParams bad = EmitterParams::from_fwhm(4.0, 52.0);
    bad.fwhm_mhz = 60.0;  // now inconsistent with t2
    CHECK_THROWS_AS(bad.validate(), config_error);
}

TEST_CASE("pulsed single-emitter autocorrelation comb") {
    // Deep antibunching at zero delay.
    CHECK(g2_hbt_model(0.0, 4.0, 40.0) ==
          doctest::Approx(1.1350497729026824e-05).epsilon(1e-9));
    CHECK(g2_hbt_model(0.0, 4.0, 40.0) < 2.0 * std::exp(-10.0));
    // Side-peak maximum is 1/(2 t1) plus neighbor tails.
    CHECK(g2_hbt_model(40.0, 4.0, 40.0) ==
          doctest::Approx(0.12500567550652042).epsilon(1e-9));

    // Each side peak carries unit area per period once tails are negligible
    // (period >> lifetime); with t1 = 1.4 ns the truncation error is < 1e-6.
    struct Ctx {
        double t1, T;
    } ctx{1.4, 40.0};
    auto f = +[](double tau, const void* c) {
        auto* k = static_cast<const Ctx*>(c);
        return g2_hbt_model(tau, k->t1, k->T);
    };
    double area = integrate(f, &ctx, 20.0, 60.0, 0.25);
    CHECK(area == doctest::Approx(1.0).epsilon(1e-6));

    // In the physical regime (t1 = 4 ns) the neighbor-tail deficit is real.
    Ctx phys{4.0, 40.0};
    CHECK(integrate(f, &phys, 20.0, 60.0, 0.25) ==
          doctest::Approx(0.9966311794515708).epsilon(1e-7));
}

TEST_CASE("two-emitter correlation: pinned values") {
    // Fully distinguishable pair: central value is half a side peak.
    TwoEmitterParams v0;
    v0.emitter1 = EmitterParams::from_t2(4.0, 6.0);
    v0.emitter2 = EmitterParams::from_t2(4.0, 6.0);
    v0.v_factor = 0.0;
    v0.period_ns = 40.0;
    CHECK(g2_hom_distinct(0.0, v0) ==
          doctest::Approx(0.5000681019557038).epsilon(1e-9));

    // Perfect interference forces full suppression at zero delay.
    auto ideal = separated_pair(1.0, 0.0);
    CHECK(g2_hom_distinct(0.0, ideal) == doctest::Approx(0.0).epsilon(1e-6));

    // Reference pair at zero detuning.
    CHECK(g2_hom_distinct(0.0, reference_pair()) ==
          doctest::Approx(0.020084179443197625).epsilon(1e-9));

    // The beat's first cosine zero sits at 1/(4*detuning).
    auto beat = reference_pair(354.0);
    double tau0 = 1.0 / (4.0 * 354.0e-3);  // MHz -> 1/ns
    CHECK(tau0 == doctest::Approx(0.7062).epsilon(1e-3));
    double phase = rad_per_mhz_ns * beat.detuning_mhz * tau0;
    CHECK(std::cos(phase) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("two-emitter correlation: symmetry and structure properties") {
    Rng rng(20260815u);
    for (int i = 0; i < 1000; ++i) {
        auto random_emitter = [&rng]() {
            double t1 = 1.0 + 5.0 * rng.uniform();
            double t2 = (0.2 + 1.7 * rng.uniform()) * t1;
            return EmitterParams::from_t2(t1, t2);
        };
        TwoEmitterParams p;
        p.emitter1 = random_emitter();
        p.emitter2 = random_emitter();
        p.detuning_mhz = 2000.0 * (rng.uniform() - 0.5);
        p.v_factor = rng.uniform();
        p.sigma1_mhz = 100.0 * rng.uniform();
        p.sigma2_mhz = 100.0 * rng.uniform();
        p.period_ns = 20.0 + 60.0 * rng.uniform();
        double tau = 3.0 * p.period_ns * (rng.uniform() - 0.5);

        // Even in tau.
        CHECK(g2_hom_distinct(tau, p) ==
              doctest::Approx(g2_hom_distinct(-tau, p)).epsilon(1e-12));
        // Non-negative for physical v.
        CHECK(g2_hom_distinct(tau, p) >= -1e-12);
    }

    // With v = 0 the detuning and wander drop out identically.
    auto p = reference_pair();
    p.v_factor = 0.0;
    for (double tau = -60.0; tau <= 60.0; tau += 0.37) {
        auto pa = p, pb = p;
        pa.detuning_mhz = 123.0;
        pb.detuning_mhz = 877.0;
        pa.sigma1_mhz = 5.0;
        pb.sigma1_mhz = 95.0;
        CHECK(g2_hom_distinct(tau, pa) == g2_hom_distinct(tau, pb));
    }
}

TEST_CASE("predicted visibility: pinned values and monotonicity") {
    CHECK(predict_visibility(reference_pair(0.0)) ==
          doctest::Approx(0.5893350610064159).epsilon(2e-6));
    CHECK(predict_visibility(reference_pair(50.0)) ==
          doctest::Approx(0.3650785556030818).epsilon(2e-6));
    CHECK(predict_visibility(reference_pair(40.0)) ==
          doctest::Approx(0.42469932133012617).epsilon(2e-6));

    // v = 0 kills the visibility exactly when peaks are well separated.
    CHECK(predict_visibility(separated_pair(0.0, 0.0)) ==
          doctest::Approx(0.0).epsilon(1e-6));
    CHECK(predict_visibility(separated_pair(0.0, 300.0)) ==
          doctest::Approx(0.0).epsilon(1e-6));
    // In the physical regime residual tail overlap shifts it slightly.
    auto v0 = reference_pair(0.0);
    v0.v_factor = 0.0;
    CHECK(predict_visibility(v0) ==
          doctest::Approx(-0.00745520535167221).epsilon(1e-4));

    // Central area is non-increasing in v (monotone interference strength).
    auto base = reference_pair(0.0);
    double prev = std::numeric_limits<double>::lowest();
    for (double v = 0.0; v <= 1.0; v += 0.1) {
        base.v_factor = v;
        double vis = predict_visibility(base);
        CHECK(vis >= prev - 1e-12);  // A0 down <=> V up
        prev = vis;
    }

    // Even in detuning, non-increasing in |detuning| up to 1/(2 t1).
    auto pd = reference_pair(0.0);
    double f_half_t1 = 1e3 / (2.0 * pd.emitter1.t1_ns);  // MHz
    pd.sigma1_mhz = pd.sigma2_mhz = 0.0;
    double last = 2.0;
    for (double d = 0.0; d <= f_half_t1; d += f_half_t1 / 12.0) {
        pd.detuning_mhz = d;
        double vp = predict_visibility(pd);
        pd.detuning_mhz = -d;
        CHECK(predict_visibility(pd) == doctest::Approx(vp).epsilon(1e-10));
        CHECK(vp <= last + 1e-9);
        last = vp;
    }
}

TEST_CASE("visibility from peak areas") {
    auto mk = [](double a0, double an, int n_side = 10) {
        PeakAreas pa;
        pa.period_ns = 40.0;
        pa.integration_halfwidth_ns = 20.0;
        pa.areas[0] = {a0, std::sqrt(a0)};
        pa.areas[1] = {an, std::sqrt(an)};
        pa.areas[-1] = {an, std::sqrt(an)};
        for (int n = 2; n < 2 + n_side / 2; ++n) {
            pa.areas[n] = {an, std::sqrt(an)};
            pa.areas[-n] = {an, std::sqrt(an)};
        }
        return pa;
    };

    CHECK(visibility_from_areas(mk(0.0, 1.0)).visibility == doctest::Approx(1.0));
    CHECK(visibility_from_areas(mk(0.5, 1.0)).visibility == doctest::Approx(0.0));
    // Exactly zero at the distinguishable calibration point.
    CHECK(visibility_from_areas(mk(123.0, 246.0)).visibility == 0.0);

    // Pinned error-propagation value: a0=100 against ten side peaks of 200.
    std::map<int, double> side;
    for (int n = 2; n <= 6; ++n) {
        side[n] = 200.0;
        side[-n] = 200.0;
    }
    CHECK(propagate_visibility_error(100.0, side) ==
          doctest::Approx(0.10246950765959599).epsilon(1e-12));
    // sqrt(N) scaling: quadrupling all counts halves the error.
    std::map<int, double> side4;
    for (const auto& [n, a] : side) side4[n] = 4.0 * a;
    CHECK(propagate_visibility_error(400.0, side4) ==
          doctest::Approx(0.5 * 0.10246950765959599).epsilon(1e-12));
    // Zero central area: error comes from the side-peak term only.
    CHECK(propagate_visibility_error(0.0, side) == doctest::Approx(0.0));

    // Monte Carlo resampling oracle for the propagated error.
    {
        Rng rng(7u);
        double a0 = 100.0;
        double an = 200.0;
        int m = 10;
        double sum = 0.0, sum2 = 0.0;
        const int trials = 100000;
        for (int t = 0; t < trials; ++t) {
            double a0s = static_cast<double>(rng.poisson(a0));
            double mean = 0.0;
            for (int j = 0; j < m; ++j)
                mean += static_cast<double>(rng.poisson(an));
            mean /= m;
            double v = (mean - 2.0 * a0s) / mean;
            sum += v;
            sum2 += v * v;
        }
        double mc_std = std::sqrt(sum2 / trials - (sum / trials) * (sum / trials));
        CHECK(mc_std == doctest::Approx(0.10246950765959599).epsilon(0.02));
    }

    // Degenerate inputs.
    PeakAreas no_side;
    no_side.areas[0] = {1.0, 1.0};
    CHECK_THROWS_AS(visibility_from_areas(no_side), numerical_error);
    PeakAreas no_zero;
    no_zero.areas[2] = {1.0, 1.0};
    no_zero.areas[-2] = {1.0, 1.0};
    CHECK_THROWS_AS(visibility_from_areas(no_zero), numerical_error);

    // Narrow-window areas populate the v-factor fields.
    auto wide = mk(60.0, 100.0);
    auto narrow = mk(4.0, 100.0);
    auto est = visibility_from_areas(wide, {-1, 1}, &narrow);
    CHECK(est.visibility == doctest::Approx(1.0 - 2.0 * 0.6));
    CHECK(est.v_factor == doctest::Approx(1.0 - 2.0 * 0.04));
    CHECK(est.v_factor_err > 0.0);
}

TEST_CASE("post-selected v and polarization visibility") {
    CHECK(v_factor_from_zero(0.0) == doctest::Approx(1.0));
    CHECK(v_factor_from_zero(0.5) == doctest::Approx(0.0));
    CHECK(v_factor_from_zero(0.02) == doctest::Approx(0.96));
    CHECK(v_factor_from_zero(0.6) < 0.0);  // reported, not clamped
    CHECK_THROWS_AS(v_factor_from_zero(-0.1), config_error);

    CHECK(polarization_visibility(1.0, 0.12) == doctest::Approx(0.88));
    CHECK(polarization_visibility(0.7, 0.7) == doctest::Approx(0.0));
    CHECK(polarization_visibility(0.9, 0.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(polarization_visibility(0.0, 0.1), numerical_error);
}
