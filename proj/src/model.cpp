#include "homsim/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "homsim/errors.hpp"
#include "homsim/units.hpp"

namespace homsim {

namespace {

// 16-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; mirrored).
constexpr std::array<double, 8> kGlNodes = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
    0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
    0.9445750230732326, 0.9894009349916499};
constexpr std::array<double, 8> kGlWeights = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
    0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
    0.0622535239386479, 0.0271524594117541};

double comb_unit_height(double tau, double t1, double period, bool include_zero) {
    // Sum of exp(-|tau - k*period|/t1) over integer k, truncated once the
    // omitted terms are below exp(-20) of a peak.
    double reach = std::abs(tau) + 20.0 * t1;
    int kmax = static_cast<int>(std::ceil(reach / period));
    double s = 0.0;
    for (int k = -kmax; k <= kmax; ++k) {
        if (!include_zero && k == 0) continue;
        s += std::exp(-std::abs(tau - k * period) / t1);
    }
    return s;
}

struct VisCtx {
    const TwoEmitterParams* params;
};

double eval_hom(double tau, const void* ctx) {
    return g2_hom_distinct(tau, *static_cast<const VisCtx*>(ctx)->params);
}

}  // namespace

EmitterParams EmitterParams::from_fwhm(double t1_ns, double fwhm_mhz,
                                       double center_freq_mhz) {
    EmitterParams e;
    e.t1_ns = t1_ns;
    e.fwhm_mhz = fwhm_mhz;
    e.t2_ns = t2_from_fwhm(fwhm_mhz);
    e.center_freq_mhz = center_freq_mhz;
    e.validate();
    return e;
}

EmitterParams EmitterParams::from_t2(double t1_ns, double t2_ns,
                                     double center_freq_mhz) {
    EmitterParams e;
    e.t1_ns = t1_ns;
    e.t2_ns = t2_ns;
    e.fwhm_mhz = fwhm_from_t2(t2_ns);
    e.center_freq_mhz = center_freq_mhz;
    e.validate();
    return e;
}

void EmitterParams::validate() const {
    if (!(t1_ns > 0.0)) throw config_error("emitter t1 must be > 0 ns");
    if (!(t2_ns > 0.0)) throw config_error("emitter t2 must be > 0 ns");
    // Allow a sliver of rounding slack on the coherence bound.
    if (t2_ns > 2.0 * t1_ns * (1.0 + 1e-12))
        throw config_error("emitter t2 exceeds the coherence bound 2*t1");
    if (fwhm_mhz != 0.0) {
        double implied = t2_from_fwhm(fwhm_mhz);
        if (std::abs(t2_ns - implied) / t2_ns >= 1e-9)
            throw config_error("emitter fwhm and t2 are mutually inconsistent");
    }
}

void TwoEmitterParams::validate() const {
    emitter1.validate();
    emitter2.validate();
    if (!(period_ns > 0.0)) throw config_error("period must be > 0 ns");
    if (v_factor < 0.0 || v_factor > 1.0)
        throw config_error("v_factor must lie in [0, 1]");
    if (sigma1_mhz < 0.0 || sigma2_mhz < 0.0)
        throw config_error("sigma1/sigma2 must be >= 0");
}

double t2_from_fwhm(double fwhm_mhz) {
    if (!(fwhm_mhz > 0.0)) throw config_error("fwhm must be > 0 MHz");
    // fwhm in MHz = 1e-3/ns, so t2[ns] = 1e3 / (pi * fwhm[MHz]).
    return 1e3 / (pi * fwhm_mhz);
}

double fwhm_from_t2(double t2_ns) {
    if (!(t2_ns > 0.0)) throw config_error("t2 must be > 0 ns");
    return 1e3 / (pi * t2_ns);
}

double dephasing_time(double t1_ns, double t2_ns) {
    if (!(t1_ns > 0.0) || !(t2_ns > 0.0))
        throw config_error("t1 and t2 must be > 0 ns");
    if (t2_ns > 2.0 * t1_ns * (1.0 + 1e-12))
        throw config_error("t2 > 2*t1: no dephasing time exists");
    double rate = 1.0 / t2_ns - 1.0 / (2.0 * t1_ns);
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / rate;
}

double max_visibility(double t1_ns, double t2_ns) {
    if (!(t1_ns > 0.0) || !(t2_ns > 0.0))
        throw config_error("t1 and t2 must be > 0 ns");
    return std::clamp(t2_ns / (2.0 * t1_ns), 0.0, 1.0);
}

double g1_envelope(double tau_ns, const EmitterParams& emitter) {
    return std::exp(-std::abs(tau_ns) / emitter.t2_ns);
}

double g2_hbt_model(double tau_ns, double t1_ns, double period_ns) {
    if (!(t1_ns > 0.0) || !(period_ns > 0.0))
        throw config_error("t1 and period must be > 0 ns");
    return comb_unit_height(tau_ns, t1_ns, period_ns, false) / (2.0 * t1_ns);
}

double g2_hom_distinct(double tau_ns, const TwoEmitterParams& p) {
    const double t1a = p.emitter1.t1_ns;
    const double t1b = p.emitter2.t1_ns;
    const double t1m = 0.5 * (t1a + t1b);
    const double T = p.period_ns;

    // Autocorrelation combs of the two emitters (no zero-delay peak) and the
    // all-peaks cross comb, all normalized to unit peak height so that far
    // side peaks of the total approach 1.
    double h1 = comb_unit_height(tau_ns, t1a, T, false);
    double h2 = comb_unit_height(tau_ns, t1b, T, false);
    double cross = comb_unit_height(tau_ns, t1m, T, true);
    double fill = 1.0 - std::exp(-T / t1m);

    double sig2 = p.sigma1_mhz * p.sigma1_mhz + p.sigma2_mhz * p.sigma2_mhz;
    // sigma in MHz, tau in ns: the exponent carries the same MHz->1/ns
    // conversion squared as rad_per_mhz_ns.
    double wander = std::exp(-2.0 * pi * pi * sig2 * tau_ns * tau_ns * 1e-6);
    double interference = 2.0 * p.v_factor * g1_envelope(tau_ns, p.emitter1) *
                          g1_envelope(tau_ns, p.emitter2) * wander *
                          std::cos(rad_per_mhz_ns * p.detuning_mhz * tau_ns);

    return 0.25 * (h1 + h2 + 2.0 * fill * cross - interference);
}

double integrate(double (*f)(double, const void*), const void* ctx, double a,
                 double b, double max_panel) {
    if (b <= a) return 0.0;
    int n_panels = std::max(1, static_cast<int>(std::ceil((b - a) / max_panel)));
    double w = (b - a) / n_panels;
    double total = 0.0;
    for (int i = 0; i < n_panels; ++i) {
        double lo = a + i * w;
        double mid = lo + 0.5 * w;
        double half = 0.5 * w;
        double s = 0.0;
        for (std::size_t j = 0; j < kGlNodes.size(); ++j) {
            double d = half * kGlNodes[j];
            s += kGlWeights[j] * (f(mid - d, ctx) + f(mid + d, ctx));
        }
        total += s * half;
    }
    return total;
}

VisibilityEstimate visibility_from_areas(const PeakAreas& areas,
                                         const std::set<int>& exclude,
                                         const PeakAreas* narrow) {
    auto ratio = [&exclude](const PeakAreas& pa, double& value, double& err) {
        auto it0 = pa.areas.find(0);
        if (it0 == pa.areas.end())
            throw numerical_error("peak areas lack the zero-delay peak");
        double a0 = it0->second.first;
        std::map<int, double> side;
        for (const auto& [n, ae] : pa.areas) {
            if (n == 0 || exclude.count(n) || std::abs(n) <= 1) continue;
            side.emplace(n, ae.first);
        }
        if (side.empty()) throw numerical_error("no side peaks to normalize to");
        double mean = 0.0;
        for (const auto& [n, a] : side) mean += a;
        mean /= static_cast<double>(side.size());
        if (!(mean > 0.0)) throw numerical_error("zero mean side-peak area");
        value = (mean - 2.0 * a0) / mean;
        err = propagate_visibility_error(a0, side);
    };

    VisibilityEstimate est;
    ratio(areas, est.visibility, est.visibility_err);
    if (narrow != nullptr) {
        ratio(*narrow, est.v_factor, est.v_factor_err);
    } else {
        est.v_factor = std::numeric_limits<double>::quiet_NaN();
        est.v_factor_err = std::numeric_limits<double>::quiet_NaN();
    }
    return est;
}

double propagate_visibility_error(double a0, const std::map<int, double>& side) {
    if (side.empty()) throw numerical_error("no side peaks to normalize to");
    double m = static_cast<double>(side.size());
    double mean = 0.0;
    double var_sum = 0.0;  // sum of per-peak Poisson variances
    for (const auto& [n, a] : side) {
        if (a < 0.0) throw numerical_error("negative side-peak counts");
        mean += a;
        var_sum += a;
    }
    mean /= m;
    if (!(mean > 0.0)) throw numerical_error("zero mean side-peak area");
    double var_mean = var_sum / (m * m);
    // V = 1 - 2*a0/mean; first-order propagation of sqrt(N) errors.
    double d_a0 = 2.0 / mean;
    double d_mean = 2.0 * a0 / (mean * mean);
    return std::sqrt(d_a0 * d_a0 * a0 + d_mean * d_mean * var_mean);
}

double v_factor_from_zero(double g2_hom_at_zero) {
    if (g2_hom_at_zero < 0.0)
        throw config_error("zero-delay correlation value must be >= 0");
    return 1.0 - 2.0 * g2_hom_at_zero;
}

double polarization_visibility(double g2_perp_area, double g2_par_area) {
    if (!(g2_perp_area > 0.0))
        throw numerical_error("perpendicular-polarization area must be > 0");
    return (g2_perp_area - g2_par_area) / g2_perp_area;
}

double predict_visibility(const TwoEmitterParams& params,
                          std::optional<double> halfwidth_ns) {
    params.validate();
    const double T = params.period_ns;
    double hw = halfwidth_ns.value_or(0.5 * T);
    if (!(hw > 0.0) || hw > 0.5 * T)
        throw config_error("integration halfwidth must lie in (0, period/2]");
    VisCtx ctx{&params};
    const double panel = 0.25;  // ns; resolves both the combs and the beats
    // Split the central integral at 0 where the integrand has a kink.
    double a0 = integrate(&eval_hom, &ctx, -hw, 0.0, panel) +
                integrate(&eval_hom, &ctx, 0.0, hw, panel);
    const int far = 10;
    double an = integrate(&eval_hom, &ctx, far * T - hw, far * T, panel) +
                integrate(&eval_hom, &ctx, far * T, far * T + hw, panel);
    return (an - 2.0 * a0) / an;
}

}  // namespace homsim
