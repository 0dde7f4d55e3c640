#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <utility>

namespace homsim {

// One pulsed emitter's optical parameters.  Times in ns, linewidth in MHz,
// center frequency as an offset from a common reference in MHz.
struct EmitterParams {
    double t1_ns = 0.0;
    double t2_ns = 0.0;
    double fwhm_mhz = 0.0;
    double center_freq_mhz = 0.0;

    static EmitterParams from_fwhm(double t1_ns, double fwhm_mhz,
                                   double center_freq_mhz = 0.0);
    static EmitterParams from_t2(double t1_ns, double t2_ns,
                                 double center_freq_mhz = 0.0);

    // Throws config_error when t1/t2 are non-positive, t2 exceeds 2*t1, or a
    // provided fwhm disagrees with t2 = 1/(pi*fwhm) beyond 1e-9 relative.
    void validate() const;
};

// Parameters of the two-emitter interference correlation function.
struct TwoEmitterParams {
    EmitterParams emitter1;
    EmitterParams emitter2;
    double detuning_mhz = 0.0;   // relative center-frequency difference
    double v_factor = 1.0;       // mode-overlap factor in [0, 1]
    double sigma1_mhz = 0.0;     // slow center-frequency wander, emitter 1
    double sigma2_mhz = 0.0;     // slow center-frequency wander, emitter 2
    double period_ns = 40.0;     // pulse separation

    void validate() const;
};

// Integrated coincidence-peak areas keyed by peak index n (delay n*period).
struct PeakAreas {
    // n -> (area, one-sigma Poisson error)
    std::map<int, std::pair<double, double>> areas;
    double period_ns = 0.0;
    double integration_halfwidth_ns = 0.0;
};

// Peak-area visibility and the post-selected narrow-window variant.  Both are
// the same ratio estimator evaluated at different integration halfwidths
// (half a period for `visibility`, about one histogram bin for `v_factor`).
struct VisibilityEstimate {
    double visibility = 0.0;
    double visibility_err = 0.0;
    double v_factor = 0.0;
    double v_factor_err = 0.0;
};

// --- coherence relations -------------------------------------------------

// Coherence time from linewidth: t2 = 1/(pi*fwhm), MHz -> ns.
double t2_from_fwhm(double fwhm_mhz);
double fwhm_from_t2(double t2_ns);

// Pure-dephasing time from 1/t2 = 1/(2*t1) + 1/t2_star.  Returns +inf for a
// lifetime-limited emitter (t2 == 2*t1); throws for t2 > 2*t1.
double dephasing_time(double t1_ns, double t2_ns);

// Upper bound on two-photon interference visibility, t2/(2*t1), clamped to
// [0, 1].
double max_visibility(double t1_ns, double t2_ns);

// --- correlation functions ------------------------------------------------

// First-order coherence envelope |g1(tau)| = exp(-|tau|/t2).
double g1_envelope(double tau_ns, const EmitterParams& emitter);

// Pulsed autocorrelation of a single ideal emitter: a comb of side peaks,
// each normalized to unit area over one period, and no peak at zero delay.
double g2_hbt_model(double tau_ns, double t1_ns, double period_ns);

// Two-emitter interference cross-correlation.  Comb terms are normalized to
// unit side-peak height so that far side peaks approach 1 and a fully
// distinguishable pair (v = 0) gives a central value of 1/2.
double g2_hom_distinct(double tau_ns, const TwoEmitterParams& params);

// --- visibility estimators -------------------------------------------------

// Peak-area visibility: V = (<A_n> - 2*A0) / <A_n>, with <A_n> the mean area
// over side peaks not in `exclude` (|n| > 1 by default).  Errors are
// first-order Poisson propagation.  When `narrow` is given, its areas fill
// the v_factor fields with the same estimator.
VisibilityEstimate visibility_from_areas(const PeakAreas& areas,
                                         const std::set<int>& exclude = {-1, 1},
                                         const PeakAreas* narrow = nullptr);

// One-sigma error of the visibility estimator for a central area `a0` and
// side-peak counts `side` (all raw Poisson counts).
double propagate_visibility_error(double a0, const std::map<int, double>& side);

// Post-selected indistinguishability from the zero-delay correlation value,
// v = 1 - 2*g2(0).  Negative results are reported as-is.
double v_factor_from_zero(double g2_hom_at_zero);

// Visibility from central-peak areas in crossed vs parallel polarization.
double polarization_visibility(double g2_perp_area, double g2_par_area);

// Model-predicted peak-area visibility: integrates g2_hom_distinct over
// [-halfwidth, halfwidth] around delay 0 and around a far side peak, then
// forms the area ratio.  Default halfwidth is half a period.
double predict_visibility(const TwoEmitterParams& params,
                          std::optional<double> halfwidth_ns = std::nullopt);

// Composite Gauss-Legendre quadrature used by predict_visibility; exposed for
// tests.  Subdivides [a, b] into panels no wider than `max_panel`.
double integrate(double (*f)(double, const void*), const void* ctx, double a,
                 double b, double max_panel);

}  // namespace homsim
