#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "homsim/correlator.hpp"
#include "homsim/model.hpp"

namespace homsim {

// --- excitation-line fitting ------------------------------------------------

struct LorentzianFit {
    double center_mhz = 0.0;
    double fwhm_mhz = 0.0;
    double amplitude = 0.0;  // peak counts above the offset
    double offset = 0.0;
    double center_err_mhz = 0.0;
    double fwhm_err_mhz = 0.0;
    double amplitude_err = 0.0;
    double offset_err = 0.0;
    // Parameter order: center, fwhm, amplitude, offset.
    std::array<std::array<double, 4>, 4> covariance{};
    double chi2_per_dof = 0.0;
    int n_iterations = 0;
    bool converged = false;
};

// Weighted least squares of offset + amplitude*(hw^2 / (df^2 + hw^2)) with
// Poisson weights (variance floor 1).  Throws config_error for < 8 points,
// numerical_error for a flat scan or non-convergence.
LorentzianFit fit_lorentzian(const std::vector<double>& freq_mhz,
                             const std::vector<double>& counts);

// Center-frequency wandering statistics over repeated line fits.
struct WanderingStats {
    double sigma_mhz = 0.0;      // sample std of fitted centers
    double sigma_err_mhz = 0.0;  // jackknife error of the std
    std::vector<double> centers_mhz;
    std::vector<double> hist_edges_mhz;  // hist_counts.size() + 1 edges
    std::vector<std::uint64_t> hist_counts;
};

// Requires >= 10 fits (config_error otherwise).
WanderingStats wandering_stats(const std::vector<LorentzianFit>& fits);

// --- autocorrelation fitting --------------------------------------------------

struct HbtFitResult {
    double t1_ns = 0.0;
    double t1_err_ns = 0.0;
    double scale = 0.0;       // fitted side-peak height, counts
    double background = 0.0;  // flat coincidence floor, counts per bin
    // Central-window area normalized to the mean side-peak area (|n| >= 2),
    // with first-order Poisson ratio error.
    double g2_zero_area = 0.0;
    double g2_zero_err = 0.0;
    double chi2_per_dof = 0.0;
    int n_iterations = 0;
    bool converged = false;
};

// Fits the side-peak comb (all |tau| > period/2) for the lifetime, then
// normalizes the central area by the mean side-peak area.  Requires the
// histogram to span at least 5 side peaks per side.
HbtFitResult fit_hbt(const CorrelationHistogram& hist, double period_ns);

// --- interference-histogram fitting -----------------------------------------

// Any field set here is held fixed during the fit; everything else is free.
struct HomFitOptions {
    std::optional<double> detuning_mhz;
    std::optional<double> v_factor;
    std::optional<double> t1_1_ns;
    std::optional<double> t1_2_ns;
    std::optional<double> t2_1_ns;
    std::optional<double> t2_2_ns;
    std::optional<double> sigma_joint_mhz;
    double period_ns = 40.0;
    // Detector-response Gaussian convolved into the model (not fitted).  The
    // default 0 reproduces the plain correlation function, so finite bin
    // width and jitter depress the fitted v instead of being deconvolved.
    double conv_sigma_ps = 0.0;
    double grid_step_mhz = 25.0;  // detuning multi-start spacing
    int max_iterations = 200;
};

struct HomFitResult {
    double detuning_mhz = 0.0;
    double v_factor = 0.0;
    double t1_1_ns = 0.0;
    double t1_2_ns = 0.0;
    double t2_1_ns = 0.0;
    double t2_2_ns = 0.0;
    double sigma_joint_mhz = 0.0;  // sqrt(sigma1^2 + sigma2^2); only the joint
                                   // value is identifiable
    double scale = 0.0;

    double detuning_err_mhz = 0.0;
    double v_factor_err = 0.0;
    double t1_1_err_ns = 0.0;
    double t1_2_err_ns = 0.0;
    double t2_1_err_ns = 0.0;
    double t2_2_err_ns = 0.0;
    double sigma_joint_err_mhz = 0.0;
    double scale_err = 0.0;

    double chi2_per_dof = 0.0;
    int n_iterations = 0;
    bool converged = false;
    // Detuning at (or beyond) the bin-width Nyquist limit, or an aliased
    // beat detected through a significantly negative fitted v.
    bool resolution_limited = false;
    // |detuning| below the ~100 MHz sensitivity floor.
    bool detuning_unidentifiable = false;
    double nyquist_mhz = 0.0;

    // Covariance over the free parameters only, row-major, ordered as
    // free_names.  Internal coherence parameter "rc2" = 1/t2_1 + 1/t2_2.
    std::vector<std::string> free_names;
    std::vector<double> covariance;
};

// Weighted least squares of the two-emitter interference correlation against
// a histogram, multi-started over detuning up to the Nyquist limit of the
// bin width.  Throws config_error if fewer than 4 side peaks are spanned,
// numerical_error on non-convergence.
HomFitResult fit_hom(const CorrelationHistogram& hist,
                     const HomFitOptions& options = {});

// Fit-model value at one delay; p = [detuning_mhz, v, t1_1_ns, t1_2_ns,
// rc2 = 1/t2_1 + 1/t2_2 (1/ns), sigma_joint_mhz, scale].  When grad is given
// it receives the analytic d(model)/dp.  Exposed for validation.
double hom_fit_model(double tau_ns, const std::array<double, 7>& p,
                     double period_ns, double conv_sigma_ps = 0.0,
                     std::array<double, 7>* grad = nullptr);

// --- serialization -----------------------------------------------------------

// JSON object with parameters, errors, flags, chi2, and covariance.
std::string to_json(const HomFitResult& r);
std::string to_json(const HbtFitResult& r);
std::string to_json(const LorentzianFit& r);

// Long-form CSV: "parameter,value,error" rows.
std::string to_csv(const HomFitResult& r);
std::string to_csv(const HbtFitResult& r);

}  // namespace homsim
