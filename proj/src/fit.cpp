#include "homsim/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "homsim/errors.hpp"
#include "homsim/levmar.hpp"
#include "homsim/units.hpp"
#include "json.hpp"

namespace homsim {

namespace {

constexpr double kBadCost = 1e15;

double poisson_sigma(double counts) { return std::sqrt(std::max(counts, 1.0)); }

// ---- closed-form pulse comb -------------------------------------------------
//
// sum over all integers k of exp(-|tau - k*T|/t1).  Splitting the sum at tau
// turns both halves into geometric series, so the infinite comb (and its t1
// derivative) costs three exponentials.
struct CombEval {
    double value = 0.0;
    double d_t1 = 0.0;
};

CombEval comb_all(double tau_ns, double period_ns, double t1_ns) {
    double m = tau_ns - period_ns * std::floor(tau_ns / period_ns);  // [0, T)
    double r = std::exp(-period_ns / t1_ns);
    double em = std::exp(-m / t1_ns);
    double ep = std::exp(-(period_ns - m) / t1_ns);
    double inv = 1.0 / (1.0 - r);
    double t1sq = t1_ns * t1_ns;
    CombEval out;
    out.value = (em + ep) * inv;
    out.d_t1 = (em * m + ep * (period_ns - m)) / t1sq * inv +
               (em + ep) * inv * inv * r * period_ns / t1sq;
    return out;
}

// ---- interference model core ------------------------------------------------

// p = [detuning_mhz, v, t1_1, t1_2, rc2, sigma_joint, scale]
constexpr int kDnu = 0, kV = 1, kT1a = 2, kT1b = 3, kRc2 = 4, kSj = 5, kScale = 6;

double hom_core(double tau_ns, const std::array<double, 7>& p, double period_ns,
                std::array<double, 7>* grad) {
    const double abs_tau = std::abs(tau_ns);
    const double t1a = p[kT1a], t1b = p[kT1b];
    const double t1bar = 0.5 * (t1a + t1b);

    CombEval c1 = comb_all(tau_ns, period_ns, t1a);
    CombEval c2 = comb_all(tau_ns, period_ns, t1b);
    CombEval cx = comb_all(tau_ns, period_ns, t1bar);
    double z1 = std::exp(-abs_tau / t1a);
    double z2 = std::exp(-abs_tau / t1b);
    double h1 = c1.value - z1;
    double h2 = c2.value - z2;
    double ebar = std::exp(-period_ns / t1bar);
    double fbar = 1.0 - ebar;

    const double sj = p[kSj];
    const double gc = 2.0 * pi * pi * 1e-6;  // MHz^2 * ns^2 -> exponent
    double env = std::exp(-abs_tau * p[kRc2]);
    double gauss = std::exp(-gc * sj * sj * tau_ns * tau_ns);
    double phi = rad_per_mhz_ns * p[kDnu] * tau_ns;
    double cphi = std::cos(phi);
    double beat = p[kV] * env * gauss * cphi;

    double f = 0.25 * (h1 + h2 + 2.0 * fbar * cx.value - 2.0 * beat);

    if (grad) {
        (*grad)[kDnu] =
            0.5 * p[kV] * env * gauss * std::sin(phi) * rad_per_mhz_ns * tau_ns;
        (*grad)[kV] = -0.5 * env * gauss * cphi;
        (*grad)[kRc2] = 0.5 * p[kV] * abs_tau * env * gauss * cphi;
        (*grad)[kSj] = p[kV] * env * cphi * gc * sj * tau_ns * tau_ns * gauss;
        double dfbar = -ebar * period_ns / (t1bar * t1bar);
        // d/dt1a of 0.5*fbar*cx, with dt1bar/dt1a = 1/2 (same for t1b).
        double cross_term = 0.25 * (dfbar * cx.value + fbar * cx.d_t1);
        (*grad)[kT1a] =
            0.25 * (c1.d_t1 - z1 * abs_tau / (t1a * t1a)) + cross_term;
        (*grad)[kT1b] =
            0.25 * (c2.d_t1 - z2 * abs_tau / (t1b * t1b)) + cross_term;
        (*grad)[kScale] = 0.0;  // filled by the caller
    }
    return f;
}

// 21-point Gauss-Hermite rule from the Jacobi-matrix eigendecomposition.
struct GaussHermite {
    std::array<double, 21> x{}, w{};
};

const GaussHermite& gh21() {
    static const GaussHermite rule = [] {
        constexpr int n = 21;
        Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i) {
            jm(i, i - 1) = jm(i - 1, i) = std::sqrt(i / 2.0);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jm);
        GaussHermite out;
        for (int i = 0; i < n; ++i) {
            out.x[i] = es.eigenvalues()[i];
            double v0 = es.eigenvectors()(0, i);
            out.w[i] = std::sqrt(pi) * v0 * v0;
        }
        return out;
    }();
    return rule;
}

}  // namespace

double hom_fit_model(double tau_ns, const std::array<double, 7>& p,
                     double period_ns, double conv_sigma_ps,
                     std::array<double, 7>* grad) {
    double f;
    if (conv_sigma_ps > 0.0) {
        // Gaussian detector-response convolution via Gauss-Hermite nodes.
        const GaussHermite& gh = gh21();
        double sigma_ns = conv_sigma_ps * ns_per_ps;
        f = 0.0;
        std::array<double, 7> gsum{}, gi{};
        for (int i = 0; i < 21; ++i) {
            double wi = gh.w[i] / std::sqrt(pi);
            double ti = tau_ns - std::sqrt(2.0) * sigma_ns * gh.x[i];
            f += wi * hom_core(ti, p, period_ns, grad ? &gi : nullptr);
            if (grad) {
                for (int k = 0; k < 7; ++k) gsum[k] += wi * gi[k];
            }
        }
        if (grad) *grad = gsum;
    } else {
        f = hom_core(tau_ns, p, period_ns, grad);
    }
    if (grad) {
        for (int k = 0; k < 6; ++k) (*grad)[k] *= p[kScale];
        (*grad)[kScale] = f;
    }
    return f * p[kScale];
}

namespace {

bool hom_params_valid(const std::array<double, 7>& q) {
    return q[kT1a] > 1e-2 && q[kT1a] < 1e5 && q[kT1b] > 1e-2 && q[kT1b] < 1e5 &&
           q[kRc2] >= 0.0 && q[kRc2] < 1e3 && std::abs(q[kV]) < 10.0 &&
           std::abs(q[kSj]) < 1e5;
}

struct HistData {
    std::vector<double> tau_ns;
    std::vector<double> counts;
    std::vector<double> sigma;
    double span_ns = 0.0;
};

HistData extract(const CorrelationHistogram& hist) {
    if (hist.n_bins() == 0 || hist.bin_width_ps <= 0) {
        throw config_error("histogram is empty");
    }
    HistData d;
    d.tau_ns.resize(hist.n_bins());
    d.counts.resize(hist.n_bins());
    d.sigma.resize(hist.n_bins());
    for (std::size_t j = 0; j < hist.n_bins(); ++j) {
        d.tau_ns[j] = hist.bin_center_ps(j) * ns_per_ps;
        d.counts[j] = static_cast<double>(hist.counts[j]);
        d.sigma[j] = poisson_sigma(d.counts[j]);
    }
    d.span_ns = static_cast<double>(-hist.first_bin) *
                static_cast<double>(hist.bin_width_ps) * ns_per_ps;
    return d;
}

double percentile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    double idx = q * (static_cast<double>(values.size()) - 1.0);
    std::size_t lo = static_cast<std::size_t>(idx);
    std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (values[hi] - values[lo]) * (idx - lo);
}

}  // namespace

HomFitResult fit_hom(const CorrelationHistogram& hist, const HomFitOptions& opt) {
    if (!(opt.period_ns > 0.0)) throw config_error("period_ns must be > 0");
    HistData d = extract(hist);
    if (d.span_ns < 4.5 * opt.period_ns) {
        throw config_error(
            "histogram span covers fewer than 4 side peaks; extend max_lag");
    }
    const std::size_t nb = d.tau_ns.size();
    const double nyquist_mhz =
        ps_per_s / (2.0 * static_cast<double>(hist.bin_width_ps)) * 1e-6;

    // Full parameter vector with fixed-value overrides.
    std::array<std::optional<double>, 7> fixed = {
        opt.detuning_mhz, opt.v_factor, opt.t1_1_ns, opt.t1_2_ns,
        std::nullopt,     opt.sigma_joint_mhz,       std::nullopt};
    if (opt.t2_1_ns && opt.t2_2_ns) {
        if (*opt.t2_1_ns <= 0.0 || *opt.t2_2_ns <= 0.0) {
            throw config_error("fixed t2 values must be > 0");
        }
        fixed[kRc2] = 1.0 / *opt.t2_1_ns + 1.0 / *opt.t2_2_ns;
    }

    std::array<double, 7> q0{};
    q0[kDnu] = opt.detuning_mhz.value_or(0.0);
    q0[kV] = opt.v_factor.value_or(0.5);
    // Unequal lifetime starts: the model is symmetric under emitter exchange,
    // so equal starts would make the two lifetime gradients identical and the
    // parameters could never separate.
    q0[kT1a] = opt.t1_1_ns.value_or(opt.period_ns / 8.0 * 1.25);
    q0[kT1b] = opt.t1_2_ns.value_or(opt.period_ns / 8.0 * 0.75);
    q0[kRc2] = fixed[kRc2].value_or(1.25 / (0.5 * (q0[kT1a] + q0[kT1b])));
    q0[kSj] = opt.sigma_joint_mhz.value_or(20.0);
    double scale0 = percentile(d.counts, 0.95);
    if (scale0 <= 0.0) throw numerical_error("histogram has no counts to fit");
    q0[kScale] = scale0;

    std::vector<int> free_idx;
    for (int k = 0; k < 7; ++k) {
        if (!fixed[k]) free_idx.push_back(k);
    }
    const int nf = static_cast<int>(free_idx.size());
    if (nb <= static_cast<std::size_t>(nf) + 1) {
        throw config_error("not enough histogram bins for the free parameters");
    }

    auto assemble_with = [](const std::array<std::optional<double>, 7>& fx,
                            const std::vector<int>& fidx,
                            const Eigen::VectorXd& pf) {
        std::array<double, 7> q{};
        for (int k = 0; k < 7; ++k) {
            if (fx[k]) q[k] = *fx[k];
        }
        for (std::size_t i = 0; i < fidx.size(); ++i) {
            q[fidx[i]] = pf[static_cast<Eigen::Index>(i)];
        }
        return q;
    };

    // Run one damped least-squares pass with an arbitrary subset of the seven
    // parameters held fixed.
    auto run_lm = [&](const std::array<std::optional<double>, 7>& fx,
                      const std::array<double, 7>& qinit) {
        std::vector<int> fidx;
        for (int k = 0; k < 7; ++k) {
            if (!fx[k]) fidx.push_back(k);
        }
        LmResidualFn fn = [&, fx, fidx](const Eigen::VectorXd& pf,
                                        Eigen::VectorXd& r, Eigen::MatrixXd* J) {
            std::array<double, 7> q = assemble_with(fx, fidx, pf);
            if (!hom_params_valid(q)) {
                r.setConstant(kBadCost);
                if (J) J->setZero();
                return;
            }
            std::array<double, 7> g{};
            for (std::size_t j = 0; j < nb; ++j) {
                double m = hom_fit_model(d.tau_ns[j], q, opt.period_ns,
                                         opt.conv_sigma_ps, J ? &g : nullptr);
                r[static_cast<Eigen::Index>(j)] = (m - d.counts[j]) / d.sigma[j];
                if (J) {
                    for (std::size_t i = 0; i < fidx.size(); ++i) {
                        (*J)(static_cast<Eigen::Index>(j),
                             static_cast<Eigen::Index>(i)) =
                            g[fidx[i]] / d.sigma[j];
                    }
                }
            }
        };
        Eigen::VectorXd p0(static_cast<Eigen::Index>(fidx.size()));
        for (std::size_t i = 0; i < fidx.size(); ++i) {
            p0[static_cast<Eigen::Index>(i)] = qinit[fidx[i]];
        }
        LmOptions lm_opts;
        lm_opts.max_iterations = opt.max_iterations;
        LmFit fit = levmar(fn, p0, static_cast<int>(nb), lm_opts);
        return std::pair<LmFit, std::vector<int>>(std::move(fit),
                                                  std::move(fidx));
    };

    // Stage zero: settle the side-peak comb (lifetimes and scale) with the
    // beat switched off.  The teeth dominate the residual everywhere except
    // the central dip, and starting every detuning candidate from realistic
    // teeth keeps the later stages from trading tooth mismatch against a
    // runaway beat term that only reshapes the innermost bins.
    {
        auto fx0 = fixed;
        fx0[kDnu] = q0[kDnu];
        fx0[kV] = 0.0;
        fx0[kRc2] = q0[kRc2];
        fx0[kSj] = q0[kSj];
        auto [st0, fidx0] = run_lm(fx0, q0);
        if (std::isfinite(st0.chi2)) {
            std::array<double, 7> qt = assemble_with(fx0, fidx0, st0.params);
            q0[kT1a] = qt[kT1a];
            q0[kT1b] = qt[kT1b];
            q0[kScale] = qt[kScale];
        }
    }

    // Detuning multi-start: profile chi2 on a grid up to the Nyquist limit of
    // the bin width.  For fixed shape parameters the model is linear in
    // (scale, scale*v), so each grid point is an exact 2x2 weighted solve.
    std::vector<std::array<double, 3>> starts;  // (dnu, v, scale)
    if (!fixed[kDnu]) {
        std::vector<double> base(nb), env(nb);
        {
            std::array<double, 7> qb = q0;
            for (int k = 0; k < 7; ++k) {
                if (fixed[k]) qb[k] = *fixed[k];
            }
            qb[kV] = 0.0;
            qb[kScale] = 1.0;
            for (std::size_t j = 0; j < nb; ++j) {
                base[j] = hom_fit_model(d.tau_ns[j], qb, opt.period_ns,
                                        opt.conv_sigma_ps);
                env[j] = 0.5 *
                         std::exp(-std::abs(d.tau_ns[j]) * qb[kRc2]) *
                         std::exp(-2.0 * pi * pi * 1e-6 * qb[kSj] * qb[kSj] *
                                  d.tau_ns[j] * d.tau_ns[j]);
            }
        }
        std::vector<double> grid, cost, va, vs;
        for (double dnu = 0.0; dnu <= nyquist_mhz + 1e-9; dnu += opt.grid_step_mhz) {
            double saa = 0, sab = 0, sbb = 0, say = 0, sby = 0, syy = 0;
            for (std::size_t j = 0; j < nb; ++j) {
                double w = 1.0 / (d.sigma[j] * d.sigma[j]);
                double ec = env[j] * std::cos(rad_per_mhz_ns * dnu * d.tau_ns[j]);
                saa += w * base[j] * base[j];
                sab += w * base[j] * ec;
                sbb += w * ec * ec;
                say += w * base[j] * d.counts[j];
                sby += w * ec * d.counts[j];
                syy += w * d.counts[j] * d.counts[j];
            }
            // model = a*base - b*ec with a = scale, b = scale*v
            double det = saa * sbb - sab * sab;
            double a, b;
            if (std::abs(det) < 1e-30) {
                a = say / std::max(saa, 1e-30);
                b = 0.0;
            } else {
                a = (sbb * say - sab * sby) / det;
                b = (sab * say - saa * sby) / det;
            }
            grid.push_back(dnu);
            cost.push_back(syy - 2.0 * (a * say - b * sby) +
                           (a * a * saa - 2.0 * a * b * sab + b * b * sbb));
            va.push_back(a > 0.0 ? std::clamp(b / a, -1.5, 1.5) : 0.5);
            vs.push_back(a > 0.0 ? a : scale0);
        }
        // Keep the local minima of the profile, best three by cost.
        std::vector<std::size_t> cand;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            bool left = (i == 0) || cost[i] <= cost[i - 1];
            bool right = (i + 1 == grid.size()) || cost[i] <= cost[i + 1];
            if (left && right) cand.push_back(i);
        }
        std::sort(cand.begin(), cand.end(),
                  [&](std::size_t x, std::size_t y) { return cost[x] < cost[y]; });
        if (cand.size() > 3) cand.resize(3);
        for (std::size_t i : cand) {
            starts.push_back({grid[i], fixed[kV] ? *fixed[kV] : va[i], vs[i]});
        }
    } else {
        starts.push_back({*fixed[kDnu], q0[kV], q0[kScale]});
    }

    LmFit best;
    best.chi2 = std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
        std::array<double, 7> qs = q0;
        qs[kDnu] = s[0];
        qs[kV] = s[1];
        qs[kScale] = s[2];
        if (!fixed[kDnu]) {
            // Stage one: settle the shape parameters with the detuning pinned
            // at the grid candidate.  Releasing all parameters at once lets an
            // early step trade a large lifetime improvement against throwing
            // the detuning far off-grid, from where the beat term has no
            // gradient left to recover with.
            auto fx1 = fixed;
            fx1[kDnu] = s[0];
            auto [st1, fidx1] = run_lm(fx1, qs);
            if (std::isfinite(st1.chi2)) {
                qs = assemble_with(fx1, fidx1, st1.params);
            }
        }
        LmFit fit = run_lm(fixed, qs).first;
        if (std::isfinite(fit.chi2) && fit.chi2 < best.chi2) best = fit;
    }
    if (!std::isfinite(best.chi2)) {
        throw numerical_error("interference fit did not converge");
    }

    Eigen::VectorXd best_pf = best.params;
    std::array<double, 7> q;
    {
        std::vector<int> fidx(free_idx.begin(), free_idx.end());
        q = assemble_with(fixed, fidx, best_pf);
    }
    std::array<double, 7> err{};
    for (int i = 0; i < nf; ++i) {
        err[free_idx[i]] = std::sqrt(std::max(best.covariance(i, i), 0.0));
    }

    HomFitResult r;
    // The beat enters through cos(w*tau) only, so the sign of the detuning is
    // not observable; report its magnitude.
    r.detuning_mhz = fixed[kDnu] ? q[kDnu] : std::abs(q[kDnu]);
    r.detuning_err_mhz = err[kDnu];
    r.v_factor = q[kV];
    r.v_factor_err = err[kV];
    r.t1_1_ns = q[kT1a];
    r.t1_1_err_ns = err[kT1a];
    r.t1_2_ns = q[kT1b];
    r.t1_2_err_ns = err[kT1b];
    r.sigma_joint_mhz = std::abs(q[kSj]);
    r.sigma_joint_err_mhz = err[kSj];
    r.scale = q[kScale];
    r.scale_err = err[kScale];

    // Decompose the fitted coherence rate rc2 = 1/t2_1 + 1/t2_2.
    double rc2 = q[kRc2], rc2_err = err[kRc2];
    if (opt.t2_1_ns && opt.t2_2_ns) {
        r.t2_1_ns = *opt.t2_1_ns;
        r.t2_2_ns = *opt.t2_2_ns;
    } else if (opt.t2_1_ns || opt.t2_2_ns) {
        double known = opt.t2_1_ns ? *opt.t2_1_ns : *opt.t2_2_ns;
        double rest = rc2 - 1.0 / known;
        double other = rest > 1e-12 ? 1.0 / rest
                                    : std::numeric_limits<double>::infinity();
        double other_err = std::isfinite(other) ? other * other * rc2_err : 0.0;
        if (opt.t2_1_ns) {
            r.t2_1_ns = known;
            r.t2_2_ns = other;
            r.t2_2_err_ns = other_err;
        } else {
            r.t2_2_ns = known;
            r.t2_1_ns = other;
            r.t2_1_err_ns = other_err;
        }
    } else {
        // Only the sum of the coherence rates is identifiable; report the
        // symmetric decomposition.
        double t2 = rc2 > 1e-12 ? 2.0 / rc2 : std::numeric_limits<double>::infinity();
        double t2_err = std::isfinite(t2) ? 2.0 / (rc2 * rc2) * rc2_err : 0.0;
        r.t2_1_ns = r.t2_2_ns = t2;
        r.t2_1_err_ns = r.t2_2_err_ns = t2_err;
    }

    r.chi2_per_dof = best.chi2 / (static_cast<double>(nb) - nf);
    r.n_iterations = best.n_iterations;
    r.converged = best.converged;
    r.nyquist_mhz = nyquist_mhz;
    r.resolution_limited =
        (!fixed[kDnu] &&
         std::abs(r.detuning_mhz) > nyquist_mhz - opt.grid_step_mhz) ||
        (!fixed[kV] && r.v_factor + 3.0 * r.v_factor_err < 0.0);
    r.detuning_unidentifiable =
        !fixed[kDnu] && std::abs(r.detuning_mhz) < 100.0;

    static const char* kNames[7] = {"detuning_mhz", "v_factor",  "t1_1_ns",
                                    "t1_2_ns",      "rc2_per_ns", "sigma_joint_mhz",
                                    "scale"};
    for (int i = 0; i < nf; ++i) r.free_names.push_back(kNames[free_idx[i]]);
    r.covariance.resize(static_cast<std::size_t>(nf) * nf);
    for (int i = 0; i < nf; ++i) {
        for (int j = 0; j < nf; ++j) {
            r.covariance[static_cast<std::size_t>(i) * nf + j] =
                best.covariance(i, j);
        }
    }
    return r;
}

HbtFitResult fit_hbt(const CorrelationHistogram& hist, double period_ns) {
    if (!(period_ns > 0.0)) throw config_error("period_ns must be > 0");
    HistData d = extract(hist);
    if (d.span_ns < 5.5 * period_ns) {
        throw config_error(
            "histogram span covers fewer than 5 side peaks; extend max_lag");
    }

    // Fit only the side region; the central window is left out so the
    // zero-delay area is measured, not imposed.
    std::vector<std::size_t> side;
    for (std::size_t j = 0; j < d.tau_ns.size(); ++j) {
        if (std::abs(d.tau_ns[j]) > 0.5 * period_ns) side.push_back(j);
    }
    const int ns = static_cast<int>(side.size());

    double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
    for (std::size_t j : side) {
        cmin = std::min(cmin, d.counts[j]);
        cmax = std::max(cmax, d.counts[j]);
    }
    if (cmax <= 0.0) throw numerical_error("histogram has no counts to fit");

    // p = [t1, scale, background]
    LmResidualFn residual_fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r,
                                   Eigen::MatrixXd* J) {
        double t1 = p[0], scale = p[1], b = p[2];
        if (!(t1 > 1e-2 && t1 < 1e5)) {
            r.setConstant(kBadCost);
            if (J) J->setZero();
            return;
        }
        for (int i = 0; i < ns; ++i) {
            double tau = d.tau_ns[side[i]];
            CombEval c = comb_all(tau, period_ns, t1);
            double z = std::exp(-std::abs(tau) / t1);
            double comb = c.value - z;
            double m = scale * comb + b;
            double sg = d.sigma[side[i]];
            r[i] = (m - d.counts[side[i]]) / sg;
            if (J) {
                (*J)(i, 0) =
                    scale * (c.d_t1 - z * std::abs(tau) / (t1 * t1)) / sg;
                (*J)(i, 1) = comb / sg;
                (*J)(i, 2) = 1.0 / sg;
            }
        }
    };

    Eigen::VectorXd p0(3);
    p0 << period_ns / 8.0, cmax - cmin, cmin;
    LmFit fit = levmar(residual_fn, p0, ns);
    if (!fit.converged) {
        throw numerical_error("autocorrelation fit did not converge");
    }

    HbtFitResult r;
    r.t1_ns = std::abs(fit.params[0]);
    r.t1_err_ns = std::sqrt(std::max(fit.covariance(0, 0), 0.0));
    r.scale = fit.params[1];
    r.background = fit.params[2];
    r.chi2_per_dof = fit.chi2 / (ns - 3.0);
    r.n_iterations = fit.n_iterations;
    r.converged = true;

    // Zero-delay area normalized to the mean side-peak area (|n| >= 2).
    int n_max = static_cast<int>(
        std::floor(d.span_ns / period_ns - 0.5 + 1e-9));
    PeakAreas areas = peak_areas(hist, period_ns, n_max);
    double a0 = areas.areas.at(0).first;
    double sum = 0.0;
    int m = 0;
    for (const auto& [n, av] : areas.areas) {
        if (std::abs(n) >= 2) {
            sum += av.first;
            ++m;
        }
    }
    if (m == 0 || sum <= 0.0) {
        throw numerical_error("no side-peak counts for normalization");
    }
    double mean = sum / m;
    r.g2_zero_area = a0 / mean;
    double var = std::max(a0, 1.0) / (mean * mean) +
                 (a0 / (mean * mean)) * (a0 / (mean * mean)) * sum / (m * m);
    r.g2_zero_err = std::sqrt(var);
    return r;
}

LorentzianFit fit_lorentzian(const std::vector<double>& freq_mhz,
                             const std::vector<double>& counts) {
    if (freq_mhz.size() != counts.size()) {
        throw config_error("frequency and count arrays differ in length");
    }
    const int n = static_cast<int>(freq_mhz.size());
    if (n < 8) throw config_error("line fit needs at least 8 points");
    double ymin = counts[0], ymax = counts[0];
    std::size_t jmax = 0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        ymin = std::min(ymin, counts[j]);
        if (counts[j] > ymax) {
            ymax = counts[j];
            jmax = j;
        }
    }
    if (!(ymax > ymin)) throw numerical_error("degenerate scan: flat counts");

    // Initial width from the half-maximum crossing extent.
    double half = ymin + 0.5 * (ymax - ymin);
    double flo = freq_mhz[jmax], fhi = freq_mhz[jmax];
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] >= half) {
            flo = std::min(flo, freq_mhz[j]);
            fhi = std::max(fhi, freq_mhz[j]);
        }
    }
    double span = std::abs(freq_mhz.back() - freq_mhz.front());
    double fwhm0 = std::max(fhi - flo, span / 50.0);

    // p = [center, fwhm, amplitude, offset]
    LmResidualFn residual_fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r,
                                   Eigen::MatrixXd* J) {
        double c = p[0], hw = 0.5 * p[1], a = p[2], off = p[3];
        if (!(std::abs(hw) > 1e-9)) {
            r.setConstant(kBadCost);
            if (J) J->setZero();
            return;
        }
        for (int j = 0; j < n; ++j) {
            double df = freq_mhz[j] - c;
            double den = df * df + hw * hw;
            double l = hw * hw / den;
            double sg = poisson_sigma(counts[j]);
            r[j] = (off + a * l - counts[j]) / sg;
            if (J) {
                (*J)(j, 0) = a * hw * hw * 2.0 * df / (den * den) / sg;
                (*J)(j, 1) = 0.5 * a * 2.0 * hw * df * df / (den * den) / sg;
                (*J)(j, 2) = l / sg;
                (*J)(j, 3) = 1.0 / sg;
            }
        }
    };

    Eigen::VectorXd p0(4);
    p0 << freq_mhz[jmax], fwhm0, ymax - ymin, ymin;
    LmFit fit = levmar(residual_fn, p0, n);
    if (!fit.converged) throw numerical_error("line fit did not converge");

    LorentzianFit r;
    r.center_mhz = fit.params[0];
    r.fwhm_mhz = std::abs(fit.params[1]);
    r.amplitude = fit.params[2];
    r.offset = fit.params[3];
    r.center_err_mhz = std::sqrt(std::max(fit.covariance(0, 0), 0.0));
    r.fwhm_err_mhz = std::sqrt(std::max(fit.covariance(1, 1), 0.0));
    r.amplitude_err = std::sqrt(std::max(fit.covariance(2, 2), 0.0));
    r.offset_err = std::sqrt(std::max(fit.covariance(3, 3), 0.0));
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) r.covariance[i][j] = fit.covariance(i, j);
    }
    r.chi2_per_dof = fit.chi2 / (n - 4.0);
    r.n_iterations = fit.n_iterations;
    r.converged = true;
    return r;
}

WanderingStats wandering_stats(const std::vector<LorentzianFit>& fits) {
    const std::size_t n = fits.size();
    if (n < 10) throw config_error("wandering statistics need at least 10 fits");

    WanderingStats s;
    s.centers_mhz.reserve(n);
    for (const auto& f : fits) s.centers_mhz.push_back(f.center_mhz);

    double s1 = std::accumulate(s.centers_mhz.begin(), s.centers_mhz.end(), 0.0);
    double s2 = 0.0;
    for (double c : s.centers_mhz) s2 += c * c;
    double mean = s1 / n;
    double var = (s2 - n * mean * mean) / (n - 1.0);
    s.sigma_mhz = std::sqrt(std::max(var, 0.0));

    // Jackknife over leave-one-out standard deviations.
    std::vector<double> loo(n);
    for (std::size_t i = 0; i < n; ++i) {
        double m1 = (s1 - s.centers_mhz[i]) / (n - 1.0);
        double v =
            (s2 - s.centers_mhz[i] * s.centers_mhz[i] - (n - 1.0) * m1 * m1) /
            (n - 2.0);
        loo[i] = std::sqrt(std::max(v, 0.0));
    }
    double lmean = std::accumulate(loo.begin(), loo.end(), 0.0) / n;
    double jsum = 0.0;
    for (double l : loo) jsum += (l - lmean) * (l - lmean);
    s.sigma_err_mhz = std::sqrt((n - 1.0) / n * jsum);

    // Sturges histogram of the centers.
    int nbins = 1 + static_cast<int>(std::ceil(std::log2(static_cast<double>(n))));
    double lo = *std::min_element(s.centers_mhz.begin(), s.centers_mhz.end());
    double hi = *std::max_element(s.centers_mhz.begin(), s.centers_mhz.end());
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    double w = (hi - lo) / nbins;
    s.hist_edges_mhz.resize(nbins + 1);
    for (int b = 0; b <= nbins; ++b) s.hist_edges_mhz[b] = lo + b * w;
    s.hist_counts.assign(nbins, 0);
    for (double c : s.centers_mhz) {
        int b = std::min(nbins - 1,
                         std::max(0, static_cast<int>((c - lo) / w)));
        ++s.hist_counts[b];
    }
    return s;
}

// ---- serialization ----------------------------------------------------------

namespace {

nlohmann::json param_json(double value, double error) {
    return nlohmann::json{{"value", value}, {"error", error}};
}

}  // namespace

std::string to_json(const HomFitResult& r) {
    nlohmann::json j;
    j["model"] = "two_emitter_interference";
    j["parameters"] = {
        {"detuning_mhz", param_json(r.detuning_mhz, r.detuning_err_mhz)},
        {"v_factor", param_json(r.v_factor, r.v_factor_err)},
        {"t1_1_ns", param_json(r.t1_1_ns, r.t1_1_err_ns)},
        {"t1_2_ns", param_json(r.t1_2_ns, r.t1_2_err_ns)},
        {"t2_1_ns", param_json(r.t2_1_ns, r.t2_1_err_ns)},
        {"t2_2_ns", param_json(r.t2_2_ns, r.t2_2_err_ns)},
        {"sigma_joint_mhz", param_json(r.sigma_joint_mhz, r.sigma_joint_err_mhz)},
        {"scale", param_json(r.scale, r.scale_err)},
    };
    j["chi2_per_dof"] = r.chi2_per_dof;
    j["n_iterations"] = r.n_iterations;
    j["converged"] = r.converged;
    j["resolution_limited"] = r.resolution_limited;
    j["detuning_unidentifiable"] = r.detuning_unidentifiable;
    j["nyquist_mhz"] = r.nyquist_mhz;
    j["free_parameters"] = r.free_names;
    const std::size_t nf = r.free_names.size();
    nlohmann::json cov = nlohmann::json::array();
    for (std::size_t i = 0; i < nf; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t k = 0; k < nf; ++k) row.push_back(r.covariance[i * nf + k]);
        cov.push_back(row);
    }
    j["covariance"] = cov;
    return j.dump(2);
}

std::string to_json(const HbtFitResult& r) {
    nlohmann::json j;
    j["model"] = "pulsed_autocorrelation";
    j["parameters"] = {
        {"t1_ns", param_json(r.t1_ns, r.t1_err_ns)},
        {"scale", param_json(r.scale, 0.0)},
        {"background", param_json(r.background, 0.0)},
        {"g2_zero_area", param_json(r.g2_zero_area, r.g2_zero_err)},
    };
    j["chi2_per_dof"] = r.chi2_per_dof;
    j["n_iterations"] = r.n_iterations;
    j["converged"] = r.converged;
    return j.dump(2);
}

std::string to_json(const LorentzianFit& r) {
    nlohmann::json j;
    j["model"] = "lorentzian_line";
    j["parameters"] = {
        {"center_mhz", param_json(r.center_mhz, r.center_err_mhz)},
        {"fwhm_mhz", param_json(r.fwhm_mhz, r.fwhm_err_mhz)},
        {"amplitude", param_json(r.amplitude, r.amplitude_err)},
        {"offset", param_json(r.offset, r.offset_err)},
    };
    nlohmann::json cov = nlohmann::json::array();
    for (int i = 0; i < 4; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < 4; ++k) row.push_back(r.covariance[i][k]);
        cov.push_back(row);
    }
    j["covariance"] = cov;
    j["chi2_per_dof"] = r.chi2_per_dof;
    j["converged"] = r.converged;
    return j.dump(2);
}

namespace {

std::string csv_row(const char* name, double value, double error) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", name, value, error);
    return buf;
}

}  // namespace

std::string to_csv(const HomFitResult& r) {
    std::string out = "parameter,value,error\n";
    out += csv_row("detuning_mhz", r.detuning_mhz, r.detuning_err_mhz);
    out += csv_row("v_factor", r.v_factor, r.v_factor_err);
    out += csv_row("t1_1_ns", r.t1_1_ns, r.t1_1_err_ns);
    out += csv_row("t1_2_ns", r.t1_2_ns, r.t1_2_err_ns);
    out += csv_row("t2_1_ns", r.t2_1_ns, r.t2_1_err_ns);
    out += csv_row("t2_2_ns", r.t2_2_ns, r.t2_2_err_ns);
    out += csv_row("sigma_joint_mhz", r.sigma_joint_mhz, r.sigma_joint_err_mhz);
    out += csv_row("scale", r.scale, r.scale_err);
    out += csv_row("chi2_per_dof", r.chi2_per_dof, 0.0);
    out += csv_row("resolution_limited", r.resolution_limited ? 1.0 : 0.0, 0.0);
    out += csv_row("detuning_unidentifiable",
                   r.detuning_unidentifiable ? 1.0 : 0.0, 0.0);
    return out;
}

std::string to_csv(const HbtFitResult& r) {
    std::string out = "parameter,value,error\n";
    out += csv_row("t1_ns", r.t1_ns, r.t1_err_ns);
    out += csv_row("scale", r.scale, 0.0);
    out += csv_row("background", r.background, 0.0);
    out += csv_row("g2_zero_area", r.g2_zero_area, r.g2_zero_err);
    out += csv_row("chi2_per_dof", r.chi2_per_dof, 0.0);
    return out;
}

}  // namespace homsim
