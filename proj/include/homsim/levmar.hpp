#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

namespace homsim {

// Damped least-squares (Levenberg-Marquardt) minimizer of |r(p)|^2 with
// multiplicative damping on the normal-equation diagonal.  Residuals are
// expected pre-weighted (r_i = (data_i - model_i)/sigma_i), so the parameter
// covariance at the optimum is pinv(J^T J).

struct LmOptions {
    int max_iterations = 200;
    double lambda_init = 1e-3;
    double lambda_up = 4.0;
    double lambda_down = 3.0;
    double grad_tol = 1e-10;
    double step_tol = 1e-10;
    double cost_tol = 1e-8;
};

struct LmFit {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;
    double chi2 = 0.0;
    int n_iterations = 0;
    bool converged = false;
};

// residual_fn(p, r, J): fills r (size fixed by the problem) and, when J is
// non-null, the Jacobian dr/dp.  A step is rejected by returning huge
// residuals for out-of-domain parameters.
using LmResidualFn =
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd*)>;

inline LmFit levmar(const LmResidualFn& residual_fn, const Eigen::VectorXd& p0,
                    int n_residuals, const LmOptions& opts = {}) {
    const int n_par = static_cast<int>(p0.size());
    LmFit out;
    out.params = p0;
    out.covariance = Eigen::MatrixXd::Zero(n_par, n_par);

    Eigen::VectorXd r(n_residuals), r_try(n_residuals);
    Eigen::MatrixXd J(n_residuals, n_par);

    residual_fn(out.params, r, &J);
    double cost = r.squaredNorm();
    double lambda = opts.lambda_init;

    for (; out.n_iterations < opts.max_iterations; ++out.n_iterations) {
        Eigen::MatrixXd A = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
            out.converged = true;
            break;
        }

        // Damping floor keeps the system solvable when a column of J is zero
        // (an insensitive parameter then simply does not move).
        Eigen::VectorXd diag = A.diagonal();
        double diag_floor = 1e-30 + 1e-12 * diag.maxCoeff();
        for (int i = 0; i < n_par; ++i) diag[i] = std::max(diag[i], diag_floor);

        Eigen::MatrixXd damped = A;
        damped.diagonal() += lambda * diag;
        Eigen::VectorXd step = damped.ldlt().solve(-g);
        if (!step.allFinite()) {
            lambda *= opts.lambda_up;
            if (lambda > 1e14) {
                // Trust region collapsed: no step can improve this point.
                out.converged = cost < 1e29;
                break;
            }
            continue;
        }

        Eigen::VectorXd p_try = out.params + step;
        residual_fn(p_try, r_try, nullptr);
        double cost_try = r_try.squaredNorm();

        if (std::isfinite(cost_try) && cost_try < cost) {
            double drop = cost - cost_try;
            out.params = p_try;
            residual_fn(out.params, r, &J);
            cost = r.squaredNorm();
            lambda = std::max(lambda / opts.lambda_down, 1e-14);
            if (drop < opts.cost_tol * (cost + opts.cost_tol) ||
                step.norm() < opts.step_tol * (out.params.norm() + opts.step_tol)) {
                out.converged = true;
                break;
            }
        } else {
            lambda *= opts.lambda_up;
            if (lambda > 1e14) {
                out.converged = cost < 1e29;
                break;
            }
        }
    }

    out.chi2 = cost;
    Eigen::MatrixXd A = J.transpose() * J;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    out.covariance = cod.pseudoInverse();
    return out;
}

}  // namespace homsim
