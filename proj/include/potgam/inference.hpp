#ifndef POTGAM_INFERENCE_HPP
#define POTGAM_INFERENCE_HPP

#include <Eigen/Core>

#include "potgam/fitter.hpp"

namespace potgam::inference {

/// Pointwise estimates with variance-only (no bias correction) normal
/// intervals. The scale standard error is relative: it applies to
/// scale_hat/scale - 1, so the interval is built on the log scale and
/// exponentiated.
struct PointwiseCI {
    double gamma_hat = 0.0;
    double scale_hat = 1.0;
    double se_gamma = 0.0;
    double se_scale_rel = 0.0;
    double level = 0.95;
    double gamma_lo = 0.0, gamma_hi = 0.0;
    double scale_lo = 0.0, scale_hi = 0.0;
};

/// Plug-in local covariance D(x,z)^T SigmaHat^{-1} D(x,z) with SigmaHat
/// the per-observation-scaled penalized Hessian from the fit. Divide by n
/// for the pointwise variance of (gamma_hat, log scale_hat).
Eigen::Matrix2d asymptotic_covariance(const fitter::FitResult& fit,
                                      const design::ModelSpec& spec,
                                      const std::vector<splines::NormalizedBasis>& bases,
                                      const Eigen::VectorXd& x, const Eigen::VectorXd& z);

/// Empirical information for the linear coefficients (beta, u): GPD Fisher
/// weights at the fitted shapes averaged over training-point X outer
/// products. The inverse estimates the covariance of
/// sqrt(n)(beta_hat - beta, u_hat - u). Block diagonal under reparam.
Eigen::MatrixXd parametric_covariance(const fitter::FitResult& fit,
                                      const design::ModelSpec& spec,
                                      const std::vector<splines::NormalizedBasis>& bases,
                                      const pot::ExceedanceSample& data);

PointwiseCI pointwise_ci(const fitter::FitResult& fit, const design::ModelSpec& spec,
                         const std::vector<splines::NormalizedBasis>& bases,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& z, double level);

/// Standard normal quantile (Acklam/Moro-style rational approximation,
/// |error| < 1e-9), used for interval construction.
double normal_quantile(double p);

}  // namespace potgam::inference

#endif
