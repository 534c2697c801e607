#include "potgam/inference.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace potgam::inference {

namespace {

Eigen::MatrixXd inverted_information(const Eigen::MatrixXd& sigma_hat) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_hat);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_hat);
        throw std::runtime_error(
            "inference unavailable: penalized Hessian is not positive definite "
            "(smallest eigenvalue " +
            std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
    return llt.solve(Eigen::MatrixXd::Identity(sigma_hat.rows(), sigma_hat.cols()));
}

}  // namespace

Eigen::Matrix2d asymptotic_covariance(const fitter::FitResult& fit,
                                      const design::ModelSpec& spec,
                                      const std::vector<splines::NormalizedBasis>& bases,
                                      const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    if (!fit.converged)
        throw std::invalid_argument("asymptotic_covariance: fit did not converge");
    const Eigen::MatrixXd inv = inverted_information(fit.penalized_hessian);
    const Eigen::VectorXd a = design::build_design_row(spec, bases, x, z);
    const int half = spec.half_dim();
    Eigen::Matrix2d out;
    out(0, 0) = a.dot(inv.topLeftCorner(half, half) * a);
    out(0, 1) = a.dot(inv.topRightCorner(half, half) * a);
    out(1, 0) = out(0, 1);
    out(1, 1) = a.dot(inv.bottomRightCorner(half, half) * a);
    return out;
}

Eigen::MatrixXd parametric_covariance(const fitter::FitResult& fit,
                                      const design::ModelSpec& spec,
                                      const std::vector<splines::NormalizedBasis>& bases,
                                      const pot::ExceedanceSample& data) {
    if (!fit.converged)
        throw std::invalid_argument("parametric_covariance: fit did not converge");
    const int p = spec.p;
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(2 * p, 2 * p);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const design::ModelValue v =
            design::eval_model(spec, bases, fit.theta, data.x.row(i), data.z.row(i));
        const double g = v.gamma;
        if (!(g > -0.5))
            throw std::runtime_error(
                "parametric_covariance: fitted shape " + std::to_string(g) +
                " <= -1/2 at a training point; the information does not exist");
        const Eigen::MatrixXd xxt = data.x.row(i).transpose() * data.x.row(i);
        if (spec.reparam) {
            info.topLeftCorner(p, p) += xxt / ((g + 1.0) * (g + 1.0));
            info.bottomRightCorner(p, p) += xxt / (2.0 * g + 1.0);
        } else {
            const double denom = (2.0 * g + 1.0) * (g + 1.0);
            info.topLeftCorner(p, p) += 2.0 / denom * xxt;
            info.topRightCorner(p, p) += 1.0 / denom * xxt;
            info.bottomLeftCorner(p, p) += 1.0 / denom * xxt;
            info.bottomRightCorner(p, p) += xxt / (2.0 * g + 1.0);
        }
    }
    info /= static_cast<double>(data.n());
    return inverted_information(info);
}

PointwiseCI pointwise_ci(const fitter::FitResult& fit, const design::ModelSpec& spec,
                         const std::vector<splines::NormalizedBasis>& bases,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& z, double level) {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("pointwise_ci: level must lie in (0,1)");
    const design::ModelValue v = design::eval_model(spec, bases, fit.theta, x, z);
    const Eigen::Matrix2d cov = asymptotic_covariance(fit, spec, bases, x, z);
    const auto n = static_cast<double>(fit.n_obs);

    PointwiseCI ci;
    ci.gamma_hat = v.gamma;
    ci.scale_hat = v.scale;
    ci.level = level;
    ci.se_gamma = std::sqrt(std::max(cov(0, 0), 0.0) / n);
    ci.se_scale_rel = std::sqrt(std::max(cov(1, 1), 0.0) / n);
    const double q = normal_quantile(0.5 * (1.0 + level));
    ci.gamma_lo = ci.gamma_hat - q * ci.se_gamma;
    ci.gamma_hi = ci.gamma_hat + q * ci.se_gamma;
    // delta method on the log scale
    ci.scale_lo = ci.scale_hat * std::exp(-q * ci.se_scale_rel);
    ci.scale_hi = ci.scale_hat * std::exp(q * ci.se_scale_rel);
    return ci;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("normal_quantile: p must lie in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    } else if (p <= phigh) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    }
    // one Halley refinement step
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

}  // namespace potgam::inference
