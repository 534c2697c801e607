#ifndef POTGAM_DESIGN_HPP
#define POTGAM_DESIGN_HPP

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "potgam/splines.hpp"

namespace potgam::design {

/// Additive model description: gamma(x,z) = x^T beta + sum_j B_j(z_j)^T b_j
/// and log scale = x^T u + sum_j B_j(z_j)^T c_j, with a single smoothing
/// parameter per function (lambda for shape, nu for scale) shared across
/// covariates. `reparam` switches the scale interpretation from sigma to
/// varsigma = sigma*(gamma+1).
struct ModelSpec {
    int p = 1;  // linear covariates including the intercept
    int d = 1;  // smooth covariates
    splines::KnotGrid grid;
    int m = 2;           // penalty derivative order, 1 <= m < xi
    double lambda = 1.0;
    double nu = 1.0;
    bool reparam = false;
    bool center_x = true;  // center non-intercept x columns at training means
    bool rescale_z = false;  // min-max rescale out-of-range z instead of erroring

    void validate() const;
    int spline_block() const { return grid.K + grid.xi; }
    int half_dim() const { return p + d * spline_block(); }  // length of A(x,z)
    int dim() const { return 2 * half_dim(); }
};

/// Packed coefficient vector in the fixed layout (beta, b, u, c).
struct Theta {
    Eigen::VectorXd beta;  // p
    Eigen::VectorXd b;     // d*(K+xi)
    Eigen::VectorXd u;     // p
    Eigen::VectorXd c;     // d*(K+xi)

    static Theta zeros(const ModelSpec& spec);
    static Theta from_vector(const ModelSpec& spec, const Eigen::VectorXd& v);
    Eigen::VectorXd to_vector() const;
    Eigen::Index dim() const { return 2 * (beta.size() + b.size()); }
};

/// Covariate transforms baked into a fitted model: training means used to
/// center x, and optional per-covariate min-max ranges used to rescale z.
struct CovariateTransform {
    Eigen::VectorXd x_means;             // p, first entry 0 (intercept untouched)
    std::optional<Eigen::MatrixXd> z_range;  // 2 x d rows (min, max)

    Eigen::VectorXd apply_x(const Eigen::VectorXd& x) const;
    Eigen::VectorXd apply_z(const Eigen::VectorXd& z) const;
    static CovariateTransform identity(int p);
};

/// Design row A(x,z) = (x^T, B_1(z_1)^T, ..., B_d(z_d)^T), length
/// p + d*(K+xi). x must carry the leading intercept 1; each z_j must
/// already lie in [0,1] (rescaling happens upstream through
/// CovariateTransform).
Eigen::VectorXd build_design_row(const ModelSpec& spec,
                                 const std::vector<splines::NormalizedBasis>& bases,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& z);

struct ModelValue {
    double gamma;
    double scale;  // sigma, or varsigma when spec.reparam
    double log_scale;
};

/// gamma = A^T theta_gamma, scale = exp(A^T theta_sigma). Throws on exp
/// overflow, reporting the offending linear predictor.
ModelValue eval_model(const ModelSpec& spec, const std::vector<splines::NormalizedBasis>& bases,
                      const Theta& theta, const Eigen::VectorXd& x, const Eigen::VectorXd& z);

/// Block-diagonal penalty Omega with theta^T Omega theta =
/// lambda * sum_j int (g_j^{(m)})^2 + nu * sum_j int (s_j^{(m)})^2.
/// Zero blocks for beta and u.
Eigen::MatrixXd build_penalty_block(const ModelSpec& spec,
                                    const std::vector<splines::NormalizedBasis>& bases);

}  // namespace potgam::design

#endif
