#ifndef POTGAM_GPD_HPP
#define POTGAM_GPD_HPP

#include <Eigen/Core>

namespace potgam::gpd {

/// Shape/scale pair of the generalized Pareto family
/// H(y) = 1 - (1 + gamma*y/sigma)^{-1/gamma}, support y in (0, inf) for
/// gamma >= 0 and (0, -sigma/gamma) for gamma < 0.
struct GpdPoint {
    double gamma = 0.0;
    double sigma = 1.0;
};

/// Orthogonal parametrization (gamma, varsigma) with varsigma =
/// sigma*(gamma+1); requires gamma > -1.
struct GpdOrthoPoint {
    double gamma = 0.0;
    double varsigma = 1.0;
};

/// Second-order regular-variation descriptor: rho <= 0 plus the bounded
/// scaling-function value used by simulation scenarios.
struct SecondOrderSpec {
    double rho = -1.0;
    double alpha1 = 1.0;

    void validate() const;
};

/// Scores switch to series expansions below this |gamma|; the unit tests
/// pin continuity of the two branches at the switch.
inline constexpr double kGammaSwitch = 1e-5;

bool in_support(const GpdPoint& p, double y);

/// log density; throws std::domain_error outside the support or for y <= 0.
double logpdf(const GpdPoint& p, double y);

/// First derivatives of -log h in (gamma, log sigma). Under the exact GPD
/// both have mean zero.
double score_gamma(const GpdPoint& p, double y);
double score_logsigma(const GpdPoint& p, double y);

/// All per-observation derivatives of -log h in (gamma, eta = log sigma),
/// computed in one pass; this is what the Newton fitter consumes.
struct ScoreHess {
    double nll;      // -log h
    double g_gamma;  // d(-log h)/d gamma
    double g_eta;    // d(-log h)/d eta
    double h_gg;     // second derivatives
    double h_ge;
    double h_ee;
};

ScoreHess score_hessian(const GpdPoint& p, double y);

/// Expected per-observation outer product of (score_gamma, score_logsigma)
/// under the exact GPD:
///   [[ 2/((2g+1)(g+1)), 1/((2g+1)(g+1)) ],
///    [ 1/((2g+1)(g+1)), 1/(2g+1)        ]].
/// Requires gamma > -1/2.
Eigen::Matrix2d fisher_info(double gamma);

/// Reparametrized density h_rep(y|gamma, varsigma) =
/// ((gamma+1)/varsigma) * (1 + gamma(gamma+1)y/varsigma)^{-1/gamma-1}.
double ortho_logpdf(const GpdOrthoPoint& p, double y);
double score_gamma_ortho(const GpdOrthoPoint& p, double y);
double score_logvarsigma(const GpdOrthoPoint& p, double y);
ScoreHess ortho_score_hessian(const GpdOrthoPoint& p, double y);

/// Fisher information of the orthogonal family: diag(1/(gamma+1)^2,
/// 1/(2*gamma+1)), off-diagonals exactly zero. Requires gamma > -1/2.
Eigen::Matrix2d fisher_info_ortho(double gamma);

/// Inverse-CDF sampler: sigma*((1-u)^{-gamma}-1)/gamma, u in (0,1).
double sample(const GpdPoint& p, double u);

/// Same quantile map parameterized by the survival probability s = 1-u;
/// accurate deep in the tail where 1-u underflows.
double sample_from_survival(const GpdPoint& p, double s);

double cdf(const GpdPoint& p, double y);
double survival(const GpdPoint& p, double y);

/// Second-order auxiliary function
///   Qtilde(x) = (1/rho) [ (x^{gamma+rho}-1)/(gamma+rho) - (x^gamma-1)/gamma ]
/// with all gamma -> 0, rho -> 0, gamma+rho -> 0 limits handled
/// analytically. x > 0 required.
double eval_qtilde(double x, double gamma, double rho);

/// Q(y) = Hbar(y)^{1+gamma} * Qtilde(1/Hbar(y)) with Hbar = 1 - H on the
/// unit-scale family; y must lie in the support of H(.|gamma).
double eval_q(double y, double gamma, double rho);

}  // namespace potgam::gpd

#endif
