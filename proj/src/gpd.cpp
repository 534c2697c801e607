#include "potgam/gpd.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace potgam::gpd {

namespace {

void check_positive(double y) {
    if (!(y > 0.0)) throw std::domain_error("gpd: y must be positive, got " + std::to_string(y));
}

void check_scale(double sigma) {
    if (!(sigma > 0.0))
        throw std::domain_error("gpd: scale must be positive, got " + std::to_string(sigma));
}

[[noreturn]] void support_error(double gamma, double sigma, double y) {
    throw std::domain_error("gpd: y=" + std::to_string(y) + " outside the support of (gamma=" +
                            std::to_string(gamma) + ", sigma=" + std::to_string(sigma) + ")");
}

// (log1p(v) - v/(1+v)) / v^2, the cancellation-free kernel of the gamma
// score; -> 1/2 as v -> 0.
double phi_kernel(double v) {
    if (std::abs(v) < 3e-3) {
        // sum_{k>=0} (-1)^k (k+1) v^k / (k+2)
        return 0.5 +
               v * (-2.0 / 3.0 +
                    v * (0.75 + v * (-0.8 + v * (5.0 / 6.0 + v * (-6.0 / 7.0 + v * 0.875)))));
    }
    return (std::log1p(v) - v / (1.0 + v)) / (v * v);
}

// (2*phi_kernel(v) - (1+v)^{-2}) / v, kernel of the gamma-gamma Hessian
// entry; -> 2/3 as v -> 0.
double chi_kernel(double v) {
    if (std::abs(v) < 3e-3) {
        // sum_{k>=1} (-1)^{k+1} k(k+1)/(k+2) v^{k-1}
        return 2.0 / 3.0 +
               v * (-1.5 + v * (2.4 + v * (-10.0 / 3.0 +
                                           v * (30.0 / 7.0 + v * (-5.25 + v * 56.0 / 9.0)))));
    }
    const double om = 1.0 + v;
    return (2.0 * phi_kernel(v) - 1.0 / (om * om)) / v;
}

// log1p(v)/v, -> 1 as v -> 0.
double lam_kernel(double v) {
    if (v == 0.0) return 1.0;
    return std::log1p(v) / v;
}

}  // namespace

void SecondOrderSpec::validate() const {
    if (!(rho <= 0.0))
        throw std::invalid_argument("SecondOrderSpec: rho must be <= 0, got " +
                                    std::to_string(rho));
    if (!std::isfinite(alpha1))
        throw std::invalid_argument("SecondOrderSpec: alpha1 must be finite");
}

bool in_support(const GpdPoint& p, double y) {
    return y > 0.0 && p.sigma > 0.0 && 1.0 + p.gamma * y / p.sigma > 0.0;
}

double logpdf(const GpdPoint& p, double y) {
    check_positive(y);
    check_scale(p.sigma);
    const double t = y / p.sigma;
    const double v = p.gamma * t;
    if (!(1.0 + v > 0.0)) support_error(p.gamma, p.sigma, y);
    if (std::abs(p.gamma) < kGammaSwitch) {
        const double g = p.gamma;
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
        // -(1+1/g) log(1+gt) expanded about the exponential limit
        return -std::log(p.sigma) - t -
               g * (t - 0.5 * t2) -
               g * g * (t3 / 3.0 - 0.5 * t2) -
               g * g * g * (t3 / 3.0 - 0.25 * t4) -
               g * g * g * g * (t5 / 5.0 - 0.25 * t4);
    }
    // log h = -log sigma - log1p(v) - t*log1p(v)/v
    return -std::log(p.sigma) - std::log1p(v) - t * lam_kernel(v);
}

double score_gamma(const GpdPoint& p, double y) {
    check_positive(y);
    check_scale(p.sigma);
    const double t = y / p.sigma;
    const double v = p.gamma * t;
    if (!(1.0 + v > 0.0)) support_error(p.gamma, p.sigma, y);
    if (std::abs(p.gamma) < kGammaSwitch) {
        const double g = p.gamma;
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t, t6 = t5 * t;
        return t - 0.5 * t2 + g * (2.0 * t3 / 3.0 - t2) + g * g * (t3 - 0.75 * t4) +
               g * g * g * (0.8 * t5 - t4) + g * g * g * g * (t5 - t6 * 5.0 / 6.0);
    }
    // exact rewrite of (1/g+1) t/(1+v) - g^{-2} log(1+v)
    return t / (1.0 + v) - t * t * phi_kernel(v);
}

double score_logsigma(const GpdPoint& p, double y) {
    check_positive(y);
    check_scale(p.sigma);
    const double t = y / p.sigma;
    const double v = p.gamma * t;
    if (!(1.0 + v > 0.0)) support_error(p.gamma, p.sigma, y);
    return 1.0 - (1.0 + p.gamma) * t / (1.0 + v);
}

ScoreHess score_hessian(const GpdPoint& p, double y) {
    check_positive(y);
    check_scale(p.sigma);
    const double t = y / p.sigma;
    const double v = p.gamma * t;
    if (!(1.0 + v > 0.0)) support_error(p.gamma, p.sigma, y);
    const double u = 1.0 + v;
    ScoreHess s;
    s.nll = -logpdf(p, y);
    s.g_gamma = score_gamma(p, y);
    s.g_eta = 1.0 - (1.0 + p.gamma) * t / u;
    if (std::abs(p.gamma) < kGammaSwitch) {
        const double g = p.gamma;
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t, t6 = t5 * t, t7 = t6 * t;
        s.h_gg = 2.0 * t3 / 3.0 - t2 + g * (2.0 * t3 - 1.5 * t4) +
                 g * g * (2.4 * t5 - 3.0 * t4) + g * g * g * (4.0 * t5 - 10.0 * t6 / 3.0) +
                 g * g * g * g * (30.0 * t7 / 7.0 - 5.0 * t6);
    } else {
        s.h_gg = t * t * t * chi_kernel(v) - t * t / (u * u);
    }
    s.h_ge = t * (t - 1.0) / (u * u);
    s.h_ee = (1.0 + p.gamma) * t / (u * u);
    return s;
}

Eigen::Matrix2d fisher_info(double gamma) {
    if (!(gamma > -0.5))
        throw std::domain_error("fisher_info: requires gamma > -1/2, got " +
                                std::to_string(gamma));
    const double a = (2.0 * gamma + 1.0) * (gamma + 1.0);
    Eigen::Matrix2d m;
    m << 2.0 / a, 1.0 / a, 1.0 / a, 1.0 / (2.0 * gamma + 1.0);
    return m;
}

namespace {

GpdPoint plain_of_ortho(const GpdOrthoPoint& p) {
    if (!(p.gamma > -1.0))
        throw std::domain_error("gpd ortho: requires gamma > -1, got " + std::to_string(p.gamma));
    if (!(p.varsigma > 0.0))
        throw std::domain_error("gpd ortho: varsigma must be positive, got " +
                                std::to_string(p.varsigma));
    return GpdPoint{p.gamma, p.varsigma / (p.gamma + 1.0)};
}

}  // namespace

double ortho_logpdf(const GpdOrthoPoint& p, double y) { return logpdf(plain_of_ortho(p), y); }

double score_gamma_ortho(const GpdOrthoPoint& p, double y) {
    const GpdPoint q = plain_of_ortho(p);
    return score_gamma(q, y) - score_logsigma(q, y) / (p.gamma + 1.0);
}

double score_logvarsigma(const GpdOrthoPoint& p, double y) {
    return score_logsigma(plain_of_ortho(p), y);
}

ScoreHess ortho_score_hessian(const GpdOrthoPoint& p, double y) {
    // chain rule through log sigma = log varsigma - log(1+gamma)
    const GpdPoint q = plain_of_ortho(p);
    const ScoreHess s = score_hessian(q, y);
    const double r = 1.0 / (p.gamma + 1.0);
    ScoreHess o;
    o.nll = s.nll;
    o.g_gamma = s.g_gamma - r * s.g_eta;
    o.g_eta = s.g_eta;
    o.h_gg = s.h_gg - 2.0 * r * s.h_ge + r * r * s.h_ee + r * r * s.g_eta;
    o.h_ge = s.h_ge - r * s.h_ee;
    o.h_ee = s.h_ee;
    return o;
}

Eigen::Matrix2d fisher_info_ortho(double gamma) {
    if (!(gamma > -0.5))
        throw std::domain_error("fisher_info_ortho: requires gamma > -1/2, got " +
                                std::to_string(gamma));
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    m(0, 0) = 1.0 / ((gamma + 1.0) * (gamma + 1.0));
    m(1, 1) = 1.0 / (2.0 * gamma + 1.0);
    return m;
}

double sample(const GpdPoint& p, double u) {
    if (!(u > 0.0 && u < 1.0))
        throw std::domain_error("gpd sample: u must lie in (0,1), got " + std::to_string(u));
    check_scale(p.sigma);
    const double w = -std::log1p(-u);  // exponential quantile
    if (p.gamma == 0.0) return p.sigma * w;
    return p.sigma * std::expm1(p.gamma * w) / p.gamma;
}

double sample_from_survival(const GpdPoint& p, double s) {
    if (!(s > 0.0 && s < 1.0))
        throw std::domain_error("gpd sample: survival probability must lie in (0,1), got " +
                                std::to_string(s));
    check_scale(p.sigma);
    const double w = -std::log(s);
    if (p.gamma == 0.0) return p.sigma * w;
    return p.sigma * std::expm1(p.gamma * w) / p.gamma;
}

double cdf(const GpdPoint& p, double y) { return 1.0 - survival(p, y); }

double survival(const GpdPoint& p, double y) {
    check_scale(p.sigma);
    if (!(y > 0.0)) return 1.0;
    const double v = p.gamma * y / p.sigma;
    if (!(1.0 + v > 0.0)) return 0.0;  // beyond the finite endpoint
    if (p.gamma == 0.0) return std::exp(-y / p.sigma);
    return std::exp(-std::log1p(v) / p.gamma);
}

namespace {

// (x^a - 1)/a with the a -> 0 limit log x.
double powm1_over(double logx, double a) {
    const double w = a * logx;
    if (std::abs(w) < 1e-8) return logx * (1.0 + 0.5 * w + w * w / 6.0);
    return std::expm1(w) / a;
}

// d/da (x^a - 1)/a = (a x^a log x - (x^a - 1)) / a^2, with the a -> 0
// limit (log x)^2 / 2.
double dpowm1_over(double logx, double a) {
    const double w = a * logx;
    if (std::abs(w) < 1e-6) {
        return logx * logx * (0.5 + w / 3.0 + w * w / 8.0);
    }
    const double xa = std::exp(w);
    return (w * xa - std::expm1(w)) / (a * a);
}

}  // namespace

double eval_qtilde(double x, double gamma, double rho) {
    if (!(x > 0.0)) throw std::domain_error("eval_qtilde: x must be positive");
    if (rho > 0.0) throw std::domain_error("eval_qtilde: rho must be <= 0");
    const double logx = std::log(x);
    if (rho == 0.0) {
        // limit of (powm1(gamma+rho) - powm1(gamma))/rho as rho -> 0
        return dpowm1_over(logx, gamma);
    }
    return (powm1_over(logx, gamma + rho) - powm1_over(logx, gamma)) / rho;
}

double eval_q(double y, double gamma, double rho) {
    const GpdPoint unit{gamma, 1.0};
    if (!in_support(unit, y)) support_error(gamma, 1.0, y);
    const double hbar = survival(unit, y);
    if (hbar <= 0.0) return 0.0;
    return std::pow(hbar, 1.0 + gamma) * eval_qtilde(1.0 / hbar, gamma, rho);
}

}  // namespace potgam::gpd
