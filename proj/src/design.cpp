#include "potgam/design.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace potgam::design {

void ModelSpec::validate() const {
    if (p < 1) throw std::invalid_argument("ModelSpec: p must be >= 1");
    if (d < 1) throw std::invalid_argument("ModelSpec: d must be >= 1");
    if (grid.K < 1) throw std::invalid_argument("ModelSpec: K must be >= 1");
    if (grid.xi < 1) throw std::invalid_argument("ModelSpec: xi must be >= 1");
    if (m < 1 || m >= grid.xi)
        throw std::invalid_argument("ModelSpec: penalty order m must satisfy 1 <= m < xi");
    if (!(lambda >= 0.0) || !(nu >= 0.0))
        throw std::invalid_argument("ModelSpec: smoothing parameters must be >= 0");
}

Theta Theta::zeros(const ModelSpec& spec) {
    Theta t;
    t.beta = Eigen::VectorXd::Zero(spec.p);
    t.b = Eigen::VectorXd::Zero(spec.d * spec.spline_block());
    t.u = Eigen::VectorXd::Zero(spec.p);
    t.c = Eigen::VectorXd::Zero(spec.d * spec.spline_block());
    return t;
}

Theta Theta::from_vector(const ModelSpec& spec, const Eigen::VectorXd& v) {
    if (v.size() != spec.dim())
        throw std::invalid_argument("Theta: packed vector has length " + std::to_string(v.size()) +
                                    ", expected " + std::to_string(spec.dim()));
    const int q = spec.d * spec.spline_block();
    Theta t;
    t.beta = v.segment(0, spec.p);
    t.b = v.segment(spec.p, q);
    t.u = v.segment(spec.p + q, spec.p);
    t.c = v.segment(2 * spec.p + q, q);
    return t;
}

Eigen::VectorXd Theta::to_vector() const {
    Eigen::VectorXd v(dim());
    v << beta, b, u, c;
    return v;
}

CovariateTransform CovariateTransform::identity(int p) {
    CovariateTransform t;
    t.x_means = Eigen::VectorXd::Zero(p);
    return t;
}

Eigen::VectorXd CovariateTransform::apply_x(const Eigen::VectorXd& x) const {
    return x - x_means;
}

Eigen::VectorXd CovariateTransform::apply_z(const Eigen::VectorXd& z) const {
    if (!z_range) return z;
    Eigen::VectorXd out(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        const double lo = (*z_range)(0, j);
        const double hi = (*z_range)(1, j);
        out[j] = hi > lo ? (z[j] - lo) / (hi - lo) : 0.5;
        out[j] = std::min(1.0, std::max(0.0, out[j]));
    }
    return out;
}

Eigen::VectorXd build_design_row(const ModelSpec& spec,
                                 const std::vector<splines::NormalizedBasis>& bases,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    if (x.size() != spec.p)
        throw std::invalid_argument("build_design_row: x has length " + std::to_string(x.size()) +
                                    ", expected p=" + std::to_string(spec.p));
    if (z.size() != spec.d)
        throw std::invalid_argument("build_design_row: z has length " + std::to_string(z.size()) +
                                    ", expected d=" + std::to_string(spec.d));
    if (static_cast<int>(bases.size()) != spec.d)
        throw std::invalid_argument("build_design_row: basis count mismatch");
    if (x[0] != 1.0)
        throw std::invalid_argument("build_design_row: x[0] must be the intercept 1");

    const int q = spec.spline_block();
    Eigen::VectorXd a(spec.half_dim());
    a.head(spec.p) = x;
    for (int j = 0; j < spec.d; ++j) {
        if (!(z[j] >= 0.0 && z[j] <= 1.0))
            throw std::domain_error("build_design_row: z_" + std::to_string(j + 1) + "=" +
                                    std::to_string(z[j]) + " outside [0,1]");
        a.segment(spec.p + j * q, q) = splines::eval_normalized_basis(bases[static_cast<std::size_t>(j)], z[j]);
    }
    return a;
}

ModelValue eval_model(const ModelSpec& spec, const std::vector<splines::NormalizedBasis>& bases,
                      const Theta& theta, const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    const Eigen::VectorXd a = build_design_row(spec, bases, x, z);
    ModelValue v;
    Eigen::VectorXd tg(a.size()), ts(a.size());
    tg << theta.beta, theta.b;
    ts << theta.u, theta.c;
    v.gamma = a.dot(tg);
    v.log_scale = a.dot(ts);
    if (v.log_scale > 700.0)
        throw std::overflow_error("eval_model: scale linear predictor " +
                                  std::to_string(v.log_scale) + " overflows exp");
    v.scale = std::exp(v.log_scale);
    return v;
}

Eigen::MatrixXd build_penalty_block(const ModelSpec& spec,
                                    const std::vector<splines::NormalizedBasis>& bases) {
    spec.validate();
    const int q = spec.spline_block();
    const int half = spec.half_dim();
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(spec.dim(), spec.dim());
    for (int j = 0; j < spec.d; ++j) {
        const Eigen::MatrixXd pj =
            splines::penalty_quadratic_form(bases[static_cast<std::size_t>(j)], spec.m);
        const int off = spec.p + j * q;
        omega.block(off, off, q, q) = spec.lambda * pj;
        omega.block(half + off, half + off, q, q) = spec.nu * pj;
    }
    return omega;
}

}  // namespace potgam::design
