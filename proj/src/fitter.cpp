#include "potgam/fitter.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "potgam/gpd.hpp"
#include "potgam/rng.hpp"

namespace potgam::fitter {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Workspace {
    Eigen::MatrixXd A;       // n x half_dim design matrix
    Eigen::MatrixXd omega;   // penalty block (quadratic-form convention)
    // Factor G_j with G_j^T G_j = P_j. The objective and gradient evaluate
    // the penalty through the factors: lambda*||G b||^2 sums nonnegative
    // terms, whereas theta^T Omega theta cancels huge intermediates and its
    // float noise (~ lambda * max|P| * eps) stalls the line search when the
    // smoothing parameters are large.
    std::vector<Eigen::MatrixXd> pen_factor;
    const design::ModelSpec* spec;
    const pot::ExceedanceSample* data;
};

Workspace make_workspace(const design::ModelSpec& spec,
                         const std::vector<splines::NormalizedBasis>& bases,
                         const pot::ExceedanceSample& data) {
    spec.validate();
    if (data.n() == 0) throw std::invalid_argument("fit: empty exceedance sample");
    if (data.x.cols() != spec.p)
        throw std::invalid_argument("fit: data has " + std::to_string(data.x.cols()) +
                                    " linear covariates, spec expects p=" + std::to_string(spec.p));
    if (data.z.cols() != spec.d)
        throw std::invalid_argument("fit: data has " + std::to_string(data.z.cols()) +
                                    " smooth covariates, spec expects d=" + std::to_string(spec.d));
    Workspace w;
    w.A.resize(data.n(), spec.half_dim());
    for (Eigen::Index i = 0; i < data.n(); ++i)
        w.A.row(i) =
            design::build_design_row(spec, bases, data.x.row(i), data.z.row(i)).transpose();
    w.omega = design::build_penalty_block(spec, bases);
    for (int j = 0; j < spec.d; ++j) {
        const auto& basis = bases[static_cast<std::size_t>(j)];
        const Eigen::MatrixXd R = splines::build_gram_matrix(basis.grid, spec.m);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
        const Eigen::MatrixXd rhalf =
            es.eigenvectors() *
            es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
            es.eigenvectors().transpose();
        w.pen_factor.push_back(rhalf *
                               splines::derivative_coefficient_matrix(basis.grid, spec.m) *
                               splines::normalization_matrix(basis));
    }
    w.spec = &spec;
    w.data = &data;
    return w;
}

// lambda * sum_j ||G_j b_j||^2 + nu * sum_j ||G_j c_j||^2
double penalty_value(const Workspace& w, const Eigen::VectorXd& theta) {
    const auto& spec = *w.spec;
    const int q = spec.spline_block();
    const int half = spec.half_dim();
    double acc = 0.0;
    for (int j = 0; j < spec.d; ++j) {
        const auto& G = w.pen_factor[static_cast<std::size_t>(j)];
        acc += spec.lambda * (G * theta.segment(spec.p + j * q, q)).squaredNorm();
        acc += spec.nu * (G * theta.segment(half + spec.p + j * q, q)).squaredNorm();
    }
    return acc;
}

void add_penalty_gradient(const Workspace& w, const Eigen::VectorXd& theta,
                          Eigen::VectorXd& grad) {
    const auto& spec = *w.spec;
    const int q = spec.spline_block();
    const int half = spec.half_dim();
    for (int j = 0; j < spec.d; ++j) {
        const auto& G = w.pen_factor[static_cast<std::size_t>(j)];
        grad.segment(spec.p + j * q, q) +=
            2.0 * spec.lambda * (G.transpose() * (G * theta.segment(spec.p + j * q, q)));
        grad.segment(half + spec.p + j * q, q) +=
            2.0 * spec.nu *
            (G.transpose() * (G * theta.segment(half + spec.p + j * q, q)));
    }
}

// Per-observation shape/log-scale linear predictors under theta.
struct Predictors {
    Eigen::VectorXd gamma;
    Eigen::VectorXd eta;  // log sigma, or log varsigma when reparam
};

Predictors predictors(const Workspace& w, const Eigen::VectorXd& theta) {
    const int half = w.spec->half_dim();
    Predictors p;
    p.gamma = w.A * theta.head(half);
    p.eta = w.A * theta.tail(half);
    return p;
}

// Objective only; +inf on any support violation or scale overflow.
double objective(const Workspace& w, const Eigen::VectorXd& theta) {
    const Predictors pr = predictors(w, theta);
    const bool reparam = w.spec->reparam;
    double nll = 0.0;
    for (Eigen::Index i = 0; i < w.data->n(); ++i) {
        const double g = pr.gamma[i];
        if (pr.eta[i] > 700.0) return kInf;
        const double scale = std::exp(pr.eta[i]);
        double sigma = scale;
        if (reparam) {
            if (!(g > -1.0)) return kInf;
            sigma = scale / (g + 1.0);
        }
        const double y = w.data->y[i];
        if (!(sigma > 0.0) || !(1.0 + g * y / sigma > 0.0)) return kInf;
        nll -= gpd::logpdf({g, sigma}, y);
    }
    return nll + penalty_value(w, theta);
}

struct Derivatives {
    double value = kInf;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    double min_gamma = kInf;
    bool feasible = false;
};

Derivatives derivatives(const Workspace& w, const Eigen::VectorXd& theta) {
    const int half = w.spec->half_dim();
    const Eigen::Index n = w.data->n();
    const Predictors pr = predictors(w, theta);
    const bool reparam = w.spec->reparam;

    Derivatives d;
    Eigen::VectorXd sg(n), se(n), hgg(n), hge(n), hee(n);
    double nll = 0.0;
    double min_gamma = kInf;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double g = pr.gamma[i];
        min_gamma = std::min(min_gamma, g);
        if (pr.eta[i] > 700.0) return d;
        const double scale = std::exp(pr.eta[i]);
        const double y = w.data->y[i];
        gpd::ScoreHess s;
        if (reparam) {
            if (!(g > -1.0)) return d;
            const double sigma = scale / (g + 1.0);
            if (!(1.0 + g * y / sigma > 0.0)) return d;
            s = gpd::ortho_score_hessian({g, scale}, y);
        } else {
            if (!(1.0 + g * y / scale > 0.0)) return d;
            s = gpd::score_hessian({g, scale}, y);
        }
        nll += s.nll;
        sg[i] = s.g_gamma;
        se[i] = s.g_eta;
        hgg[i] = s.h_gg;
        hge[i] = s.h_ge;
        hee[i] = s.h_ee;
    }

    d.feasible = true;
    d.min_gamma = min_gamma;
    d.value = nll + penalty_value(w, theta);

    d.grad.resize(2 * half);
    d.grad.head(half) = w.A.transpose() * sg;
    d.grad.tail(half) = w.A.transpose() * se;
    add_penalty_gradient(w, theta, d.grad);

    d.hess.resize(2 * half, 2 * half);
    const Eigen::MatrixXd mgg = w.A.transpose() * hgg.asDiagonal() * w.A;
    const Eigen::MatrixXd mge = w.A.transpose() * hge.asDiagonal() * w.A;
    const Eigen::MatrixXd mee = w.A.transpose() * hee.asDiagonal() * w.A;
    d.hess.topLeftCorner(half, half) = mgg;
    d.hess.topRightCorner(half, half) = mge;
    d.hess.bottomLeftCorner(half, half) = mge.transpose();
    d.hess.bottomRightCorner(half, half) = mee;
    d.hess += 2.0 * w.omega;
    d.hess = 0.5 * (d.hess + d.hess.transpose()).eval();
    return d;
}

}  // namespace

void FitConfig::validate() const {
    if (max_iter < 1) throw std::invalid_argument("FitConfig: max_iter must be >= 1");
    if (!(grad_tol > 0.0)) throw std::invalid_argument("FitConfig: grad_tol must be > 0");
    if (step_halving_max < 1) throw std::invalid_argument("FitConfig: step_halving_max >= 1");
    if (!(ridge >= 0.0)) throw std::invalid_argument("FitConfig: ridge must be >= 0");
}

double penalized_nll(const design::ModelSpec& spec,
                     const std::vector<splines::NormalizedBasis>& bases,
                     const design::Theta& theta, const pot::ExceedanceSample& data) {
    const Workspace w = make_workspace(spec, bases, data);
    return objective(w, theta.to_vector());
}

Eigen::VectorXd penalized_gradient(const design::ModelSpec& spec,
                                   const std::vector<splines::NormalizedBasis>& bases,
                                   const design::Theta& theta,
                                   const pot::ExceedanceSample& data) {
    const Workspace w = make_workspace(spec, bases, data);
    const Derivatives d = derivatives(w, theta.to_vector());
    if (!d.feasible)
        throw std::domain_error("penalized_gradient: theta is infeasible for the data");
    return d.grad;
}

Eigen::MatrixXd penalized_hessian(const design::ModelSpec& spec,
                                  const std::vector<splines::NormalizedBasis>& bases,
                                  const design::Theta& theta, const pot::ExceedanceSample& data) {
    const Workspace w = make_workspace(spec, bases, data);
    const Derivatives d = derivatives(w, theta.to_vector());
    if (!d.feasible)
        throw std::domain_error("penalized_hessian: theta is infeasible for the data");
    return d.hess;
}

design::Theta initialize_theta(const design::ModelSpec& spec,
                               const std::vector<splines::NormalizedBasis>& bases,
                               const pot::ExceedanceSample& data) {
    if (data.n() == 0) throw std::invalid_argument("initialize_theta: empty sample");
    design::Theta t = design::Theta::zeros(spec);
    t.u[0] = std::log(data.y.mean());
    t.beta[0] = 0.1;

    const Workspace w = make_workspace(spec, bases, data);
    for (int halvings = 0; halvings < 60; ++halvings) {
        if (std::isfinite(objective(w, t.to_vector()))) return t;
        t.beta[0] *= 0.5;
    }
    t.beta[0] = 0.0;  // gamma = 0 start covers the full positive axis
    return t;
}

int default_knot_count(Eigen::Index n, int m) {
    return static_cast<int>(std::ceil(std::pow(static_cast<double>(n), 1.0 / (2.0 * m + 1.0))));
}

FitResult fit(const design::ModelSpec& spec, const std::vector<splines::NormalizedBasis>& bases,
              const pot::ExceedanceSample& data, const FitConfig& config) {
    config.validate();
    const Workspace w = make_workspace(spec, bases, data);
    const auto n = static_cast<double>(data.n());

    FitResult res;
    res.n_obs = data.n();
    if (data.n() < 10 * spec.half_dim())
        res.warnings.push_back("sample size n=" + std::to_string(data.n()) +
                               " below the recommended 10*(p+d*(K+xi))=" +
                               std::to_string(10 * spec.half_dim()));

    Eigen::VectorXd theta = initialize_theta(spec, bases, data).to_vector();
    Derivatives cur = derivatives(w, theta);
    if (!cur.feasible)
        throw std::runtime_error("fit: infeasible starting point despite initialization guard");
    res.objective_trace.push_back(cur.value);

    double last_min_gamma = cur.min_gamma;
    int polish_budget = 3;
    int iter = 0;
    for (; iter < config.max_iter; ++iter) {
        res.final_grad_norm = cur.grad.lpNorm<Eigen::Infinity>() / n;
        if (res.final_grad_norm <= config.grad_tol) {
            res.converged = true;
            break;
        }

        // Newton direction with ridge escalation on indefiniteness
        double ridge = std::max(config.ridge, 1e-300);
        Eigen::VectorXd step;
        bool solved = false;
        for (; ridge <= 1e12; ridge *= 10.0) {
            Eigen::MatrixXd H = cur.hess;
            H.diagonal().array() += ridge;
            Eigen::LLT<Eigen::MatrixXd> llt(H);
            if (llt.info() != Eigen::Success) continue;
            step = llt.solve(-cur.grad);
            if (cur.grad.dot(step) < 0.0) {
                solved = true;
                break;
            }
        }
        if (!solved) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cur.hess);
            throw std::runtime_error(
                "fit: Hessian solve failed after ridge escalation; smallest eigenvalue " +
                std::to_string(es.eigenvalues().minCoeff()));
        }

        // backtracking until the objective decreases and stays feasible
        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < config.step_halving_max; ++h, scale *= 0.5) {
            const Eigen::VectorXd cand = theta + scale * step;
            const double val = objective(w, cand);
            if (val < cur.value) {
                theta = cand;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Near the optimum the Newton decrement drops below the float
            // granularity of the objective, so the line search cannot verify
            // the decrease. A tiny full step is still a guaranteed descent
            // of the quadratic model; take a few to let the gradient check
            // conclude.
            if (polish_budget > 0 &&
                step.lpNorm<Eigen::Infinity>() <=
                    1e-7 * (1.0 + theta.lpNorm<Eigen::Infinity>())) {
                --polish_budget;
                const Derivatives next = derivatives(w, theta + step);
                if (next.feasible) {
                    theta += step;
                    cur = next;
                    last_min_gamma = cur.min_gamma;
                    continue;  // trace records only line-search-verified values
                }
            }
            break;  // stalled; report non-convergence
        }

        cur = derivatives(w, theta);
        if (!cur.feasible)
            throw std::runtime_error("fit: accepted step became infeasible");  // unreachable
        res.objective_trace.push_back(cur.value);
        last_min_gamma = cur.min_gamma;
    }

    res.iterations = iter;
    res.theta = design::Theta::from_vector(spec, theta);
    res.nll = cur.value;
    res.final_grad_norm = cur.grad.lpNorm<Eigen::Infinity>() / n;
    if (!res.converged && res.final_grad_norm <= config.grad_tol) res.converged = true;
    res.penalized_hessian = cur.hess / n;

    const double s2_bound = -static_cast<double>(spec.m) / (2.0 * spec.m + 1.0);
    if (last_min_gamma < s2_bound)
        res.warnings.push_back(
            "fitted shape " + std::to_string(last_min_gamma) + " below -m/(2m+1) = " +
            std::to_string(s2_bound) +
            " on a training point; the negative-shape regime bound is violated");
    if (!res.converged)
        res.warnings.push_back("Newton did not reach the gradient tolerance (final " +
                               std::to_string(res.final_grad_norm) + ")");
    return res;
}

std::pair<double, double> select_smoothing(design::ModelSpec spec,
                                           const pot::ExceedanceSample& data,
                                           const FitConfig& config,
                                           const std::vector<double>& grid,
                                           std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("select_smoothing: empty candidate grid");
    const Eigen::Index n = data.n();
    if (n < 20) throw std::invalid_argument("select_smoothing: need at least 20 exceedances");

    // deterministic 80/20 split
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_u64() % i)]);
    const Eigen::Index n_train = (4 * n) / 5;

    auto subsample = [&](Eigen::Index lo, Eigen::Index hi) {
        pot::ExceedanceSample s;
        s.y.resize(hi - lo);
        s.x.resize(hi - lo, data.x.cols());
        s.z.resize(hi - lo, data.z.cols());
        for (Eigen::Index r = lo; r < hi; ++r) {
            s.y[r - lo] = data.y[order[static_cast<std::size_t>(r)]];
            s.x.row(r - lo) = data.x.row(order[static_cast<std::size_t>(r)]);
            s.z.row(r - lo) = data.z.row(order[static_cast<std::size_t>(r)]);
        }
        s.N = data.N;
        s.threshold = data.threshold;
        return s;
    };
    const pot::ExceedanceSample train = subsample(0, n_train);
    const pot::ExceedanceSample hold = subsample(n_train, n);

    std::vector<splines::NormalizedBasis> bases;
    for (int j = 0; j < spec.d; ++j) {
        const Eigen::VectorXd col = train.z.col(j);
        bases.push_back(splines::build_normalized_basis(
            spec.grid, std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
    }

    double best_score = kInf;
    std::pair<double, double> best{grid.front(), grid.front()};
    for (double lam : grid) {
        for (double nu : grid) {
            spec.lambda = lam;
            spec.nu = nu;
            FitResult r;
            try {
                r = fit(spec, bases, train, config);
            } catch (const std::exception&) {
                continue;
            }
            double score = 0.0;
            for (Eigen::Index i = 0; i < hold.n(); ++i) {
                try {
                    const design::ModelValue v =
                        design::eval_model(spec, bases, r.theta, hold.x.row(i), hold.z.row(i));
                    const double sigma = spec.reparam ? v.scale / (v.gamma + 1.0) : v.scale;
                    score -= gpd::logpdf({v.gamma, sigma}, hold.y[i]);
                } catch (const std::exception&) {
                    score += 1e6;  // infeasible held-out row under this candidate
                }
            }
            if (score < best_score) {
                best_score = score;
                best = {lam, nu};
            }
        }
    }
    if (!std::isfinite(best_score))
        throw std::runtime_error("select_smoothing: no candidate produced a usable fit");
    return best;
}

}  // namespace potgam::fitter
