#include "potgam/splines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace potgam::splines {

KnotGrid KnotGrid::uniform(int K, int xi) {
    if (K < 1) throw std::invalid_argument("KnotGrid: interior knot count K must be >= 1");
    if (xi < 0) throw std::invalid_argument("KnotGrid: degree xi must be >= 0");
    KnotGrid g;
    g.K = K;
    g.xi = xi;
    g.knots.resize(static_cast<std::size_t>(K + 2 * xi + 2));
    const double h = 1.0 / (K + 1);
    for (int j = -xi; j <= K + xi + 1; ++j) {
        double v;
        if (j <= 0)
            v = 0.0;
        else if (j >= K + 1)
            v = 1.0;
        else
            v = j * h;
        g.knots[static_cast<std::size_t>(j + xi)] = v;
    }
    return g;
}

namespace {

void check_unit_interval(double z) {
    if (!(z >= 0.0 && z <= 1.0))
        throw std::domain_error("spline evaluation point z=" + std::to_string(z) +
                                " outside [0,1]");
}

// Index of the knot interval [kappa_s, kappa_{s+1}) containing z, with z=1
// mapped to the last nonempty interval so the basis stays a partition of
// unity at the right boundary.
int find_span(const KnotGrid& grid, double z) {
    if (z >= 1.0) return grid.K;
    const int s = static_cast<int>(std::floor(z * (grid.K + 1)));
    return std::min(s, grid.K);
}

}  // namespace

Eigen::VectorXd eval_raw_basis(const KnotGrid& grid, double z) {
    check_unit_interval(z);
    const int xi = grid.xi;
    const int span = find_span(grid, z);  // interval index in [0, K]
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.basis_count());

    // Local de Boor triangle: N[r] holds the value of basis span+r-j at
    // round j. Basis indices span..span+xi are the (at most) xi+1 nonzero
    // ones on this interval.
    std::vector<double> N(static_cast<std::size_t>(xi + 1), 0.0);
    N[0] = 1.0;
    for (int deg = 1; deg <= xi; ++deg) {
        double saved = 0.0;
        for (int r = 0; r < deg; ++r) {
            // basis index span + r at previous degree spans
            // [kappa_{span+r-deg+1+...}] -- use global knot accessor
            const int k = span + r;  // raw index of the contributing basis at degree deg-1... shifted below
            const double left = grid.knot(k - deg + 1);
            const double right = grid.knot(k + 1);
            const double den = right - left;
            const double term = den > 0.0 ? N[static_cast<std::size_t>(r)] / den : 0.0;
            N[static_cast<std::size_t>(r)] = saved + (right - z) * term;
            saved = (z - left) * term;
        }
        N[static_cast<std::size_t>(deg)] = saved;
    }
    for (int r = 0; r <= xi; ++r) {
        const int idx = span + r;
        if (idx >= 0 && idx < grid.basis_count()) out[idx] = N[static_cast<std::size_t>(r)];
    }
    return out;
}

NormalizedBasis build_normalized_basis(const KnotGrid& grid, std::span<const double> zsample) {
    if (grid.basis_count() < 2)
        throw std::invalid_argument("build_normalized_basis: need at least two raw bases");
    if (zsample.empty())
        throw std::invalid_argument("build_normalized_basis: empty z-sample");

    const int nb = grid.basis_count();
    const auto n = static_cast<double>(zsample.size());

    Eigen::VectorXd phi = Eigen::VectorXd::Zero(nb);
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(zsample.size()), nb);
    for (std::size_t i = 0; i < zsample.size(); ++i) {
        raw.row(static_cast<Eigen::Index>(i)) = eval_raw_basis(grid, zsample[i]).transpose();
        phi += raw.row(static_cast<Eigen::Index>(i)).transpose();
    }
    phi /= n;
    for (int k = 0; k < nb; ++k) {
        if (!(phi[k] > 0.0))
            throw std::runtime_error(
                "build_normalized_basis: degenerate z-sample, raw basis " + std::to_string(k) +
                " has empirical mean " + std::to_string(phi[k]) +
                " (too few distinct z values for K=" + std::to_string(grid.K) + ")");
    }

    Eigen::VectorXd norms(nb - 1);
    for (int k = 1; k < nb; ++k) {
        const double ratio = phi[k] / phi[k - 1];
        const double ms =
            (raw.col(k) - ratio * raw.col(k - 1)).squaredNorm() / n;
        norms[k - 1] = std::sqrt(ms);
        if (!(norms[k - 1] > 0.0))
            throw std::runtime_error(
                "build_normalized_basis: degenerate z-sample, centered basis " +
                std::to_string(k) + " has zero empirical norm");
    }

    return NormalizedBasis{grid, std::move(phi), std::move(norms)};
}

Eigen::VectorXd eval_normalized_basis(const NormalizedBasis& basis, double z) {
    const Eigen::VectorXd psi = eval_raw_basis(basis.grid, z);
    const int nb = basis.grid.basis_count();
    Eigen::VectorXd out(nb - 1);
    for (int k = 1; k < nb; ++k) {
        const double ratio = basis.phi[k] / basis.phi[k - 1];
        out[k - 1] = (psi[k] - ratio * psi[k - 1]) / basis.norms[k - 1];
    }
    return out;
}

Eigen::MatrixXd build_difference_matrix(int size, int m) {
    if (m < 1) throw std::invalid_argument("build_difference_matrix: order m must be >= 1");
    if (size <= m)
        throw std::invalid_argument("build_difference_matrix: need size > m, got size=" +
                                    std::to_string(size) + " m=" + std::to_string(m));
    auto first_difference = [](int s) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(s - 1, s);
        for (int i = 0; i < s - 1; ++i) {
            d(i, i) = 1.0;
            d(i, i + 1) = -1.0;
        }
        return d;
    };
    Eigen::MatrixXd dm = first_difference(size);
    for (int q = 2; q <= m; ++q) dm = first_difference(size - q + 1) * dm;
    return dm;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: need n >= 1 nodes");
    nodes.assign(static_cast<std::size_t>(n), 0.0);
    weights.assign(static_cast<std::size_t>(n), 0.0);
    // Newton iteration from the Chebyshev initial guess.
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            if (n == 1) p1 = x;  // P_1
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double pn = (n == 1) ? x : p1;
            const double pn1 = (n == 1) ? 1.0 : p0;
            pp = n * (x * pn - pn1) / (x * x - 1.0);
            const double dx = pn / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[static_cast<std::size_t>(i)] = -x;
        nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[static_cast<std::size_t>(i)] = w;
        weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    if (n == 1) {
        nodes[0] = 0.0;
        weights[0] = 2.0;
    }
}

Eigen::MatrixXd build_gram_matrix(const KnotGrid& grid, int m) {
    if (m < 1) throw std::invalid_argument("build_gram_matrix: order m must be >= 1");
    if (m > grid.xi)
        throw std::invalid_argument(
            "build_gram_matrix: penalty derivative order m=" + std::to_string(m) +
            " exceeds spline degree xi=" + std::to_string(grid.xi) +
            " (the m-th derivative of a degree-xi spline vanishes)");

    const int deg = grid.xi - m;
    const KnotGrid reduced = KnotGrid::uniform(grid.K, deg);
    const int nb = reduced.basis_count();  // K + xi + 1 - m

    // Degree-deg polynomial products are degree 2*deg; deg+1 Gauss points
    // per knot interval integrate them exactly.
    std::vector<double> gx, gw;
    gauss_legendre(deg + 1, gx, gw);

    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(nb, nb);
    const double h = reduced.spacing();
    for (int interval = 0; interval <= reduced.K; ++interval) {
        const double a = interval * h;
        for (std::size_t q = 0; q < gx.size(); ++q) {
            const double z = a + 0.5 * h * (gx[q] + 1.0);
            const double w = 0.5 * h * gw[q];
            const Eigen::VectorXd psi = eval_raw_basis(reduced, z);
            R.selfadjointView<Eigen::Lower>().rankUpdate(psi, w);
        }
    }
    return R.selfadjointView<Eigen::Lower>();
}

Eigen::MatrixXd normalization_matrix(const NormalizedBasis& basis) {
    const int nb = basis.grid.basis_count();
    Eigen::MatrixXd Psi = Eigen::MatrixXd::Zero(nb, nb - 1);
    for (int k = 1; k < nb; ++k) {
        const double inv = 1.0 / basis.norms[k - 1];
        Psi(k, k - 1) = inv;
        Psi(k - 1, k - 1) = -(basis.phi[k] / basis.phi[k - 1]) * inv;
    }
    return Psi;
}

Eigen::MatrixXd derivative_coefficient_matrix(const KnotGrid& grid, int m) {
    if (m < 1) throw std::invalid_argument("derivative_coefficient_matrix: m must be >= 1");
    if (m > grid.xi)
        throw std::invalid_argument("derivative_coefficient_matrix: m exceeds degree xi");

    Eigen::MatrixXd W = Eigen::MatrixXd::Identity(grid.basis_count(), grid.basis_count());
    // One derivative step per level: coefficients a of degree-deg bases map
    // to deg/(kappa_k - kappa_{k-deg}) * (a_k - a_{k-1}) on degree deg-1.
    for (int step = 0; step < m; ++step) {
        const int deg = grid.xi - step;
        const int rows = grid.K + deg;          // bases of degree deg-1
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(rows, rows + 1);
        for (int r = 0; r < rows; ++r) {
            const int k = r + 1;  // index into the degree-deg coefficient vector
            // Span kappa_k - kappa_{k-deg} on the degree-deg grid, whose
            // knot j sits at clamp(j,0,K+1)/(K+1).
            auto knot_at = [&](int j) {
                const int jc = std::clamp(j, 0, grid.K + 1);
                return jc * grid.spacing();
            };
            const double span = knot_at(k) - knot_at(k - deg);
            const double w = deg / span;
            S(r, k) = w;
            S(r, k - 1) = -w;
        }
        W = S * W;
    }
    return W;
}

Eigen::MatrixXd penalty_quadratic_form(const NormalizedBasis& basis, int m) {
    if (m < 1 || m >= basis.grid.xi)
        throw std::invalid_argument(
            "penalty_quadratic_form: need 1 <= m < xi, got m=" + std::to_string(m) +
            " xi=" + std::to_string(basis.grid.xi));
    const Eigen::MatrixXd Psi = normalization_matrix(basis);
    const Eigen::MatrixXd W = derivative_coefficient_matrix(basis.grid, m);
    const Eigen::MatrixXd R = build_gram_matrix(basis.grid, m);
    const Eigen::MatrixXd WPsi = W * Psi;
    Eigen::MatrixXd P = WPsi.transpose() * R * WPsi;
    return 0.5 * (P + P.transpose());
}

double eval_spline_mth_derivative(const NormalizedBasis& basis, const Eigen::VectorXd& v,
                                  int m, double z) {
    if (m < 1 || m >= basis.grid.xi)
        throw std::invalid_argument("eval_spline_mth_derivative: need 1 <= m < xi");
    if (v.size() != basis.size())
        throw std::invalid_argument("eval_spline_mth_derivative: coefficient size mismatch");
    check_unit_interval(z);
    const Eigen::VectorXd raw_coeff = normalization_matrix(basis) * v;
    const Eigen::VectorXd dcoeff = derivative_coefficient_matrix(basis.grid, m) * raw_coeff;
    const KnotGrid reduced = KnotGrid::uniform(basis.grid.K, basis.grid.xi - m);
    return eval_raw_basis(reduced, z).dot(dcoeff);
}

}  // namespace potgam::splines
