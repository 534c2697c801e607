#ifndef POTGAM_SPLINES_HPP
#define POTGAM_SPLINES_HPP

#include <Eigen/Core>
#include <span>
#include <vector>

namespace potgam::splines {

/// Equidistant knot grid on [0,1] with boundary knots repeated so that the
/// full multiset is kappa_{-xi} = ... = kappa_0 = 0 < kappa_1 < ... <
/// kappa_K < kappa_{K+1} = ... = kappa_{K+xi+1} = 1, interior spacing
/// 1/(K+1). Carries K+xi+1 B-spline basis functions of degree xi.
struct KnotGrid {
    int K = 0;                   // interior knot count
    int xi = 0;                  // spline degree (>= 0)
    std::vector<double> knots;   // kappa_{-xi} .. kappa_{K+xi+1}

    static KnotGrid uniform(int K, int xi);

    // j in [-xi, K+xi+1]
    double knot(int j) const { return knots[static_cast<std::size_t>(j + xi)]; }
    int basis_count() const { return K + xi + 1; }
    double spacing() const { return 1.0 / (K + 1); }
};

/// Values of all K+xi+1 raw B-spline bases at z in [0,1]. At most xi+1
/// entries are nonzero and they sum to one. z outside [0,1] throws.
Eigen::VectorXd eval_raw_basis(const KnotGrid& grid, double z);

/// Centered and scale-one recombination of the raw basis, built against an
/// observed z-sample. phi[k] is the empirical mean of raw basis k
/// (k = 0..K+xi); norms[k-1] the empirical RMS of
/// psibar_k = psi_k - (phi_k/phi_{k-1}) psi_{k-1} (k = 1..K+xi). Each of
/// the K+xi normalized functions has empirical mean 0 and empirical RMS 1.
struct NormalizedBasis {
    KnotGrid grid;
    Eigen::VectorXd phi;     // size K+xi+1
    Eigen::VectorXd norms;   // size K+xi

    int size() const { return grid.K + grid.xi; }
};

NormalizedBasis build_normalized_basis(const KnotGrid& grid, std::span<const double> zsample);

/// Values of the K+xi normalized bases at z; at most xi+2 nonzero entries.
Eigen::VectorXd eval_normalized_basis(const NormalizedBasis& basis, double z);

/// Plain m-th order difference matrix of shape (size-m) x size, composed
/// from size-adjusted first differences; rows of the m=2 case read
/// (1, -2, 1).
Eigen::MatrixXd build_difference_matrix(int size, int m);

/// Gram matrix R_m of the degree-(xi-m) bases living on the same interior
/// knots, R[i][k] = int_0^1 psi^{[xi-m]}_i psi^{[xi-m]}_k dz, by exact
/// per-interval Gauss-Legendre quadrature. Requires 0 < m <= xi.
Eigen::MatrixXd build_gram_matrix(const KnotGrid& grid, int m);

/// The (K+xi+1) x (K+xi) band matrix Psi mapping normalized-basis
/// coefficients to raw-basis coefficients: B(z)^T v = psi(z)^T (Psi v).
Eigen::MatrixXd normalization_matrix(const NormalizedBasis& basis);

/// Exact m-th derivative coefficient map for splines in the raw basis:
/// if s(z) = psi^{[xi]}(z)^T a then s^{(m)}(z) = psi^{[xi-m]}(z)^T (W a).
/// Shape (K+xi+1-m) x (K+xi+1). Each derivative step divides the first
/// difference by the local knot span, so boundary rows carry larger
/// weights than the interior (K+1)^m.
Eigen::MatrixXd derivative_coefficient_matrix(const KnotGrid& grid, int m);

/// Penalty matrix P with v^T P v = int_0^1 { d^m B(z)^T v / dz^m }^2 dz,
/// exactly, for 1 <= m < xi. Symmetric positive semidefinite; order
/// K^{2m} with kernel spanned by coefficients reproducing polynomials of
/// degree < m.
Eigen::MatrixXd penalty_quadratic_form(const NormalizedBasis& basis, int m);

/// s^{(m)}(z) for s(z) = B(z)^T v.
double eval_spline_mth_derivative(const NormalizedBasis& basis,
                                  const Eigen::VectorXd& v, int m, double z);

/// Gauss-Legendre nodes/weights on [-1,1], n >= 1. Exposed for the
/// quadrature oracles in the test suite.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace potgam::splines

#endif
