#ifndef POTGAM_POT_HPP
#define POTGAM_POT_HPP

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace potgam::pot {

/// How the threshold tau is obtained: a constant level, a marginal
/// empirical quantile of y*, or a per-row column supplied with the data.
struct ThresholdSpec {
    enum class Kind { Constant, MarginalQuantile, Column };
    Kind kind = Kind::Constant;
    double value = 0.0;        // constant level or quantile level in (0,1)
    std::string column;        // referenced column for Kind::Column

    static ThresholdSpec constant(double w);
    static ThresholdSpec marginal_quantile(double level);
    static ThresholdSpec column_ref(std::string name);

    /// Parse "constant:5", "quantile:0.9" or "column:name".
    static ThresholdSpec parse(const std::string& text);
    std::string describe() const;
};

/// Raw input table before thresholding: response y*, linear covariates
/// without the intercept column, smooth covariates, and an optional
/// per-row threshold column.
struct RawTable {
    Eigen::VectorXd y;                         // N
    Eigen::MatrixXd x;                         // N x (p-1), may have 0 cols
    Eigen::MatrixXd z;                         // N x d
    std::optional<Eigen::VectorXd> threshold;  // N, for ThresholdSpec::Column
};

/// Exceedance data: y holds the strict excesses y* - tau > 0, x carries a
/// prepended intercept column, n = y.size() <= N.
struct ExceedanceSample {
    Eigen::VectorXd y;   // n, all positive
    Eigen::MatrixXd x;   // n x p, first column all ones
    Eigen::MatrixXd z;   // n x d
    Eigen::Index N = 0;  // original sample size
    ThresholdSpec threshold;
    std::vector<std::string> warnings;

    Eigen::Index n() const { return y.size(); }
    double exceedance_fraction() const { return static_cast<double>(n()) / static_cast<double>(N); }
};

/// Keep strict exceedances y* > tau and shift them to excesses. Throws if
/// no observation exceeds the threshold. Attaches a warning when n/N >
/// 0.2 (threshold likely too low for the tail approximation).
ExceedanceSample apply_threshold(const RawTable& raw, const ThresholdSpec& spec);

}  // namespace potgam::pot

#endif
