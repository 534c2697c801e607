#include "potgam/pot.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace potgam::pot {

ThresholdSpec ThresholdSpec::constant(double w) {
    if (!(w >= 0.0))
        throw std::invalid_argument("threshold: constant level must be >= 0, got " +
                                    std::to_string(w));
    ThresholdSpec s;
    s.kind = Kind::Constant;
    s.value = w;
    return s;
}

ThresholdSpec ThresholdSpec::marginal_quantile(double level) {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("threshold: quantile level must lie in (0,1), got " +
                                    std::to_string(level));
    ThresholdSpec s;
    s.kind = Kind::MarginalQuantile;
    s.value = level;
    return s;
}

ThresholdSpec ThresholdSpec::column_ref(std::string name) {
    if (name.empty()) throw std::invalid_argument("threshold: empty column name");
    ThresholdSpec s;
    s.kind = Kind::Column;
    s.column = std::move(name);
    return s;
}

ThresholdSpec ThresholdSpec::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("threshold: expected kind:value, got '" + text + "'");
    const std::string kind = text.substr(0, colon);
    const std::string rest = text.substr(colon + 1);
    if (kind == "constant") return constant(std::stod(rest));
    if (kind == "quantile") return marginal_quantile(std::stod(rest));
    if (kind == "column") return column_ref(rest);
    throw std::invalid_argument("threshold: unknown kind '" + kind +
                                "' (expected constant, quantile or column)");
}

std::string ThresholdSpec::describe() const {
    switch (kind) {
        case Kind::Constant: return "constant:" + std::to_string(value);
        case Kind::MarginalQuantile: return "quantile:" + std::to_string(value);
        case Kind::Column: return "column:" + column;
    }
    return "?";
}

ExceedanceSample apply_threshold(const RawTable& raw, const ThresholdSpec& spec) {
    const Eigen::Index N = raw.y.size();
    if (N == 0) throw std::invalid_argument("apply_threshold: empty input table");
    if (raw.x.rows() != N || raw.z.rows() != N)
        throw std::invalid_argument("apply_threshold: covariate row count mismatch");
    if (raw.z.cols() < 1)
        throw std::invalid_argument("apply_threshold: at least one smooth covariate required");

    Eigen::VectorXd tau(N);
    switch (spec.kind) {
        case ThresholdSpec::Kind::Constant:
            tau.setConstant(spec.value);
            break;
        case ThresholdSpec::Kind::MarginalQuantile: {
            std::vector<double> sorted(raw.y.data(), raw.y.data() + N);
            std::sort(sorted.begin(), sorted.end());
            // order-statistic quantile: the ceil(a*N)-th smallest value
            const auto idx = static_cast<Eigen::Index>(
                std::min<double>(std::ceil(spec.value * static_cast<double>(N)),
                                 static_cast<double>(N)) - 1.0);
            tau.setConstant(sorted[static_cast<std::size_t>(std::max<Eigen::Index>(idx, 0))]);
            break;
        }
        case ThresholdSpec::Kind::Column:
            if (!raw.threshold)
                throw std::invalid_argument("apply_threshold: threshold column '" + spec.column +
                                            "' not present in the input");
            tau = *raw.threshold;
            break;
    }

    std::vector<Eigen::Index> keep;
    keep.reserve(static_cast<std::size_t>(N));
    for (Eigen::Index i = 0; i < N; ++i)
        if (raw.y[i] > tau[i]) keep.push_back(i);

    if (keep.empty())
        throw std::runtime_error("apply_threshold: no observation exceeds the threshold (" +
                                 spec.describe() + ")");

    const auto n = static_cast<Eigen::Index>(keep.size());
    ExceedanceSample out;
    out.y.resize(n);
    out.x.resize(n, raw.x.cols() + 1);
    out.z.resize(n, raw.z.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::Index i = keep[static_cast<std::size_t>(r)];
        out.y[r] = raw.y[i] - tau[i];
        out.x(r, 0) = 1.0;
        out.x.row(r).tail(raw.x.cols()) = raw.x.row(i);
        out.z.row(r) = raw.z.row(i);
    }
    out.N = N;
    out.threshold = spec;
    if (out.exceedance_fraction() > 0.2)
        out.warnings.push_back(
            "exceedance fraction n/N = " + std::to_string(out.exceedance_fraction()) +
            " > 0.2; the threshold is likely too low for the tail approximation");
    return out;
}

}  // namespace potgam::pot
