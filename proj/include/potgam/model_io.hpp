#ifndef POTGAM_MODEL_IO_HPP
#define POTGAM_MODEL_IO_HPP

#include <string>
#include <vector>

#include "potgam/design.hpp"
#include "potgam/fitter.hpp"
#include "potgam/pot.hpp"

namespace potgam::model_io {

/// Everything needed to reproduce predictions and standard errors from a
/// fitted model, serialized as a self-describing JSON document (field list
/// in the README; `version` is mandatory).
struct FittedModel {
    design::ModelSpec spec;
    std::vector<splines::NormalizedBasis> bases;
    design::Theta theta;
    design::CovariateTransform transform;

    Eigen::Index n = 0;  // exceedances used in the fit
    Eigen::Index N = 0;  // raw rows before thresholding
    pot::ThresholdSpec threshold;

    bool converged = false;
    int iterations = 0;
    double final_grad_norm = 0.0;
    double nll = 0.0;
    std::vector<std::string> warnings;
    Eigen::MatrixXd penalized_hessian;
};

std::string to_json(const FittedModel& model);
FittedModel from_json(const std::string& text);

void save(const FittedModel& model, const std::string& path);
FittedModel load(const std::string& path);

}  // namespace potgam::model_io

#endif
