// Shared scenario fixtures for the fitter/inference/simlab suites.
#ifndef POTGAM_TESTS_FIXTURES_HPP
#define POTGAM_TESTS_FIXTURES_HPP

#include <potgam/design.hpp>
#include <potgam/fitter.hpp>
#include <potgam/pot.hpp>
#include <potgam/simlab.hpp>
#include <potgam/splines.hpp>

#include <span>
#include <vector>

namespace fixtures {

using namespace potgam;

// gamma(z) = 0.3 + 0.2 sin(2 pi z), log sigma(z) = 0.1 sin(2 pi z), p = 1
inline simlab::Scenario additive_scenario(std::uint64_t seed) {
    simlab::Scenario s;
    s.family = simlab::Family::ExactGpd;
    s.regime = simlab::SignRegime::S1;
    s.gamma_truth.intercept = 0.3;
    s.gamma_truth.x_slopes.resize(0);
    s.gamma_truth.smooths = {simlab::SmoothSpec::parse("sin", 0.2)};
    s.logsigma_truth.intercept = 0.0;
    s.logsigma_truth.x_slopes.resize(0);
    s.logsigma_truth.smooths = {simlab::SmoothSpec::parse("sin", 0.1)};
    s.threshold = pot::ThresholdSpec::constant(0.0);
    s.seed = seed;
    return s;
}

// constant-truth variant: gamma = gamma0, sigma = 1
inline simlab::Scenario constant_scenario(std::uint64_t seed, double gamma0 = 0.2) {
    simlab::Scenario s = additive_scenario(seed);
    s.gamma_truth.intercept = gamma0;
    s.gamma_truth.smooths = {simlab::SmoothSpec::parse("zero", 0.0)};
    s.logsigma_truth.smooths = {simlab::SmoothSpec::parse("zero", 0.0)};
    s.regime = gamma0 > 0.0   ? simlab::SignRegime::S1
               : gamma0 == 0.0 ? simlab::SignRegime::S3
                               : simlab::SignRegime::S2;
    return s;
}

struct Prepared {
    design::ModelSpec spec;
    std::vector<splines::NormalizedBasis> bases;
    pot::ExceedanceSample sample;
};

// fits with huge absolute smoothing parameters need a slightly looser
// gradient tolerance (the penalty gradient floats out near 1e-8)
inline fitter::FitConfig relaxed_tol() {
    fitter::FitConfig c;
    c.grad_tol = 1e-7;
    return c;
}

inline Prepared prepare(const simlab::Scenario& scenario, Eigen::Index n, int K, double lambda,
                        double nu, bool reparam = false, std::uint64_t stream = 1) {
    Prepared out;
    const pot::RawTable raw = simlab::generate(scenario, n, stream);
    out.sample = pot::apply_threshold(raw, scenario.threshold);
    out.spec.p = scenario.p();
    out.spec.d = scenario.d();
    out.spec.grid = splines::KnotGrid::uniform(K, 3);
    out.spec.m = 2;
    out.spec.lambda = lambda;
    out.spec.nu = nu;
    out.spec.reparam = reparam;
    out.spec.center_x = false;
    for (int j = 0; j < out.spec.d; ++j) {
        const Eigen::VectorXd col = out.sample.z.col(j);
        out.bases.push_back(splines::build_normalized_basis(
            out.spec.grid,
            std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
    }
    return out;
}

}  // namespace fixtures

#endif
