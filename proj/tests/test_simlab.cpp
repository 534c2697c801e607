#include <doctest.h>

#include <potgam/fitter.hpp>
#include <potgam/gpd.hpp>
#include <potgam/simlab.hpp>

#include <cmath>

#include "fixtures.hpp"

using namespace potgam;

TEST_CASE("smooth catalog has exact zero mean under uniform Z") {
    for (const char* name : {"zero", "sin", "cos", "linear"}) {
        const auto s = simlab::SmoothSpec::parse(name, 0.7);
        double acc = 0.0;
        const int G = 200000;
        for (int i = 0; i < G; ++i) acc += s.eval((i + 0.5) / G);
        CHECK(std::abs(acc / G) <= 1e-6);
    }
    CHECK_THROWS_AS(simlab::SmoothSpec::parse("cubic", 1.0), std::invalid_argument);
}

TEST_CASE("scenario validation enforces regimes and families") {
    auto s = fixtures::additive_scenario(1);
    CHECK_NOTHROW(s.validate());

    SUBCASE("S1 demands a positive shape everywhere") {
        s.gamma_truth.intercept = 0.1;  // 0.1 - 0.2 < 0
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    }
    SUBCASE("exact-gpd requires a constant threshold") {
        s.threshold = pot::ThresholdSpec::marginal_quantile(0.9);
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    }
    SUBCASE("burr requires S1") {
        s.family = simlab::Family::Burr;
        s.threshold = pot::ThresholdSpec::marginal_quantile(0.9);
        CHECK_NOTHROW(s.validate());
        s.regime = simlab::SignRegime::S3;
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    }
    SUBCASE("S2 bounds") {
        s.regime = simlab::SignRegime::S2;
        s.gamma_truth.intercept = -0.2;
        s.gamma_truth.smooths = {simlab::SmoothSpec::parse("sin", 0.1)};
        CHECK_NOTHROW(s.validate());
        s.gamma_truth.intercept = -0.39;  // bound dips below -2/5
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    }
    SUBCASE("S3 means identically zero") {
        s.regime = simlab::SignRegime::S3;
        s.family = simlab::Family::Gaussian;
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
        s.gamma_truth.intercept = 0.0;
        s.gamma_truth.smooths = {simlab::SmoothSpec::parse("zero", 0.0)};
        CHECK_NOTHROW(s.validate());
    }
}

TEST_CASE("generation is deterministic in (seed, stream)") {
    const auto s = fixtures::additive_scenario(999);
    const auto a = simlab::generate(s, 500, 3);
    const auto b = simlab::generate(s, 500, 3);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.z - b.z).cwiseAbs().maxCoeff() == 0.0);
    const auto c = simlab::generate(s, 500, 4);
    CHECK((a.y - c.y).cwiseAbs().maxCoeff() != 0.0);
}

TEST_CASE("exact-gpd exceedance mean matches the GPD mean formula") {
    auto s = fixtures::constant_scenario(7, 0.2);
    const auto raw = simlab::generate(s, 100000, 1);
    const auto sample = pot::apply_threshold(raw, s.threshold);
    CHECK(sample.n() == 100000);  // every draw exceeds a zero threshold
    const double mean = sample.y.mean();
    // mean sigma/(1-gamma) = 1.25; sd of the mean at 1e5 draws
    const double sd = std::sqrt(1.0 / (0.64 * 0.6) / 100000.0);
    CHECK(std::abs(mean - 1.25) <= 3.0 * sd);
}

TEST_CASE("gaussian regime yields near-zero fitted shape") {
    simlab::Scenario s;
    s.family = simlab::Family::Gaussian;
    s.regime = simlab::SignRegime::S3;
    s.gamma_truth.intercept = 0.0;
    s.gamma_truth.smooths = {simlab::SmoothSpec::parse("zero", 0.0)};
    s.logsigma_truth.smooths = {simlab::SmoothSpec::parse("zero", 0.0)};
    s.threshold = pot::ThresholdSpec::marginal_quantile(0.99);
    s.seed = 404;

    const auto raw = simlab::generate(s, 100000, 1);
    const auto sample = pot::apply_threshold(raw, s.threshold);
    CHECK(sample.n() >= 900);
    CHECK(sample.n() <= 1100);

    design::ModelSpec spec;
    spec.p = 1;
    spec.d = 1;
    spec.grid = splines::KnotGrid::uniform(3, 3);
    spec.m = 2;
    spec.lambda = 1e6;
    spec.nu = 1e6;
    std::vector<splines::NormalizedBasis> bases;
    const Eigen::VectorXd col = sample.z.col(0);
    bases.push_back(splines::build_normalized_basis(
        spec.grid, std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
    const fitter::FitResult fr = fitter::fit(spec, bases, sample, fixtures::relaxed_tol());
    REQUIRE(fr.converged);
    // the Gaussian tail approaches the GPD limit only logarithmically; at
    // this threshold the penultimate shape is about -0.1 (reference ML fits
    // land between -0.04 and -0.13), so "near zero" means within 0.15
    CHECK(std::abs(fr.theta.beta[0]) <= 0.15);
}

TEST_CASE("burr second-order bias exceeds the exact-gpd bias") {
    // paired replicates at fixed n/N = 0.2; burr with k=1 has rho = -1, so
    // the approximation bias scales like (n/N)^{-rho} = 0.2
    simlab::Scenario burr = fixtures::constant_scenario(5150, 0.3);
    burr.family = simlab::Family::Burr;
    burr.threshold = pot::ThresholdSpec::marginal_quantile(0.8);
    burr.burr_k = 1.0;
    simlab::Scenario exact = fixtures::constant_scenario(5150, 0.3);

    const int reps = 100;
    int burr_worse = 0;
    double bias_burr = 0.0, bias_exact = 0.0;
    for (int r = 0; r < reps; ++r) {
        const auto stream = static_cast<std::uint64_t>(r) + 1;
        auto fit_one = [&](const simlab::Scenario& sc, Eigen::Index N) {
            const auto raw = simlab::generate(sc, N, stream);
            const auto sample = pot::apply_threshold(raw, sc.threshold);
            design::ModelSpec spec;
            spec.p = 1;
            spec.d = 1;
            spec.grid = splines::KnotGrid::uniform(3, 3);
            spec.m = 2;
            spec.lambda = 1e6;
            spec.nu = 1e6;
            std::vector<splines::NormalizedBasis> bases;
            const Eigen::VectorXd col = sample.z.col(0);
            bases.push_back(splines::build_normalized_basis(
                spec.grid,
                std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
            return fitter::fit(spec, bases, sample, fixtures::relaxed_tol()).theta.beta[0];
        };
        const double gb = fit_one(burr, 10000);  // n ~ 2000
        const double ge = fit_one(exact, 2000);  // n = 2000 exactly
        bias_burr += gb - 0.3;
        bias_exact += ge - 0.3;
        if (std::abs(gb - 0.3) > std::abs(ge - 0.3)) ++burr_worse;
    }
    bias_burr /= reps;
    bias_exact /= reps;
    // sign test: burr errors dominate well beyond the binomial noise band
    CHECK(burr_worse >= 60);
    CHECK(std::abs(bias_burr) > std::abs(bias_exact));
}

TEST_CASE("scale intercept grows with the threshold level under S1") {
    auto fit_intercept = [&](double w) {
        auto s = fixtures::constant_scenario(616, 0.2);
        s.threshold = pot::ThresholdSpec::constant(w);
        auto prep = fixtures::prepare(s, 20000, 3, 1e6, 1e6);
        const fitter::FitResult fr =
            fitter::fit(prep.spec, prep.bases, prep.sample, fixtures::relaxed_tol());
        REQUIRE(fr.converged);
        return fr.theta.u[0];
    };
    const double u2 = fit_intercept(2.0);
    const double u5 = fit_intercept(5.0);
    CHECK(std::abs((u5 - u2) - std::log(5.0 / 2.0)) <= 0.1);
}

TEST_CASE("fisher oracles agree with the closed forms") {
    const auto at0 = simlab::oracle_fisher(0.0, 1000000, 2);
    CHECK(at0.mean(0, 0) == doctest::Approx(2.0).epsilon(0.01));
    CHECK(at0.mean(0, 1) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(at0.mean(1, 1) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(at0.se(0, 0) > 0.0);

    const auto at05 = simlab::oracle_fisher(0.5, 1000000, 2);
    CHECK(at05.mean(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(0.01));
    CHECK(at05.mean(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(0.01));
    CHECK(at05.mean(1, 1) == doctest::Approx(0.5).epsilon(0.01));

    const auto ortho = simlab::oracle_fisher_ortho(0.5, 1000000, 2);
    CHECK(ortho.mean(0, 0) == doctest::Approx(4.0 / 9.0).epsilon(0.01));
    CHECK(ortho.mean(1, 1) == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(ortho.mean(0, 1)) <= 0.01);
}

TEST_CASE("reversed-burr realizes a negative shape with bounded support") {
    simlab::Scenario s = fixtures::constant_scenario(99, -0.2);
    s.family = simlab::Family::ReversedBurr;
    s.threshold = pot::ThresholdSpec::marginal_quantile(0.95);
    s.burr_k = 1.0;
    s.endpoint = 1.0;
    CHECK_NOTHROW(s.validate());

    const auto raw = simlab::generate(s, 40000, 1);
    CHECK(raw.y.maxCoeff() < 1.0);  // endpoint
    const auto sample = pot::apply_threshold(raw, s.threshold);
    CHECK(sample.n() == 2000);

    design::ModelSpec spec;
    spec.p = 1;
    spec.d = 1;
    spec.grid = splines::KnotGrid::uniform(3, 3);
    spec.m = 2;
    spec.lambda = 1e6;
    spec.nu = 1e6;
    std::vector<splines::NormalizedBasis> bases;
    const Eigen::VectorXd col = sample.z.col(0);
    bases.push_back(splines::build_normalized_basis(
        spec.grid, std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
    const fitter::FitResult fr = fitter::fit(spec, bases, sample, fixtures::relaxed_tol());
    REQUIRE(fr.converged);
    CHECK(fr.theta.beta[0] < 0.0);
    // truth -0.2 plus the rho = -1 approximation bias and sampling noise
    CHECK(fr.theta.beta[0] == doctest::Approx(-0.2).epsilon(0.5));
}

TEST_CASE("second-order descriptor per family") {
    auto s = fixtures::constant_scenario(1, 0.3);
    s.family = simlab::Family::Burr;
    s.threshold = pot::ThresholdSpec::marginal_quantile(0.9);
    s.burr_k = 2.0;
    CHECK(s.second_order().rho == doctest::Approx(-0.5));
    CHECK(fixtures::constant_scenario(1, 0.3).second_order().rho ==
          -std::numeric_limits<double>::infinity());
    gpd::SecondOrderSpec bad{0.5, 1.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("exact-gpd intercepts are unbiased") {
    // zero second-order error by construction: the Monte Carlo mean of the
    // intercept error stays within three standard errors
    const auto s = fixtures::constant_scenario(2024, 0.2);
    const int reps = 200;
    std::vector<double> errs;
    for (int r = 0; r < reps; ++r) {
        auto prep = fixtures::prepare(s, 10000, 3, 1e6, 1e6, false,
                                      static_cast<std::uint64_t>(r) + 1);
        const fitter::FitResult fr =
            fitter::fit(prep.spec, prep.bases, prep.sample, fixtures::relaxed_tol());
        if (fr.converged) errs.push_back(fr.theta.beta[0] - 0.2);
    }
    REQUIRE(static_cast<int>(errs.size()) >= 190);
    double mean = 0.0;
    for (double e : errs) mean += e;
    mean /= static_cast<double>(errs.size());
    double var = 0.0;
    for (double e : errs) var += (e - mean) * (e - mean);
    var /= static_cast<double>(errs.size()) - 1.0;
    CHECK(std::abs(mean) <= 3.0 * std::sqrt(var / static_cast<double>(errs.size())));
}

TEST_CASE("optimal exceedance count formula") {
    // rho = -1, m = 2: exponent 5/7
    CHECK(simlab::optimal_exceedance_count(1e5, -1.0, 2) ==
          doctest::Approx(std::pow(1e5, 5.0 / 7.0)).epsilon(1e-12));
    CHECK_THROWS_AS(simlab::optimal_exceedance_count(1e5, 0.0, 2), std::invalid_argument);
}

TEST_CASE("loglog slope recovers a known power law") {
    std::vector<double> x{100, 200, 400, 800}, y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -0.4));
    double slope, se;
    simlab::loglog_slope(x, y, slope, se);
    CHECK(slope == doctest::Approx(-0.4).epsilon(1e-12));
    CHECK(se <= 1e-12);
}

TEST_CASE("rate experiment smoke run and determinism across thread counts") {
    const auto s = fixtures::additive_scenario(90210);
    simlab::RateOptions opt;
    opt.n_grid = {300, 600};
    opt.reps = 6;
    opt.grid_points = 50;
    opt.threads = 1;
    const auto serial = simlab::run_rate_experiment(s, opt);
    opt.threads = 4;
    const auto parallel = simlab::run_rate_experiment(s, opt);

    REQUIRE(serial.rmse_gamma.size() == 2);
    CHECK(serial.rmse_gamma[0] > 0.0);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(serial.rmse_gamma[i] == parallel.rmse_gamma[i]);  // bit-identical
        CHECK(serial.rmse_scale[i] == parallel.rmse_scale[i]);
        CHECK(serial.n_realized[i] == parallel.n_realized[i]);
    }
    CHECK(serial.slope_gamma == parallel.slope_gamma);
    CHECK(serial.expected_slope == doctest::Approx(-0.4));
}

TEST_CASE("normality experiment smoke run") {
    const auto s = fixtures::additive_scenario(777);
    simlab::NormalityOptions opt;
    opt.n = 600;
    opt.reps = 12;
    opt.x0 = Eigen::VectorXd::Ones(1);
    opt.z0 = Eigen::VectorXd::Constant(1, 0.5);
    opt.threads = 2;
    const auto rep = simlab::run_normality_experiment(s, opt);
    CHECK(rep.used + rep.dropped == 12);
    CHECK(rep.gamma_true == doctest::Approx(0.3));  // sin(pi) = 0 at z = 0.5
    CHECK(std::isfinite(rep.var_z));
    CHECK(rep.coverage95 >= 0.0);
    CHECK(rep.coverage95 <= 1.0);
    CHECK(rep.coverage95_reparam >= 0.0);
    CHECK(rep.coverage95_reparam <= 1.0);
}

TEST_CASE("doubling replicates shrinks the slope standard error") {
    // a single 6-point regression estimates its own SE with few degrees of
    // freedom, so the sqrt(reps) scaling is checked on SEs averaged over
    // three independent experiment instances
    simlab::RateOptions opt;
    opt.n_grid = {350, 500, 700, 1000, 1400, 2000};
    opt.grid_points = 100;
    opt.threads = 0;
    double se_small = 0.0, se_big = 0.0;
    for (std::uint64_t seed : {1001u, 2002u, 3003u, 4004u, 5005u}) {
        const auto s = fixtures::additive_scenario(seed);
        opt.reps = 12;  // few replicates keep the residuals noise-dominated
        se_small += simlab::run_rate_experiment(s, opt).slope_gamma_se;
        opt.reps = 24;
        se_big += simlab::run_rate_experiment(s, opt).slope_gamma_se;
    }
    const double ratio = se_big / se_small;
    CHECK(ratio >= 0.6);
    CHECK(ratio <= 0.85);
}
