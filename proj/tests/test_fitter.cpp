#include <doctest.h>

#include <potgam/fitter.hpp>
#include <potgam/gpd.hpp>
#include <potgam/inference.hpp>
#include <potgam/rng.hpp>

#include <cmath>

#include "fixtures.hpp"

using namespace potgam;

TEST_CASE("penalized objective on elementary inputs") {
    auto prep = fixtures::prepare(fixtures::constant_scenario(1), 50, 2, 0.0, 0.0);

    SUBCASE("theta zero gives the exponential log-likelihood plus zero penalty") {
        // single observation y = 1
        pot::ExceedanceSample one = prep.sample;
        one.y = Eigen::VectorXd::Constant(1, 1.0);
        one.x = prep.sample.x.topRows(1);
        one.z = prep.sample.z.topRows(1);
        const double v =
            fitter::penalized_nll(prep.spec, prep.bases, design::Theta::zeros(prep.spec), one);
        CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
    }

    SUBCASE("spline-zero theta matches the plain GPD likelihood sum") {
        design::Theta theta = design::Theta::zeros(prep.spec);
        theta.beta[0] = 0.15;
        theta.u[0] = 0.3;
        double direct = 0.0;
        for (Eigen::Index i = 0; i < prep.sample.n(); ++i)
            direct -= gpd::logpdf({0.15, std::exp(0.3)}, prep.sample.y[i]);
        CHECK(fitter::penalized_nll(prep.spec, prep.bases, theta, prep.sample) ==
              doctest::Approx(direct).epsilon(1e-12));
    }

    SUBCASE("support violation yields +infinity, not an exception") {
        design::Theta theta = design::Theta::zeros(prep.spec);
        theta.beta[0] = -2.0;  // endpoint sigma/2 far below the sample maximum
        CHECK(std::isinf(fitter::penalized_nll(prep.spec, prep.bases, theta, prep.sample)));
    }
}

TEST_CASE("analytic gradient and hessian match finite differences") {
    for (bool reparam : {false, true}) {
        CAPTURE(reparam);
        auto prep = fixtures::prepare(fixtures::additive_scenario(7), 300, 4, 0.5, 0.25, reparam);
        Rng rng(55);
        int tested = 0;
        while (tested < 20) {
            design::Theta theta = fitter::initialize_theta(prep.spec, prep.bases, prep.sample);
            Eigen::VectorXd tv = theta.to_vector();
            for (Eigen::Index k = 0; k < tv.size(); ++k) tv[k] += rng.uniform(-0.05, 0.05);
            theta = design::Theta::from_vector(prep.spec, tv);
            if (!std::isfinite(fitter::penalized_nll(prep.spec, prep.bases, theta, prep.sample)))
                continue;
            ++tested;

            const Eigen::VectorXd grad =
                fitter::penalized_gradient(prep.spec, prep.bases, theta, prep.sample);
            const Eigen::MatrixXd hess =
                fitter::penalized_hessian(prep.spec, prep.bases, theta, prep.sample);
            auto obj = [&](const Eigen::VectorXd& v) {
                return fitter::penalized_nll(prep.spec, prep.bases,
                                             design::Theta::from_vector(prep.spec, v),
                                             prep.sample);
            };
            for (Eigen::Index k = 0; k < tv.size(); ++k) {
                const double h = 1e-6;
                Eigen::VectorXd up = tv, dn = tv;
                up[k] += h;
                dn[k] -= h;
                const double fd = (obj(up) - obj(dn)) / (2.0 * h);
                CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-6));

                const Eigen::VectorXd gup =
                    fitter::penalized_gradient(prep.spec, prep.bases,
                                               design::Theta::from_vector(prep.spec, up),
                                               prep.sample);
                const Eigen::VectorXd gdn =
                    fitter::penalized_gradient(prep.spec, prep.bases,
                                               design::Theta::from_vector(prep.spec, dn),
                                               prep.sample);
                const Eigen::VectorXd hcol = (gup - gdn) / (2.0 * h);
                for (Eigen::Index r = 0; r < tv.size(); ++r)
                    CHECK(hess(r, k) ==
                          doctest::Approx(hcol[r]).epsilon(1e-4).scale(
                              std::max(1.0, std::abs(hcol[r]))));
            }
        }
    }
}

TEST_CASE("initialization rule") {
    auto prep = fixtures::prepare(fixtures::constant_scenario(3), 200, 2, 1.0, 1.0);
    prep.sample.y.setConstant(2.0);
    const design::Theta t = fitter::initialize_theta(prep.spec, prep.bases, prep.sample);
    CHECK(t.u[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(t.beta[0] == doctest::Approx(0.1));
    CHECK(t.b.cwiseAbs().maxCoeff() == 0.0);
    CHECK(t.c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("initial objective is finite on fuzzed datasets") {
    Rng rng(555);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = 20 + static_cast<Eigen::Index>(rng.next_u64() % 200);
        pot::ExceedanceSample s;
        s.y.resize(n);
        s.x = Eigen::MatrixXd::Ones(n, 1);
        s.z.resize(n, 1);
        const double scale = std::exp(rng.uniform(-6.0, 6.0));
        for (Eigen::Index i = 0; i < n; ++i) {
            // mixture of heavy and light tails
            const double u = rng.uniform01();
            s.y[i] = scale * (rng.uniform01() < 0.5 ? -std::log(u) : std::pow(u, -0.7) - 1 + 1e-9);
            s.z(i, 0) = rng.uniform01();
        }
        s.N = n;
        design::ModelSpec spec;
        spec.p = 1;
        spec.d = 1;
        spec.grid = splines::KnotGrid::uniform(2, 3);
        spec.m = 2;
        std::vector<splines::NormalizedBasis> bases;
        const Eigen::VectorXd col = s.z.col(0);
        bases.push_back(splines::build_normalized_basis(
            spec.grid, std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
        const design::Theta t = fitter::initialize_theta(spec, bases, s);
        CHECK(std::isfinite(fitter::penalized_nll(spec, bases, t, s)));
    }
}

TEST_CASE("intercept recovery on a large exact sample") {
    // smooth suppressed by a huge penalty: effectively intercept-only
    auto prep = fixtures::prepare(fixtures::constant_scenario(42), 100000, 5, 1e6, 1e6);
    const fitter::FitResult fr =
        fitter::fit(prep.spec, prep.bases, prep.sample, fixtures::relaxed_tol());
    REQUIRE(fr.converged);
    CHECK(fr.theta.beta[0] == doctest::Approx(0.2).epsilon(0.1));
    CHECK(std::abs(fr.theta.beta[0] - 0.2) <= 0.02);
    CHECK(std::abs(fr.theta.u[0] - 0.0) <= 0.02);
    CHECK(fr.final_grad_norm <= 1e-8);
}

TEST_CASE("additive truth recovery at n=5000") {
    const int K = fitter::default_knot_count(5000, 2);
    auto prep = fixtures::prepare(fixtures::additive_scenario(314), 5000, K,
                                  1.0 / std::pow(K, 4), 1.0 / std::pow(K, 4));
    const fitter::FitResult fr = fitter::fit(prep.spec, prep.bases, prep.sample, {});
    REQUIRE(fr.converged);

    const auto scenario = fixtures::additive_scenario(314);
    Eigen::VectorXd x(1), z(1);
    x << 1.0;
    double mse = 0.0;
    const int G = 101;
    for (int i = 0; i < G; ++i) {
        z << static_cast<double>(i) / (G - 1);
        const double got = design::eval_model(prep.spec, prep.bases, fr.theta, x, z).gamma;
        const double want = scenario.gamma_at(x, z);
        mse += (got - want) * (got - want);
    }
    CHECK(std::sqrt(mse / G) <= 0.08);
}

TEST_CASE("reparametrized fit tracks the plain fit pointwise") {
    const auto scenario = fixtures::additive_scenario(2718);
    const int K = fitter::default_knot_count(5000, 2);
    auto plain = fixtures::prepare(scenario, 5000, K, 1.0 / std::pow(K, 4), 1.0 / std::pow(K, 4));
    auto rep = plain;
    rep.spec.reparam = true;
    const fitter::FitResult fp = fitter::fit(plain.spec, plain.bases, plain.sample, {});
    const fitter::FitResult fo = fitter::fit(rep.spec, rep.bases, rep.sample, {});
    REQUIRE(fp.converged);
    REQUIRE(fo.converged);

    Eigen::VectorXd x(1), z(1);
    x << 1.0;
    for (int i = 0; i <= 20; ++i) {
        z << i / 20.0;
        const double gp = design::eval_model(plain.spec, plain.bases, fp.theta, x, z).gamma;
        const double go = design::eval_model(rep.spec, rep.bases, fo.theta, x, z).gamma;
        const double se =
            inference::pointwise_ci(fp, plain.spec, plain.bases, x, z, 0.95).se_gamma;
        CHECK(std::abs(gp - go) <= 2.0 * se);
    }
}

TEST_CASE("accepted objective sequence is nonincreasing") {
    auto prep = fixtures::prepare(fixtures::additive_scenario(99), 2000, 5, 0.01, 0.01);
    const fitter::FitResult fr = fitter::fit(prep.spec, prep.bases, prep.sample, {});
    REQUIRE(fr.objective_trace.size() >= 2);
    for (std::size_t i = 1; i < fr.objective_trace.size(); ++i)
        CHECK(fr.objective_trace[i] <= fr.objective_trace[i - 1]);
}

TEST_CASE("huge penalties collapse the smooths to the polynomial kernel") {
    // at lambda = 1e8 the penalty gradient reaches float granularity, so the
    // optimizer may stop on a stalled line search; the collapse of the
    // fitted roughness is what matters here
    auto prep = fixtures::prepare(fixtures::additive_scenario(123), 3000, 6, 1e8, 1e8);
    const fitter::FitResult fr = fitter::fit(prep.spec, prep.bases, prep.sample, {});
    const Eigen::MatrixXd P = splines::penalty_quadratic_form(prep.bases[0], prep.spec.m);
    CHECK(fr.theta.b.dot(P * fr.theta.b) <= 1e-6);
    CHECK(fr.theta.c.dot(P * fr.theta.c) <= 1e-6);
}

TEST_CASE("fitted smooths keep zero empirical mean over the training sample") {
    auto prep = fixtures::prepare(fixtures::additive_scenario(31), 2500, 5, 0.01, 0.01);
    const fitter::FitResult fr = fitter::fit(prep.spec, prep.bases, prep.sample, {});
    REQUIRE(fr.converged);
    double mg = 0.0, ms = 0.0;
    for (Eigen::Index i = 0; i < prep.sample.n(); ++i) {
        const Eigen::VectorXd B =
            splines::eval_normalized_basis(prep.bases[0], prep.sample.z(i, 0));
        mg += B.dot(fr.theta.b);
        ms += B.dot(fr.theta.c);
    }
    CHECK(std::abs(mg / static_cast<double>(prep.sample.n())) <= 1e-10);
    CHECK(std::abs(ms / static_cast<double>(prep.sample.n())) <= 1e-10);
}

TEST_CASE("intercept errors shrink with sample size") {
    const int reps = 50;
    double prev = 1e9;
    for (Eigen::Index n : {1000, 10000, 100000}) {
        double err = 0.0;
        for (int r = 0; r < reps; ++r) {
            auto prep = fixtures::prepare(fixtures::constant_scenario(808), n, 2, 1e6, 1e6,
                                          false, static_cast<std::uint64_t>(r) + 1);
            const fitter::FitResult fr =
                fitter::fit(prep.spec, prep.bases, prep.sample, fixtures::relaxed_tol());
            err += std::abs(fr.theta.beta[0] - 0.2);
        }
        err /= reps;
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("negative-shape fits attach the regime-bound warning") {
    auto prep = fixtures::prepare(fixtures::constant_scenario(66, 0.25), 4000, 2, 1e6, 1e6);
    // overwrite the response with a deep-negative-shape exact sample
    Rng rng(1717);
    for (Eigen::Index i = 0; i < prep.sample.n(); ++i)
        prep.sample.y[i] = gpd::sample({-0.45, 1.0}, rng.uniform01());
    const fitter::FitResult fr =
        fitter::fit(prep.spec, prep.bases, prep.sample, fixtures::relaxed_tol());
    REQUIRE(fr.converged);
    CHECK(fr.theta.beta[0] < -0.4);
    bool found = false;
    for (const auto& w : fr.warnings)
        if (w.find("-m/(2m+1)") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("iteration cap reports non-convergence without throwing") {
    auto prep = fixtures::prepare(fixtures::additive_scenario(11), 1500, 4, 0.01, 0.01);
    fitter::FitConfig config;
    config.max_iter = 1;
    const fitter::FitResult fr = fitter::fit(prep.spec, prep.bases, prep.sample, config);
    CHECK(!fr.converged);
    CHECK(fr.iterations == 1);
    bool found = false;
    for (const auto& w : fr.warnings)
        if (w.find("gradient tolerance") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("small samples trigger the size warning") {
    auto prep = fixtures::prepare(fixtures::additive_scenario(5), 60, 3, 0.1, 0.1);
    const fitter::FitResult fr = fitter::fit(prep.spec, prep.bases, prep.sample, {});
    bool found = false;
    for (const auto& w : fr.warnings)
        if (w.find("recommended") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("default knot rule") {
    CHECK(fitter::default_knot_count(5000, 2) == 6);   // 5000^{0.2} = 5.49
    CHECK(fitter::default_knot_count(100, 1) == 5);    // 100^{1/3} = 4.64
    CHECK(fitter::default_knot_count(8000, 2) == 7);   // 8000^{0.2} = 6.03
}

TEST_CASE("held-out smoothing selection returns a grid candidate") {
    auto prep = fixtures::prepare(fixtures::additive_scenario(21), 1200, 4, 1.0, 1.0);
    const std::vector<double> grid{1e-4, 1e-2, 1.0};
    const auto [lam, nu] =
        fitter::select_smoothing(prep.spec, prep.sample, {}, grid, 2024);
    auto in_grid = [&](double v) {
        for (double g : grid)
            if (g == v) return true;
        return false;
    };
    CHECK(in_grid(lam));
    CHECK(in_grid(nu));
}
