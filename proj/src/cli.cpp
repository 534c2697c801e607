#include "potgam/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "potgam/csv.hpp"
#include "potgam/design.hpp"
#include "potgam/fitter.hpp"
#include "potgam/gpd.hpp"
#include "potgam/inference.hpp"
#include "potgam/model_io.hpp"
#include "potgam/pot.hpp"
#include "potgam/simlab.hpp"

namespace potgam::cli {

namespace {

using nlohmann::json;

constexpr std::uint64_t kDefaultSeed = 12345;  // fixed default, never entropy

// x_1..x_k / z_1..z_k column families must be contiguous from 1.
int count_indexed_columns(const csv::Table& t, const std::string& prefix) {
    int k = 0;
    while (t.column(prefix + std::to_string(k + 1)) >= 0) ++k;
    return k;
}

pot::RawTable table_to_raw(const csv::Table& t, const std::string& threshold_column) {
    const int yc = t.require_column("y");
    const int px = count_indexed_columns(t, "x_");
    const int dz = count_indexed_columns(t, "z_");
    if (dz < 1)
        throw std::runtime_error("input needs at least one smooth covariate column named z_1");

    std::vector<int> xcols, zcols;
    for (int j = 1; j <= px; ++j) xcols.push_back(t.require_column("x_" + std::to_string(j)));
    for (int j = 1; j <= dz; ++j) zcols.push_back(t.require_column("z_" + std::to_string(j)));
    int tc = -1;
    if (!threshold_column.empty()) tc = t.require_column(threshold_column);

    const auto n = static_cast<Eigen::Index>(t.rows.size());
    if (n == 0) throw std::runtime_error("input has no data rows");
    pot::RawTable raw;
    raw.y.resize(n);
    raw.x.resize(n, px);
    raw.z.resize(n, dz);
    if (tc >= 0) raw.threshold = Eigen::VectorXd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = t.rows[static_cast<std::size_t>(i)];
        raw.y[i] = row[static_cast<std::size_t>(yc)];
        for (int j = 0; j < px; ++j) raw.x(i, j) = row[static_cast<std::size_t>(xcols[static_cast<std::size_t>(j)])];
        for (int j = 0; j < dz; ++j) raw.z(i, j) = row[static_cast<std::size_t>(zcols[static_cast<std::size_t>(j)])];
        if (tc >= 0) (*raw.threshold)[i] = row[static_cast<std::size_t>(tc)];
    }
    return raw;
}

simlab::AdditiveTruth truth_from_json(const json& j) {
    simlab::AdditiveTruth t;
    t.intercept = j.value("intercept", 0.0);
    if (j.contains("x_slopes")) {
        const auto& a = j.at("x_slopes");
        t.x_slopes.resize(static_cast<Eigen::Index>(a.size()));
        for (std::size_t i = 0; i < a.size(); ++i)
            t.x_slopes[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    } else {
        t.x_slopes.resize(0);
    }
    for (const auto& s : j.at("smooths"))
        t.smooths.push_back(
            simlab::SmoothSpec::parse(s.at("fn").get<std::string>(), s.value("a", 0.0)));
    return t;
}

pot::ThresholdSpec threshold_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return pot::ThresholdSpec::constant(j.at("value").get<double>());
    if (kind == "quantile")
        return pot::ThresholdSpec::marginal_quantile(j.at("value").get<double>());
    if (kind == "column") return pot::ThresholdSpec::column_ref(j.at("column").get<std::string>());
    throw std::runtime_error("config: unknown threshold kind '" + kind + "'");
}

simlab::Scenario scenario_from_json(const json& j) {
    simlab::Scenario s;
    s.family = simlab::family_from_string(j.at("family").get<std::string>());
    s.regime = simlab::regime_from_string(j.at("sign_regime").get<std::string>());
    s.gamma_truth = truth_from_json(j.at("gamma"));
    s.logsigma_truth = truth_from_json(j.at("log_sigma"));
    s.threshold = threshold_from_json(j.at("threshold"));
    s.seed = j.value("seed", kDefaultSeed);
    s.burr_k = j.value("burr_k", 1.0);
    s.endpoint = j.value("endpoint", 1.0);
    s.validate();
    return s;
}

simlab::FitRule fitrule_from_json(const json& root) {
    simlab::FitRule r;
    if (!root.contains("fit")) return r;
    const json& f = root.at("fit");
    r.xi = f.value("xi", 3);
    r.m = f.value("m", 2);
    r.knots = f.value("knots", 0);
    r.lambda_scale = f.value("lambda_scale", 1.0);
    r.nu_scale = f.value("nu_scale", 1.0);
    r.lambda_abs = f.value("lambda", -1.0);
    r.nu_abs = f.value("nu", -1.0);
    r.grad_tol = f.value("grad_tol", 1e-8);
    return r;
}

json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
    json j;
    f >> j;
    return j;
}

std::string fd(double v) { return csv::format_double(v); }

// ---------------------------------------------------------------- fit ---

struct FitArgs {
    std::string input, out, threshold;
    int xi = 3, m = 2, knots = -1, d_check = -1;
    double lambda = 1.0, nu = 1.0;
    bool reparam = false, no_center_x = false, rescale_z = false;
    std::string select_grid;
    std::uint64_t seed = kDefaultSeed;
    int max_iter = 200;
    double grad_tol = 1e-8;
};

int cmd_fit(const FitArgs& args) {
    const csv::Table table = csv::read_file(args.input);
    const pot::ThresholdSpec tspec = pot::ThresholdSpec::parse(args.threshold);
    const std::string tcol =
        tspec.kind == pot::ThresholdSpec::Kind::Column ? tspec.column : std::string{};
    const pot::RawTable raw = table_to_raw(table, tcol);
    pot::ExceedanceSample sample = pot::apply_threshold(raw, tspec);
    for (const auto& w : sample.warnings) std::cerr << "warning: " << w << "\n";

    const int p = static_cast<int>(sample.x.cols());
    const int d = static_cast<int>(sample.z.cols());
    if (args.d_check > 0 && args.d_check != d)
        throw std::runtime_error("--d " + std::to_string(args.d_check) + " does not match the " +
                                 std::to_string(d) + " z_ columns in the input");

    design::CovariateTransform transform = design::CovariateTransform::identity(p);
    if (!args.no_center_x && p > 1) {
        transform.x_means.tail(p - 1) = sample.x.rightCols(p - 1).colwise().mean();
        sample.x.rightCols(p - 1).rowwise() -= transform.x_means.tail(p - 1).transpose();
    }
    if (args.rescale_z) {
        Eigen::MatrixXd range(2, d);
        range.row(0) = sample.z.colwise().minCoeff();
        range.row(1) = sample.z.colwise().maxCoeff();
        transform.z_range = range;
        for (Eigen::Index i = 0; i < sample.n(); ++i)
            sample.z.row(i) = transform.apply_z(sample.z.row(i)).transpose();
    } else {
        for (Eigen::Index i = 0; i < sample.n(); ++i)
            for (int j = 0; j < d; ++j)
                if (!(sample.z(i, j) >= 0.0 && sample.z(i, j) <= 1.0))
                    throw std::runtime_error(
                        "z_" + std::to_string(j + 1) + "=" + fd(sample.z(i, j)) +
                        " outside [0,1] on an exceedance row; pass --rescale-z to min-max "
                        "rescale smooth covariates");
    }

    const int K = args.knots > 0 ? args.knots : fitter::default_knot_count(sample.n(), args.m);
    design::ModelSpec spec;
    spec.p = p;
    spec.d = d;
    spec.grid = splines::KnotGrid::uniform(K, args.xi);
    spec.m = args.m;
    spec.lambda = args.lambda;
    spec.nu = args.nu;
    spec.reparam = args.reparam;
    spec.center_x = !args.no_center_x;
    spec.rescale_z = args.rescale_z;
    spec.validate();

    fitter::FitConfig config;
    config.max_iter = args.max_iter;
    config.grad_tol = args.grad_tol;
    if (!args.select_grid.empty()) {
        std::vector<double> grid;
        std::stringstream ss(args.select_grid);
        std::string tok;
        while (std::getline(ss, tok, ',')) grid.push_back(std::stod(tok));
        const auto [lam, nu] = fitter::select_smoothing(spec, sample, config, grid, args.seed);
        spec.lambda = lam;
        spec.nu = nu;
        std::cout << "selected lambda=" << fd(lam) << " nu=" << fd(nu)
                  << " by held-out log-likelihood\n";
    }

    std::vector<splines::NormalizedBasis> bases;
    for (int j = 0; j < d; ++j) {
        const Eigen::VectorXd col = sample.z.col(j);
        bases.push_back(splines::build_normalized_basis(
            spec.grid, std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
    }

    const fitter::FitResult fr = fitter::fit(spec, bases, sample, config);

    model_io::FittedModel model;
    model.spec = spec;
    model.bases = bases;
    model.theta = fr.theta;
    model.transform = transform;
    model.n = sample.n();
    model.N = sample.N;
    model.threshold = tspec;
    model.converged = fr.converged;
    model.iterations = fr.iterations;
    model.final_grad_norm = fr.final_grad_norm;
    model.nll = fr.nll;
    model.warnings = fr.warnings;
    model.penalized_hessian = fr.penalized_hessian;
    model_io::save(model, args.out);

    std::cout << "exceedances: " << sample.n() << " of " << sample.N
              << " (fraction " << fd(sample.exceedance_fraction()) << ")\n"
              << "knots: " << K << ", basis dimension per smooth: " << spec.spline_block() << "\n"
              << "converged: " << (fr.converged ? "yes" : "NO") << " after " << fr.iterations
              << " iterations, penalized NLL " << fd(fr.nll) << ", grad norm "
              << fd(fr.final_grad_norm) << "\n";
    for (const auto& w : fr.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "model written to " << args.out << "\n";
    return fr.converged ? 0 : 2;
}

// ------------------------------------------------------------ predict ---

struct PredictArgs {
    std::string model, input, out;
    double level = 0.95;
};

int cmd_predict(const PredictArgs& args) {
    const model_io::FittedModel model = model_io::load(args.model);
    if (!model.converged)
        throw std::runtime_error("model '" + args.model +
                                 "' is marked non-converged; intervals are unavailable");
    const csv::Table table = csv::read_file(args.input);
    if (table.rows.empty()) throw std::runtime_error("prediction input has no data rows");

    const int p = model.spec.p;
    const int d = model.spec.d;
    std::vector<int> xcols, zcols;
    for (int j = 1; j < p; ++j) {
        const std::string name = "x_" + std::to_string(j);
        if (table.column(name) < 0) {
            std::ostringstream msg;
            msg << "prediction input is missing column '" << name << "'; the model expects";
            for (int k = 1; k < p; ++k) msg << " x_" << k;
            for (int k = 1; k <= d; ++k) msg << " z_" << k;
            throw std::runtime_error(msg.str());
        }
        xcols.push_back(table.column(name));
    }
    for (int j = 1; j <= d; ++j) {
        const std::string name = "z_" + std::to_string(j);
        if (table.column(name) < 0) {
            std::ostringstream msg;
            msg << "prediction input is missing column '" << name << "'; the model expects";
            for (int k = 1; k < p; ++k) msg << " x_" << k;
            for (int k = 1; k <= d; ++k) msg << " z_" << k;
            throw std::runtime_error(msg.str());
        }
        zcols.push_back(table.column(name));
    }

    fitter::FitResult fit;
    fit.theta = model.theta;
    fit.converged = model.converged;
    fit.iterations = model.iterations;
    fit.final_grad_norm = model.final_grad_norm;
    fit.penalized_hessian = model.penalized_hessian;
    fit.nll = model.nll;
    fit.n_obs = model.n;

    std::vector<std::string> row_errors;
    std::ostringstream out;
    for (int j = 1; j < p; ++j) out << "x_" << j << ",";
    for (int j = 1; j <= d; ++j) out << "z_" << j << ",";
    out << "gamma_hat,se_gamma,gamma_lo,gamma_hi,scale_hat,scale_lo,scale_hi\n";

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        Eigen::VectorXd x(p), z(d);
        x[0] = 1.0;
        for (int j = 1; j < p; ++j) x[j] = row[static_cast<std::size_t>(xcols[static_cast<std::size_t>(j - 1)])];
        for (int j = 0; j < d; ++j) z[j] = row[static_cast<std::size_t>(zcols[static_cast<std::size_t>(j)])];
        const Eigen::VectorXd xt = model.transform.apply_x(x);
        Eigen::VectorXd zt = z;
        if (model.transform.z_range) {
            zt = model.transform.apply_z(z);
        } else {
            for (int j = 0; j < d; ++j)
                if (!(z[j] >= 0.0 && z[j] <= 1.0))
                    row_errors.push_back("row " + std::to_string(r + 2) + ": z_" +
                                         std::to_string(j + 1) + "=" + fd(z[j]) +
                                         " outside [0,1] and the model has no rescale ranges");
        }
        if (!row_errors.empty()) continue;

        const inference::PointwiseCI ci =
            inference::pointwise_ci(fit, model.spec, model.bases, xt, zt, args.level);
        for (int j = 1; j < p; ++j) out << fd(x[j]) << ",";
        for (int j = 0; j < d; ++j) out << fd(z[j]) << ",";
        out << fd(ci.gamma_hat) << "," << fd(ci.se_gamma) << "," << fd(ci.gamma_lo) << ","
            << fd(ci.gamma_hi) << "," << fd(ci.scale_hat) << "," << fd(ci.scale_lo) << ","
            << fd(ci.scale_hi) << "\n";
    }

    if (!row_errors.empty()) {
        for (const auto& e : row_errors) std::cerr << "error: " << e << "\n";
        return 1;
    }
    csv::atomic_write_file(args.out, out.str());
    std::cout << "predictions written to " << args.out << "\n";
    return 0;
}

// ----------------------------------------------------------- simulate ---

struct SimulateArgs {
    std::string config, out;
    Eigen::Index N = 1000;
    std::uint64_t stream = 1;
    bool truth = false;
};

int cmd_simulate(const SimulateArgs& args) {
    const json cfg = load_json_file(args.config);
    const simlab::Scenario scenario =
        scenario_from_json(cfg.contains("scenario") ? cfg.at("scenario") : cfg);
    const pot::RawTable raw = simlab::generate(scenario, args.N, args.stream);

    std::ostringstream out;
    out << "y";
    for (Eigen::Index j = 0; j < raw.x.cols(); ++j) out << ",x_" << (j + 1);
    for (Eigen::Index j = 0; j < raw.z.cols(); ++j) out << ",z_" << (j + 1);
    if (args.truth) out << ",gamma_true,log_scale_true";
    out << "\n";
    Eigen::VectorXd x(scenario.p());
    for (Eigen::Index i = 0; i < raw.y.size(); ++i) {
        out << fd(raw.y[i]);
        for (Eigen::Index j = 0; j < raw.x.cols(); ++j) out << "," << fd(raw.x(i, j));
        for (Eigen::Index j = 0; j < raw.z.cols(); ++j) out << "," << fd(raw.z(i, j));
        if (args.truth) {
            x[0] = 1.0;
            x.tail(scenario.p() - 1) = raw.x.row(i);
            out << "," << fd(scenario.gamma_at(x, raw.z.row(i))) << ","
                << fd(scenario.log_scale_at(x, raw.z.row(i)));
        }
        out << "\n";
    }
    csv::atomic_write_file(args.out, out.str());
    std::cout << args.N << " rows written to " << args.out << "\n";
    return 0;
}

// -------------------------------------------------------- experiments ---

struct VerifyArgs {
    std::string config;
    std::string out_csv, out_json;  // override config paths when set
    int threads = -1;
};

struct BandCheck {
    std::string name;
    double value;
    double lo, hi;
    bool pass() const { return value >= lo && value <= hi; }
};

int finish_verification(const std::vector<BandCheck>& checks, const std::string& csv_path,
                        const std::string& csv_body, const std::string& json_path, json summary) {
    bool all_pass = true;
    json bands = json::array();
    for (const auto& c : checks) {
        const bool ok = c.pass();
        all_pass = all_pass && ok;
        std::cout << (ok ? "PASS " : "FAIL ") << c.name << " = " << fd(c.value) << " (band ["
                  << fd(c.lo) << ", " << fd(c.hi) << "])\n";
        bands.push_back({{"name", c.name}, {"value", c.value}, {"lo", c.lo}, {"hi", c.hi},
                         {"pass", ok}});
    }
    summary["bands"] = std::move(bands);
    summary["pass"] = all_pass;
    if (!csv_path.empty()) csv::atomic_write_file(csv_path, csv_body);
    if (!json_path.empty()) csv::atomic_write_file(json_path, summary.dump(2) + "\n");
    return all_pass ? 0 : 3;
}

int cmd_verify_rate(const VerifyArgs& args) {
    const json cfg = load_json_file(args.config);
    const simlab::Scenario scenario = scenario_from_json(cfg.at("scenario"));
    const json& rc = cfg.at("rate");

    simlab::RateOptions opt;
    if (rc.contains("n_grid")) {
        for (const auto& v : rc.at("n_grid")) opt.n_grid.push_back(v.get<Eigen::Index>());
    } else if (rc.contains("N_grid")) {
        // threshold schedule from the optimal-order formula
        const double rho = rc.at("rho").get<double>();
        for (const auto& v : rc.at("N_grid"))
            opt.n_grid.push_back(static_cast<Eigen::Index>(
                std::ceil(simlab::optimal_exceedance_count(v.get<double>(), rho,
                                                           fitrule_from_json(cfg).m))));
    } else {
        throw std::runtime_error("rate config: need n_grid or (N_grid, rho)");
    }
    opt.reps = rc.value("reps", 100);
    opt.parametric = rc.value("parametric", false);
    opt.grid_points = rc.value("grid_points", 200);
    opt.fit = fitrule_from_json(cfg);
    opt.threads = args.threads >= 0 ? args.threads : cfg.value("threads", 0);

    const simlab::RateReport rep = simlab::run_rate_experiment(scenario, opt);

    std::ostringstream body;
    body << "n_target,n_realized,knots,reps,dropped,rmse_gamma,rmse_logscale,beta_err\n";
    for (std::size_t i = 0; i < rep.n_grid.size(); ++i)
        body << rep.n_grid[i] << "," << fd(rep.n_realized[i]) << "," << rep.knots_used[i] << ","
             << rep.reps << "," << rep.dropped[i] << "," << fd(rep.rmse_gamma[i]) << ","
             << fd(rep.rmse_scale[i]) << "," << fd(rep.beta_err[i]) << "\n";

    json summary;
    summary["experiment"] = "rate";
    summary["seed"] = scenario.seed;
    summary["family"] = simlab::to_string(scenario.family);
    summary["parametric"] = rep.parametric;
    summary["expected_slope"] = rep.expected_slope;
    summary["slope_gamma"] = rep.slope_gamma;
    summary["slope_gamma_se"] = rep.slope_gamma_se;
    summary["slope_logscale"] = rep.slope_scale;
    summary["slope_logscale_se"] = rep.slope_scale_se;
    summary["slope_beta"] = rep.slope_beta;
    summary["slope_beta_se"] = rep.slope_beta_se;

    std::vector<BandCheck> checks;
    const double dlo = rep.parametric ? -0.6 : -0.55;
    const double dhi = rep.parametric ? -0.4 : -0.25;
    const double lo = rc.contains("slope_band") ? rc.at("slope_band")[0].get<double>() : dlo;
    const double hi = rc.contains("slope_band") ? rc.at("slope_band")[1].get<double>() : dhi;
    if (rep.parametric)
        checks.push_back({"slope(log ||beta_hat - beta_0|| vs log n)", rep.slope_beta, lo, hi});
    else
        checks.push_back({"slope(log rmse(gamma_hat) vs log n)", rep.slope_gamma, lo, hi});

    const std::string out_csv = !args.out_csv.empty() ? args.out_csv : cfg.value("out_csv", "");
    const std::string out_json = !args.out_json.empty() ? args.out_json : cfg.value("out_json", "");
    return finish_verification(checks, out_csv, body.str(), out_json, std::move(summary));
}

int cmd_verify_normality(const VerifyArgs& args) {
    const json cfg = load_json_file(args.config);
    const simlab::Scenario scenario = scenario_from_json(cfg.at("scenario"));
    const json& nc = cfg.at("normality");

    simlab::NormalityOptions opt;
    opt.n = nc.value("n", 4000);
    opt.reps = nc.value("reps", 500);
    opt.level = nc.value("level", 0.95);
    opt.reparam_pass = nc.value("reparam", true);
    opt.fit = fitrule_from_json(cfg);
    opt.threads = args.threads >= 0 ? args.threads : cfg.value("threads", 0);
    opt.x0.resize(scenario.p());
    opt.x0[0] = 1.0;
    if (nc.contains("x")) {
        const auto& a = nc.at("x");
        for (std::size_t i = 0; i < a.size(); ++i)
            opt.x0[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    } else {
        opt.x0.tail(scenario.p() - 1).setZero();
    }
    opt.z0.resize(scenario.d());
    if (nc.contains("z")) {
        const auto& a = nc.at("z");
        for (std::size_t i = 0; i < a.size(); ++i)
            opt.z0[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    } else {
        opt.z0.setConstant(0.5);
    }

    const simlab::NormalityReport rep = simlab::run_normality_experiment(scenario, opt);

    std::ostringstream body;
    body << "rep,converged,gamma_hat,se_gamma,zscore,covered90,covered95,"
            "reparam_converged,gamma_hat_rep,log_varsigma_rep,beta1_rep,u1_rep,"
            "covered95_reparam\n";
    for (const auto& r : rep.reps)
        body << r.rep << "," << (r.converged ? 1 : 0) << "," << fd(r.gamma_hat) << ","
             << fd(r.se_gamma) << "," << fd(r.zscore) << "," << (r.covered90 ? 1 : 0) << ","
             << (r.covered95 ? 1 : 0) << "," << (r.reparam_converged ? 1 : 0) << ","
             << fd(r.gamma_hat_rep) << "," << fd(r.log_varsigma_rep) << "," << fd(r.beta1_rep)
             << "," << fd(r.u1_rep) << "," << (r.covered95_reparam ? 1 : 0) << "\n";

    json summary;
    summary["experiment"] = "normality";
    summary["seed"] = scenario.seed;
    summary["gamma_true"] = rep.gamma_true;
    summary["used"] = rep.used;
    summary["dropped"] = rep.dropped;
    summary["mean_z"] = rep.mean_z;
    summary["var_z"] = rep.var_z;
    summary["skew_z"] = rep.skew_z;
    summary["coverage90"] = rep.coverage90;
    summary["coverage95"] = rep.coverage95;
    summary["coverage95_reparam"] = rep.coverage95_reparam;
    summary["corr_gamma_logvarsigma"] = rep.corr_gamma_logvarsigma;
    summary["corr_beta_u"] = rep.corr_beta_u;

    auto band = [&](const char* key, double dlo, double dhi) {
        std::pair<double, double> b{dlo, dhi};
        if (nc.contains(key)) b = {nc.at(key)[0].get<double>(), nc.at(key)[1].get<double>()};
        return b;
    };
    const auto vb = band("variance_band", 0.8, 1.25);
    const auto cb = band("coverage_band", 0.91, 0.99);
    const double corr_limit = nc.value("corr_limit", 0.1);

    std::vector<BandCheck> checks;
    checks.push_back({"standardized gamma_hat variance", rep.var_z, vb.first, vb.second});
    checks.push_back({"95% CI coverage", rep.coverage95, cb.first, cb.second});
    if (opt.reparam_pass) {
        checks.push_back(
            {"|corr(gamma_hat, log varsigma_hat)|", std::abs(rep.corr_gamma_logvarsigma), 0.0,
             corr_limit});
        checks.push_back({"|corr(beta1_hat, u1_hat)| (reparam)", std::abs(rep.corr_beta_u), 0.0,
                          corr_limit});
    }

    const std::string out_csv = !args.out_csv.empty() ? args.out_csv : cfg.value("out_csv", "");
    const std::string out_json = !args.out_json.empty() ? args.out_json : cfg.value("out_json", "");
    return finish_verification(checks, out_csv, body.str(), out_json, std::move(summary));
}

// -------------------------------------------------------------- oracle ---

struct OracleArgs {
    std::string gammas = "-0.2,0,0.5,1";
    Eigen::Index draws = 1000000;
    std::uint64_t seed = kDefaultSeed;
    bool ortho = false;
};

int cmd_oracle(const OracleArgs& args) {
    std::vector<double> gammas;
    std::stringstream ss(args.gammas);
    std::string tok;
    while (std::getline(ss, tok, ',')) gammas.push_back(std::stod(tok));

    std::cout << "family,gamma,entry,closed_form,mc_mean,mc_se\n";
    for (double g : gammas) {
        const Eigen::Matrix2d closed =
            args.ortho ? gpd::fisher_info_ortho(g) : gpd::fisher_info(g);
        const simlab::FisherOracle mc = args.ortho
                                            ? simlab::oracle_fisher_ortho(g, args.draws, args.seed)
                                            : simlab::oracle_fisher(g, args.draws, args.seed);
        const char* fam = args.ortho ? "ortho" : "plain";
        const char* names[3] = {"gamma_gamma", "gamma_scale", "scale_scale"};
        const int idx[3][2] = {{0, 0}, {0, 1}, {1, 1}};
        for (int e = 0; e < 3; ++e)
            std::cout << fam << "," << fd(g) << "," << names[e] << ","
                      << fd(closed(idx[e][0], idx[e][1])) << "," << fd(mc.mean(idx[e][0], idx[e][1]))
                      << "," << fd(mc.se(idx[e][0], idx[e][1])) << "\n";
    }
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Generalized Pareto regression with penalized B-spline additive models"};
    app.require_subcommand(1);

    FitArgs fit;
    auto* cfit = app.add_subcommand("fit", "fit a GPD additive model on peaks over threshold");
    cfit->add_option("--input", fit.input, "input CSV with columns y, x_1.., z_1..")->required();
    cfit->add_option("--out", fit.out, "output model JSON path")->required();
    cfit->add_option("--threshold", fit.threshold,
                     "threshold spec: constant:W | quantile:A | column:NAME")
        ->required();
    cfit->add_option("--xi", fit.xi, "spline degree (default 3)")->check(CLI::PositiveNumber);
    cfit->add_option("--m", fit.m, "penalty derivative order (default 2)")
        ->check(CLI::PositiveNumber);
    cfit->add_option("--knots", fit.knots, "interior knots K (default: ceil(n^{1/(2m+1)}))")
        ->check(CLI::PositiveNumber);
    cfit->add_option("--lambda", fit.lambda, "shape smoothing parameter")
        ->check(CLI::NonNegativeNumber);
    cfit->add_option("--nu", fit.nu, "scale smoothing parameter")->check(CLI::NonNegativeNumber);
    cfit->add_option("--d", fit.d_check, "expected number of smooth covariates (validated)");
    cfit->add_flag("--reparam", fit.reparam, "fit the orthogonal (gamma, varsigma) family");
    cfit->add_flag("--no-center-x", fit.no_center_x, "do not center linear covariates");
    cfit->add_flag("--rescale-z", fit.rescale_z, "min-max rescale smooth covariates into [0,1]");
    cfit->add_option("--select-grid", fit.select_grid,
                     "comma list of candidate lambda/nu values for held-out selection");
    cfit->add_option("--seed", fit.seed, "seed for the selection split (default 12345)");
    cfit->add_option("--max-iter", fit.max_iter, "Newton iteration cap (default 200)")
        ->check(CLI::PositiveNumber);
    cfit->add_option("--grad-tol", fit.grad_tol, "per-observation gradient tolerance")
        ->check(CLI::PositiveNumber);

    PredictArgs pred;
    auto* cpred = app.add_subcommand("predict", "pointwise estimates with confidence intervals");
    cpred->add_option("--model", pred.model, "fitted model JSON")->required();
    cpred->add_option("--input", pred.input, "CSV with columns x_1.., z_1..")->required();
    cpred->add_option("--out", pred.out, "output CSV path")->required();
    cpred->add_option("--level", pred.level, "coverage level (default 0.95)");

    SimulateArgs sim;
    auto* csim = app.add_subcommand("simulate", "draw data from a scenario config");
    csim->add_option("--config", sim.config, "scenario JSON (or experiment config)")->required();
    csim->add_option("--out", sim.out, "output CSV path")->required();
    csim->add_option("-N,--rows", sim.N, "rows to draw")->check(CLI::PositiveNumber);
    csim->add_option("--stream", sim.stream, "replicate stream index (default 1)");
    csim->add_flag("--truth", sim.truth, "append gamma_true,log_scale_true columns");

    VerifyArgs vrate;
    auto* cvrate =
        app.add_subcommand("verify-rate", "Monte Carlo convergence-rate experiment with bands");
    cvrate->add_option("--config", vrate.config, "experiment config JSON")->required();
    cvrate->add_option("--out-csv", vrate.out_csv, "override config out_csv");
    cvrate->add_option("--out-json", vrate.out_json, "override config out_json");
    cvrate->add_option("--threads", vrate.threads, "worker threads (0 = all cores)");

    VerifyArgs vnorm;
    auto* cvnorm = app.add_subcommand("verify-normality",
                                      "local normality, coverage and orthogonality experiment");
    cvnorm->add_option("--config", vnorm.config, "experiment config JSON")->required();
    cvnorm->add_option("--out-csv", vnorm.out_csv, "override config out_csv");
    cvnorm->add_option("--out-json", vnorm.out_json, "override config out_json");
    cvnorm->add_option("--threads", vnorm.threads, "worker threads (0 = all cores)");

    OracleArgs oracle;
    auto* corc = app.add_subcommand("oracle", "Monte Carlo Fisher-information oracle");
    corc->add_option("--gamma", oracle.gammas, "comma list of shape values");
    corc->add_option("--draws", oracle.draws, "draws per value (default 1e6)")
        ->check(CLI::PositiveNumber);
    corc->add_option("--seed", oracle.seed, "seed (default 12345)");
    corc->add_flag("--ortho", oracle.ortho, "use the orthogonal parametrization");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (cfit->parsed()) return cmd_fit(fit);
        if (cpred->parsed()) return cmd_predict(pred);
        if (csim->parsed()) return cmd_simulate(sim);
        if (cvrate->parsed()) return cmd_verify_rate(vrate);
        if (cvnorm->parsed()) return cmd_verify_normality(vnorm);
        if (corc->parsed()) return cmd_oracle(oracle);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace potgam::cli
