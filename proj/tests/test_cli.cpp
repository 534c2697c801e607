#include <doctest.h>

#include <potgam/csv.hpp>
#include <potgam/design.hpp>
#include <potgam/model_io.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

std::string cli_binary() {
    const char* env = std::getenv("POTGAM_CLI");
    REQUIRE_MESSAGE(env != nullptr, "POTGAM_CLI must point at the built binary");
    return env;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("potgam_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
    const std::string cmd = cli_binary() + " " + args + " >/dev/null 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string run_cli_stdout(const std::string& args, const TempDir& dir) {
    const std::string outfile = dir.file("stdout.txt");
    const std::string cmd = cli_binary() + " " + args + " >" + outfile + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 0);
    std::ifstream f(outfile);
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

void write_scenario_config(const std::string& path) {
    std::ofstream f(path);
    f << R"({
  "scenario": {
    "family": "exact-gpd", "sign_regime": "S1",
    "gamma": {"intercept": 0.3, "x_slopes": [], "smooths": [{"fn": "sin", "a": 0.2}]},
    "log_sigma": {"intercept": 0.0, "x_slopes": [], "smooths": [{"fn": "zero", "a": 0.0}]},
    "threshold": {"kind": "constant", "value": 0.0},
    "seed": 321
  },
  "fit": {"m": 2, "xi": 3},
  "rate": {"n_grid": [250, 500], "reps": 4, "grid_points": 50},
  "normality": {"n": 400, "reps": 6, "x": [1.0], "z": [0.5]}
})";
}

}  // namespace

TEST_CASE("cli: simulate then fit then predict") {
    TempDir dir;
    const std::string cfg = dir.file("scenario.json");
    write_scenario_config(cfg);

    const std::string data = dir.file("data.csv");
    CHECK(run_cli("simulate --config " + cfg + " --out " + data + " -N 1200") == 0);
    const auto table = potgam::csv::read_file(data);
    CHECK(table.rows.size() == 1200);
    CHECK(table.column("y") == 0);
    CHECK(table.column("z_1") >= 0);

    const std::string model = dir.file("model.json");
    CHECK(run_cli("fit --input " + data + " --threshold constant:0 --lambda 0.01 --nu 0.01 " +
                  "--out " + model) == 0);
    const auto fitted = potgam::model_io::load(model);
    CHECK(fitted.converged);
    CHECK(fitted.n == 1200);

    // predicting at training rows reproduces the in-sample shape estimates
    const std::string predin = dir.file("predin.csv");
    {
        std::ofstream f(predin);
        f << "z_1\n";
        for (std::size_t i = 0; i < 5; ++i)
            f << potgam::csv::format_double(table.rows[i][static_cast<std::size_t>(
                     table.column("z_1"))])
              << "\n";
    }
    const std::string predout = dir.file("predout.csv");
    CHECK(run_cli("predict --model " + model + " --input " + predin + " --out " + predout) == 0);
    const auto preds = potgam::csv::read_file(predout);
    REQUIRE(preds.rows.size() == 5);
    Eigen::VectorXd x(1), z(1);
    x << 1.0;
    for (std::size_t i = 0; i < 5; ++i) {
        z << preds.rows[i][0];
        const auto v =
            potgam::design::eval_model(fitted.spec, fitted.bases, fitted.theta, x, z);
        CHECK(preds.rows[i][static_cast<std::size_t>(preds.require_column("gamma_hat"))] ==
              v.gamma);  // same code path, bit-exact
        const double lo =
            preds.rows[i][static_cast<std::size_t>(preds.require_column("gamma_lo"))];
        const double hi =
            preds.rows[i][static_cast<std::size_t>(preds.require_column("gamma_hi"))];
        CHECK(lo <= v.gamma);
        CHECK(v.gamma <= hi);
    }
}

TEST_CASE("cli: fit validation failures") {
    TempDir dir;
    const std::string cfg = dir.file("scenario.json");
    write_scenario_config(cfg);
    const std::string data = dir.file("data.csv");
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + data + " -N 300") == 0);

    SUBCASE("missing y column") {
        const std::string broken = dir.file("broken.csv");
        std::ofstream f(broken);
        f << "resp,z_1\n1.0,0.5\n2.0,0.6\n";
        f.close();
        CHECK(run_cli("fit --input " + broken + " --threshold constant:0 --out " +
                      dir.file("m.json")) == 1);
    }
    SUBCASE("zero knots rejected before any computation") {
        CHECK(run_cli("fit --input " + data + " --threshold constant:0 --knots 0 --out " +
                      dir.file("m.json")) == 1);
        CHECK(!fs::exists(dir.file("m.json")));
    }
    SUBCASE("malformed numeric cell names line and column") {
        const std::string broken = dir.file("bad.csv");
        std::ofstream f(broken);
        f << "y,z_1\n1.0,0.5\noops,0.6\n";
        f.close();
        CHECK(run_cli("fit --input " + broken + " --threshold constant:0 --out " +
                      dir.file("m.json")) == 1);
    }
    SUBCASE("non-convergence exits 2 but still writes the model") {
        const std::string model = dir.file("m2.json");
        CHECK(run_cli("fit --input " + data + " --threshold constant:0 --max-iter 1 --out " +
                      model) == 2);
        const auto m = potgam::model_io::load(model);
        CHECK(!m.converged);
        CHECK(!m.warnings.empty());
    }
}

TEST_CASE("cli: predict validation failures") {
    TempDir dir;
    const std::string cfg = dir.file("scenario.json");
    write_scenario_config(cfg);
    const std::string data = dir.file("data.csv");
    const std::string model = dir.file("model.json");
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + data + " -N 500") == 0);
    REQUIRE(run_cli("fit --input " + data + " --threshold constant:0 --out " + model) == 0);

    SUBCASE("out-of-range z without rescale ranges") {
        const std::string predin = dir.file("p.csv");
        std::ofstream f(predin);
        f << "z_1\n0.5\n1.5\n";
        f.close();
        CHECK(run_cli("predict --model " + model + " --input " + predin + " --out " +
                      dir.file("o.csv")) == 1);
        CHECK(!fs::exists(dir.file("o.csv")));  // no partial output
    }
    SUBCASE("empty prediction table") {
        const std::string predin = dir.file("empty.csv");
        std::ofstream f(predin);
        f << "z_1\n";
        f.close();
        CHECK(run_cli("predict --model " + model + " --input " + predin + " --out " +
                      dir.file("o.csv")) == 1);
    }
    SUBCASE("missing feature column lists the expectation") {
        const std::string predin = dir.file("wrong.csv");
        std::ofstream f(predin);
        f << "w_1\n0.5\n";
        f.close();
        CHECK(run_cli("predict --model " + model + " --input " + predin + " --out " +
                      dir.file("o.csv")) == 1);
    }
}

TEST_CASE("cli: verify-rate determinism across repeats and thread counts") {
    TempDir dir;
    const std::string cfg = dir.file("config.json");
    write_scenario_config(cfg);

    auto run_once = [&](const std::string& tag, int threads) {
        const std::string csv = dir.file("rate_" + tag + ".csv");
        const std::string json = dir.file("rate_" + tag + ".json");
        const int code = run_cli("verify-rate --config " + cfg + " --out-csv " + csv +
                                 " --out-json " + json + " --threads " +
                                 std::to_string(threads));
        CHECK((code == 0 || code == 3));  // tiny runs may miss the band but must not crash
        return slurp(csv) + "" + slurp(json);
    };
    const std::string first = run_once("a", 1);
    const std::string second = run_once("b", 1);
    const std::string parallel = run_once("c", 4);
    CHECK(first == second);
    CHECK(first == parallel);
}

TEST_CASE("cli: verify-normality writes reports and respects seeds") {
    TempDir dir;
    const std::string cfg = dir.file("config.json");
    write_scenario_config(cfg);
    const std::string csv = dir.file("norm.csv");
    const std::string json = dir.file("norm.json");
    const int code = run_cli("verify-normality --config " + cfg + " --out-csv " + csv +
                             " --out-json " + json + " --threads 2");
    CHECK((code == 0 || code == 3));
    const std::string body = slurp(csv);
    CHECK(body.find("zscore") != std::string::npos);
    const std::string summary = slurp(json);
    CHECK(summary.find("coverage95") != std::string::npos);
}

TEST_CASE("cli: oracle prints closed forms with standard errors") {
    TempDir dir;
    const std::string out =
        run_cli_stdout("oracle --gamma 0,0.5 --draws 20000 --seed 5", dir);
    CHECK(out.find("family,gamma,entry,closed_form,mc_mean,mc_se") != std::string::npos);
    CHECK(out.find("gamma_gamma") != std::string::npos);
    const std::string again =
        run_cli_stdout("oracle --gamma 0,0.5 --draws 20000 --seed 5", dir);
    CHECK(out == again);
    const std::string ortho =
        run_cli_stdout("oracle --gamma 0.5 --draws 20000 --seed 5 --ortho", dir);
    CHECK(ortho.find("ortho") != std::string::npos);
}

TEST_CASE("cli: reparam, rescale, selection and column-threshold paths") {
    TempDir dir;
    const std::string cfg = dir.file("scenario.json");
    write_scenario_config(cfg);
    const std::string data = dir.file("data.csv");
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + data + " -N 900") == 0);

    SUBCASE("reparametrized fit converges and records the flag") {
        const std::string model = dir.file("rep.json");
        CHECK(run_cli("fit --input " + data + " --threshold constant:0 --reparam --out " +
                      model) == 0);
        CHECK(potgam::model_io::load(model).spec.reparam);
    }
    SUBCASE("out-of-range z needs the rescale flag") {
        const std::string shifted = dir.file("shifted.csv");
        {
            const auto t = potgam::csv::read_file(data);
            std::ofstream f(shifted);
            f << "y,z_1\n";
            const auto zc = static_cast<std::size_t>(t.column("z_1"));
            for (const auto& row : t.rows)
                f << potgam::csv::format_double(row[0]) << ","
                  << potgam::csv::format_double(row[zc] * 3.0 - 1.0) << "\n";
        }
        CHECK(run_cli("fit --input " + shifted + " --threshold constant:0 --out " +
                      dir.file("m.json")) == 1);
        const std::string model = dir.file("m_rescaled.json");
        CHECK(run_cli("fit --input " + shifted + " --threshold constant:0 --rescale-z --out " +
                      model) == 0);
        const auto m = potgam::model_io::load(model);
        REQUIRE(m.transform.z_range.has_value());
        // prediction accepts raw-scale z through the stored ranges
        const std::string predin = dir.file("p.csv");
        {
            std::ofstream f(predin);
            f << "z_1\n1.7\n-0.9\n";
        }
        CHECK(run_cli("predict --model " + model + " --input " + predin + " --out " +
                      dir.file("po.csv")) == 0);
    }
    SUBCASE("held-out smoothing selection runs") {
        CHECK(run_cli("fit --input " + data + " --threshold constant:0 "
                      "--select-grid 0.01,1 --seed 9 --out " +
                      dir.file("sel.json")) == 0);
    }
    SUBCASE("per-row threshold column") {
        const std::string withthr = dir.file("thr.csv");
        {
            const auto t = potgam::csv::read_file(data);
            std::ofstream f(withthr);
            f << "y,z_1,thr\n";
            const auto zc = static_cast<std::size_t>(t.column("z_1"));
            for (const auto& row : t.rows)
                f << potgam::csv::format_double(row[0]) << ","
                  << potgam::csv::format_double(row[zc]) << ",0.4\n";
        }
        CHECK(run_cli("fit --input " + withthr + " --threshold column:thr --out " +
                      dir.file("mc.json")) == 0);
    }
    SUBCASE("--d cross-check") {
        CHECK(run_cli("fit --input " + data + " --threshold constant:0 --d 3 --out " +
                      dir.file("bad.json")) == 1);
    }
}

TEST_CASE("cli: unknown subcommand and missing flags error out") {
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("fit") == 1);
    CHECK(run_cli("--help") == 0);
}
