#include "potgam/model_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "potgam/csv.hpp"

namespace potgam::model_io {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd mat_from_json(const json& rows) {
    const auto nr = static_cast<Eigen::Index>(rows.size());
    if (nr == 0) return {};
    const auto nc = static_cast<Eigen::Index>(rows[0].size());
    Eigen::MatrixXd m(nr, nc);
    for (Eigen::Index r = 0; r < nr; ++r)
        for (Eigen::Index c = 0; c < nc; ++c)
            m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    return m;
}

json threshold_to_json(const pot::ThresholdSpec& t) {
    json j;
    switch (t.kind) {
        case pot::ThresholdSpec::Kind::Constant:
            j["kind"] = "constant";
            j["value"] = t.value;
            break;
        case pot::ThresholdSpec::Kind::MarginalQuantile:
            j["kind"] = "quantile";
            j["value"] = t.value;
            break;
        case pot::ThresholdSpec::Kind::Column:
            j["kind"] = "column";
            j["column"] = t.column;
            break;
    }
    return j;
}

pot::ThresholdSpec threshold_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return pot::ThresholdSpec::constant(j.at("value").get<double>());
    if (kind == "quantile")
        return pot::ThresholdSpec::marginal_quantile(j.at("value").get<double>());
    if (kind == "column") return pot::ThresholdSpec::column_ref(j.at("column").get<std::string>());
    throw std::runtime_error("model json: unknown threshold kind '" + kind + "'");
}

}  // namespace

std::string to_json(const FittedModel& model) {
    json j;
    j["version"] = 1;

    json m;
    m["p"] = model.spec.p;
    m["d"] = model.spec.d;
    m["K"] = model.spec.grid.K;
    m["xi"] = model.spec.grid.xi;
    m["m"] = model.spec.m;
    m["lambda"] = model.spec.lambda;
    m["nu"] = model.spec.nu;
    m["reparam"] = model.spec.reparam;
    m["center_x"] = model.spec.center_x;
    m["rescale_z"] = model.spec.rescale_z;
    m["knots"] = [&] {
        json a = json::array();
        for (double k : model.spec.grid.knots) a.push_back(k);
        return a;
    }();
    m["x_means"] = vec_to_json(model.transform.x_means);
    if (model.transform.z_range)
        m["z_range"] = mat_to_json(*model.transform.z_range);
    else
        m["z_range"] = nullptr;

    json bases = json::array();
    for (const auto& b : model.bases) {
        json jb;
        jb["phi"] = vec_to_json(b.phi);
        jb["norms"] = vec_to_json(b.norms);
        bases.push_back(std::move(jb));
    }
    m["bases"] = std::move(bases);

    json th;
    th["beta"] = vec_to_json(model.theta.beta);
    th["b"] = vec_to_json(model.theta.b);
    th["u"] = vec_to_json(model.theta.u);
    th["c"] = vec_to_json(model.theta.c);
    m["theta"] = std::move(th);
    j["model"] = std::move(m);

    json tr;
    tr["n"] = model.n;
    tr["N"] = model.N;
    tr["threshold"] = threshold_to_json(model.threshold);
    tr["exceedance_fraction"] =
        model.N > 0 ? static_cast<double>(model.n) / static_cast<double>(model.N) : 0.0;
    j["training"] = std::move(tr);

    json f;
    f["converged"] = model.converged;
    f["iterations"] = model.iterations;
    f["final_grad_norm"] = model.final_grad_norm;
    f["nll"] = model.nll;
    f["warnings"] = model.warnings;
    f["penalized_hessian"] = mat_to_json(model.penalized_hessian);
    j["fit"] = std::move(f);

    return j.dump(2) + "\n";
}

FittedModel from_json(const std::string& text) {
    const json j = json::parse(text);
    if (!j.contains("version"))
        throw std::runtime_error("model json: missing mandatory 'version' field");
    if (j.at("version").get<int>() != 1)
        throw std::runtime_error("model json: unsupported version " +
                                 std::to_string(j.at("version").get<int>()));

    FittedModel model;
    const json& m = j.at("model");
    model.spec.p = m.at("p").get<int>();
    model.spec.d = m.at("d").get<int>();
    model.spec.grid = splines::KnotGrid::uniform(m.at("K").get<int>(), m.at("xi").get<int>());
    model.spec.m = m.at("m").get<int>();
    model.spec.lambda = m.at("lambda").get<double>();
    model.spec.nu = m.at("nu").get<double>();
    model.spec.reparam = m.at("reparam").get<bool>();
    model.spec.center_x = m.at("center_x").get<bool>();
    model.spec.rescale_z = m.at("rescale_z").get<bool>();
    model.spec.validate();

    model.transform.x_means = vec_from_json(m.at("x_means"));
    if (!m.at("z_range").is_null()) model.transform.z_range = mat_from_json(m.at("z_range"));

    for (const auto& jb : m.at("bases")) {
        splines::NormalizedBasis b{model.spec.grid, vec_from_json(jb.at("phi")),
                                   vec_from_json(jb.at("norms"))};
        if (b.phi.size() != model.spec.grid.basis_count() ||
            b.norms.size() != model.spec.grid.basis_count() - 1)
            throw std::runtime_error("model json: basis vector sizes do not match the knot grid");
        model.bases.push_back(std::move(b));
    }
    if (static_cast<int>(model.bases.size()) != model.spec.d)
        throw std::runtime_error("model json: expected one basis per smooth covariate");

    const json& th = m.at("theta");
    model.theta.beta = vec_from_json(th.at("beta"));
    model.theta.b = vec_from_json(th.at("b"));
    model.theta.u = vec_from_json(th.at("u"));
    model.theta.c = vec_from_json(th.at("c"));
    if (model.theta.to_vector().size() != model.spec.dim())
        throw std::runtime_error("model json: theta length does not match the model dimensions");

    const json& tr = j.at("training");
    model.n = tr.at("n").get<Eigen::Index>();
    model.N = tr.at("N").get<Eigen::Index>();
    model.threshold = threshold_from_json(tr.at("threshold"));

    const json& f = j.at("fit");
    model.converged = f.at("converged").get<bool>();
    model.iterations = f.at("iterations").get<int>();
    model.final_grad_norm = f.at("final_grad_norm").get<double>();
    model.nll = f.at("nll").get<double>();
    model.warnings = f.at("warnings").get<std::vector<std::string>>();
    model.penalized_hessian = mat_from_json(f.at("penalized_hessian"));
    return model;
}

void save(const FittedModel& model, const std::string& path) {
    csv::atomic_write_file(path, to_json(model));
}

FittedModel load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return from_json(buf.str());
}

}  // namespace potgam::model_io
