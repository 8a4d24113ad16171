#include "ergolab/config.hpp"

#include <fstream>

namespace ergolab {

using nlohmann::json;

const std::vector<std::string> kExperimentNames = {
    "spectrum", "gap-scan",   "pinch-scan", "expansion", "nonconc",  "ldp",
    "margulis", "dimension",  "multislice", "linearize", "equidist", "pipeline"};

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw std::invalid_argument("config: " + where + ": " + what);
}

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& where) {
    if (!obj.is_object()) fail(where, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const auto& a : allowed)
            if (key == a) ok = true;
        if (!ok) fail(where, "unknown key '" + key + "'");
    }
}

Eigen::MatrixXi parse_int_matrix(const json& rows, const std::string& where) {
    if (!rows.is_array() || rows.empty()) fail(where, "expected a matrix (array of rows)");
    int n = static_cast<int>(rows.size());
    int m = static_cast<int>(rows[0].size());
    Eigen::MatrixXi out(n, m);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != m)
            fail(where, "ragged matrix");
        for (int j = 0; j < m; ++j) {
            const auto& e = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (!e.is_number_integer()) fail(where, "matrix entries must be integers");
            out(i, j) = e.get<int>();
        }
    }
    return out;
}

Eigen::MatrixXd parse_real_matrix(const json& rows, const std::string& where) {
    if (!rows.is_array() || rows.empty()) fail(where, "expected a matrix (array of rows)");
    int n = static_cast<int>(rows.size());
    int m = static_cast<int>(rows[0].size());
    Eigen::MatrixXd out(n, m);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != m)
            fail(where, "ragged matrix");
        for (int j = 0; j < m; ++j)
            out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                            .get<double>();
    }
    return out;
}

Eigen::VectorXd parse_vector(const json& arr, const std::string& where) {
    if (!arr.is_array() || arr.empty()) fail(where, "expected a nonempty array");
    Eigen::VectorXd out(static_cast<long>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) out(static_cast<long>(i)) = arr[i].get<double>();
    return out;
}

Eigen::VectorXi parse_int_vector(const json& arr, const std::string& where) {
    if (!arr.is_array() || arr.empty()) fail(where, "expected a nonempty array");
    Eigen::VectorXi out(static_cast<long>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number_integer()) fail(where, "expected integers");
        out(static_cast<long>(i)) = arr[i].get<int>();
    }
    return out;
}

Generator parse_generator(const json& g, const std::string& where) {
    if (!g.is_object() || !g.contains("type")) fail(where, "generator needs a 'type'");
    std::string type = g.at("type").get<std::string>();
    if (type == "toral_linear") {
        check_keys(g, {"type", "matrix"}, where);
        return ToralLinear{parse_int_matrix(g.at("matrix"), where)};
    }
    if (type == "toral_trig") {
        check_keys(g, {"type", "matrix", "amplitude", "modes"}, where);
        ToralTrigPerturb tp;
        tp.base.matrix = parse_int_matrix(g.at("matrix"), where);
        tp.amplitude = g.at("amplitude").get<double>();
        for (const auto& m : g.at("modes")) {
            check_keys(m, {"freq", "phase", "direction"}, where + ".modes");
            TrigMode mode;
            mode.freq = parse_int_vector(m.at("freq"), where);
            mode.phase = m.at("phase").get<double>();
            mode.direction = parse_vector(m.at("direction"), where);
            tp.modes.push_back(mode);
        }
        return tp;
    }
    if (type == "sphere_rotation") {
        check_keys(g, {"type", "matrix"}, where);
        return SphereRotation{parse_real_matrix(g.at("matrix"), where)};
    }
    if (type == "sphere_trig") {
        check_keys(g, {"type", "matrix", "amplitude", "field"}, where);
        SphereTrigPerturb sp;
        sp.base.matrix = parse_real_matrix(g.at("matrix"), where);
        sp.amplitude = g.at("amplitude").get<double>();
        sp.vectorfield_id = g.at("field").get<int>();
        return sp;
    }
    fail(where, "unknown generator type '" + type + "'");
}

}  // namespace

GeneratorMeasure parse_generators(const json& gens, const json& weights) {
    if (!gens.is_array() || gens.empty())
        fail("generators", "expected a nonempty array");
    GeneratorMeasure mu;
    for (std::size_t i = 0; i < gens.size(); ++i)
        mu.gens.push_back(parse_generator(gens[i], "generators[" + std::to_string(i) + "]"));
    if (!weights.is_array() || weights.size() != gens.size())
        fail("weights", "must match the generator count");
    for (const auto& w : weights) mu.weights.push_back(w.get<double>());
    mu.validate();
    return mu;
}

ManifoldPoint parse_point(const ManifoldKind& kind, const json& coords) {
    Eigen::VectorXd v = parse_vector(coords, "point");
    if (kind.family == ManifoldFamily::Torus) {
        if (v.size() != kind.d) fail("point", "torus point needs d coordinates");
        return ManifoldPoint::torus(v);
    }
    if (v.size() != kind.d + 1) fail("point", "sphere point needs d+1 coordinates");
    return ManifoldPoint::sphere(v / v.norm());
}

ExperimentConfig parse_config(const json& doc) {
    check_keys(doc,
               {"description", "manifold", "generators", "weights", "experiment", "params",
                "seed", "threads", "out"},
               "config");
    ExperimentConfig cfg;
    cfg.raw = doc;
    if (doc.contains("description")) cfg.description = doc.at("description").get<std::string>();

    if (!doc.contains("manifold")) fail("config", "missing 'manifold'");
    check_keys(doc.at("manifold"), {"kind", "d"}, "manifold");
    std::string kind = doc.at("manifold").at("kind").get<std::string>();
    int d = doc.at("manifold").at("d").get<int>();
    if (kind == "torus")
        cfg.kind = ManifoldKind::torus(d);
    else if (kind == "sphere")
        cfg.kind = ManifoldKind::sphere(d);
    else
        fail("manifold", "kind must be 'torus' or 'sphere'");

    if (!doc.contains("generators") || !doc.contains("weights"))
        fail("config", "missing 'generators'/'weights'");
    cfg.mu = parse_generators(doc.at("generators"), doc.at("weights"));
    if (!(cfg.mu.manifold() == cfg.kind))
        fail("config", "generators do not live on the declared manifold");

    if (!doc.contains("experiment")) fail("config", "missing 'experiment'");
    cfg.experiment = doc.at("experiment").get<std::string>();
    bool known = false;
    for (const auto& e : kExperimentNames)
        if (e == cfg.experiment) known = true;
    if (!known) fail("experiment", "unknown experiment '" + cfg.experiment + "'");

    cfg.params = doc.contains("params") ? doc.at("params") : json::object();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("threads")) cfg.threads = doc.at("threads").get<int>();
    if (doc.contains("out")) cfg.out_dir = doc.at("out").get<std::string>();
    if (cfg.threads < 1) fail("threads", "must be >= 1");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config: " + std::string(e.what()));
    }
    return parse_config(doc);
}

}  // namespace ergolab
