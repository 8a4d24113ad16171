#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "ergolab/experiments.hpp"

using namespace ergolab;
using nlohmann::json;

namespace {

json minimal_config() {
    return json::parse(R"({
      "manifold": {"kind": "torus", "d": 2},
      "generators": [{"type": "toral_linear", "matrix": [[2,1],[1,1]]}],
      "weights": [1.0],
      "experiment": "spectrum",
      "params": {"mode": "cartan", "x": [0.3, 0.7], "word_lengths": [1, 4]},
      "seed": 7
    })");
}

// Reports must agree byte for byte once the runtime block is dropped.
std::string canonical(json report) {
    report.erase("runtime");
    return report.dump();
}

}  // namespace

TEST_CASE("config parsing accepts the minimal document") {
    auto cfg = parse_config(minimal_config());
    CHECK(cfg.experiment == "spectrum");
    CHECK(cfg.seed == 7);
    CHECK(cfg.mu.gens.size() == 1);
}

TEST_CASE("unknown keys are rejected everywhere") {
    auto doc = minimal_config();
    doc["surprise"] = 1;
    CHECK_THROWS_AS(parse_config(doc), std::invalid_argument);

    auto doc2 = minimal_config();
    doc2["manifold"]["radius"] = 2.0;
    CHECK_THROWS_AS(parse_config(doc2), std::invalid_argument);

    auto doc3 = minimal_config();
    doc3["generators"][0]["extra"] = true;
    CHECK_THROWS_AS(parse_config(doc3), std::invalid_argument);
}

TEST_CASE("schema violations carry a usable message") {
    auto doc = minimal_config();
    doc["experiment"] = "warp-drive";
    try {
        parse_config(doc);
        CHECK(false);
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("warp-drive") != std::string::npos);
    }
    auto doc2 = minimal_config();
    doc2["weights"] = {0.5, 0.5};
    CHECK_THROWS_AS(parse_config(doc2), std::invalid_argument);
}

TEST_CASE("missing config file is a usage error") {
    CHECK_THROWS_AS(load_config("/nonexistent/missing.json"), std::invalid_argument);
}

TEST_CASE("reports are byte-identical across thread counts") {
    for (const char* name :
         {"cat_spectrum", "gap_verdicts", "fourier_catpair", "dimension_oracles"}) {
        auto cfg = load_config(std::string(ERGOLAB_CONFIG_DIR) + "/" + name + ".json");
        cfg.threads = 1;
        json r1 = run_experiment(cfg);
        cfg.threads = 8;
        json r8 = run_experiment(cfg);
        REQUIRE(canonical(r1) == canonical(r8));
    }
}

TEST_CASE("verdict failure drives the strict exit code") {
    auto doc = minimal_config();
    doc["params"]["checks"] = {{"lambda_top_over_n", 0.5}, {"tol", 1e-9}};
    doc["out"] = "/tmp/ergolab_test_fail";
    auto cfg = parse_config(doc);
    CHECK(run_config(cfg, /*strict=*/true) == 1);
    CHECK(run_config(cfg, /*strict=*/false) == 0);
    // report carries the failing verdict either way
    std::ifstream in("/tmp/ergolab_test_fail/report.json");
    json rep = json::parse(in);
    REQUIRE(rep.at("verdicts").size() == 2);
    CHECK(rep.at("verdicts")[0].at("verdict") == "fails");
    CHECK(rep.at("config").at("seed") == 7);
    CHECK(rep.contains("version"));
}

TEST_CASE("cli binary end to end") {
    std::string bin = std::string(ERGOLAB_BIN_DIR) + "/ergolab";
    CHECK(std::system((bin + " list-examples > /tmp/ergolab_list1.txt").c_str()) == 0);
    CHECK(std::system((bin + " list-examples > /tmp/ergolab_list2.txt").c_str()) == 0);
    std::ifstream a("/tmp/ergolab_list1.txt"), b("/tmp/ergolab_list2.txt");
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    int lines = static_cast<int>(std::count(sa.begin(), sa.end(), '\n'));
    CHECK(lines >= 10);

    int missing = std::system((bin + " run --config /nonexistent/missing.json 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(missing) == 2);

    int ok = std::system(
        (bin + " run --example identity --out /tmp/ergolab_cli_identity --strict >/dev/null").c_str());
    CHECK(WEXITSTATUS(ok) == 0);
    std::ifstream rep("/tmp/ergolab_cli_identity/report.json");
    CHECK(rep.good());
}

TEST_CASE("csv outputs carry the documented schemas") {
    auto cfg = load_config(std::string(ERGOLAB_CONFIG_DIR) + "/multislice_sweep.json");
    cfg.out_dir = "/tmp/ergolab_test_csv";
    // shrink for test speed
    cfg.params["grid_n"] = 64;
    run_config(cfg, false);
    std::ifstream csv("/tmp/ergolab_test_csv/multislice.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "theta_id,trash_fraction,pass");
}

TEST_CASE("pipeline experiment composes the three phases") {
    auto cfg = load_config(std::string(ERGOLAB_CONFIG_DIR) + "/pipeline_sl2z.json");
    cfg.threads = 2;
    json rep = run_experiment(cfg);
    REQUIRE(rep.at("results").contains("phase1"));
    REQUIRE(rep.at("results").contains("phase2"));
    REQUIRE(rep.at("results").contains("phase3"));
    for (const auto& v : rep.at("verdicts"))
        CHECK(v.at("verdict").get<std::string>() == "holds");
    CHECK(rep.at("results").at("phase2").at("alpha_achieved").get<double>() >
          rep.at("results").at("phase2").at("alpha_before").get<double>());
}
