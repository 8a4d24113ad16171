#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "ergolab/experiments.hpp"

namespace {

namespace fs = std::filesystem;

std::string config_dir() {
    return ERGOLAB_CONFIG_DIR;
}

int list_examples() {
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& entry : fs::directory_iterator(config_dir())) {
        if (entry.path().extension() != ".json") continue;
        std::string desc;
        try {
            auto cfg = ergolab::load_config(entry.path().string());
            desc = cfg.description.empty() ? cfg.experiment : cfg.description;
        } catch (const std::exception& e) {
            desc = std::string("(unparseable: ") + e.what() + ")";
        }
        entries.emplace_back(entry.path().stem().string(), desc);
    }
    std::sort(entries.begin(), entries.end());
    for (const auto& [name, desc] : entries)
        std::cout << name << "  -  " << desc << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ergolab: random diffeomorphism walk laboratory"};
    app.require_subcommand(1);

    std::string config_path, example_name, out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    bool strict = false;
    bool have_seed = false, have_threads = false;

    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("--config", config_path, "path to the experiment config");
    run->add_option("--example", example_name, "name of a canned config (see list-examples)");
    run->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
        have_seed = true;
    });
    run->add_option("--threads", threads, "override the thread count")
        ->each([&](const std::string&) { have_threads = true; });
    run->add_option("--out", out_dir, "output directory for report.json and CSVs");
    run->add_flag("--strict", strict, "exit 1 when any verdict fails");

    app.add_subcommand("list-examples", "list the canned experiment configs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (app.got_subcommand("list-examples")) return list_examples();

    try {
        if (config_path.empty() && example_name.empty()) {
            std::cerr << "error: one of --config/--example is required\n";
            return 2;
        }
        if (config_path.empty())
            config_path = config_dir() + "/" + example_name + ".json";
        ergolab::ExperimentConfig cfg = ergolab::load_config(config_path);
        if (have_seed) cfg.seed = seed;
        if (have_threads) cfg.threads = threads;
        if (const char* env = std::getenv("ERGOLAB_THREADS"); env && !have_threads)
            cfg.threads = std::max(1, std::atoi(env));
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        return ergolab::run_config(cfg, strict);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
