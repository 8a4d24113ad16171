#pragma once

#include <json.hpp>

#include <string>

#include "ergolab/walk.hpp"

namespace ergolab {

inline constexpr const char* kVersion = "0.3.0";

// Declarative experiment description. Parsing is strict: unknown keys are
// rejected anywhere in the document so a typo cannot silently change an
// experiment.
struct ExperimentConfig {
    std::string description;
    ManifoldKind kind = ManifoldKind::torus(2);
    GeneratorMeasure mu;
    std::string experiment;
    nlohmann::json params;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = ".";
    nlohmann::json raw;  // resolved echo embedded in every report
};

// Throws std::invalid_argument with a path-qualified message on any schema
// violation.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

GeneratorMeasure parse_generators(const nlohmann::json& gens, const nlohmann::json& weights);
ManifoldPoint parse_point(const ManifoldKind& kind, const nlohmann::json& coords);

extern const std::vector<std::string> kExperimentNames;

}  // namespace ergolab
