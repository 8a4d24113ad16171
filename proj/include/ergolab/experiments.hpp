#pragma once

#include "ergolab/config.hpp"

namespace ergolab {

// Runs one experiment and returns the full report document. Pure apart
// from RNG derived from cfg.seed; all nondeterminism sits in the seeded
// streams, so the report (minus the "runtime" block) is byte-stable across
// thread counts.
nlohmann::json run_experiment(const ExperimentConfig& cfg);

// run_experiment + report.json and experiment CSVs under cfg.out_dir.
// Returns the process exit code: 0 pass/inconclusive, 1 any failed verdict
// when strict, 2 usage errors (thrown as std::invalid_argument upstream).
int run_config(const ExperimentConfig& cfg, bool strict);

// Serializes the verdict triple used across reports.
nlohmann::json verdict_json(const std::string& quantity, double value, double stderr_,
                            double threshold, const std::string& verdict);

}  // namespace ergolab
