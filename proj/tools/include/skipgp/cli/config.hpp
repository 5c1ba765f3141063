#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "skipgp/cli/dataset.hpp"
#include "skipgp/gp.hpp"
#include "skipgp/kernels.hpp"

namespace skipgp::cli {

struct DataSource {
  std::filesystem::path path;
  DatasetSchema schema;
};

// Configuration of a `fit` run. Relative paths in the JSON document are
// resolved against the directory holding it. Precedence, lowest first:
// built-in defaults, the config document, command-line flags.
struct RunConfig {
  DataSource train;
  // Held-out evaluation data; when absent a seeded random split of the
  // training file with `test_fraction` is used.
  std::optional<DataSource> test;
  double test_fraction = 0.2;
  KernelFamily family = KernelFamily::kRbf;
  bool ard = true;
  InferenceMode mode = InferenceMode::kExactDense;
  SkipSettings skip;
  OptimizerSettings optimizer;
  // Mandatory: there is no wall-clock randomness anywhere.
  std::optional<std::uint64_t> seed;
  std::filesystem::path output_dir = "out";
};

RunConfig parse_run_config(const nlohmann::json& document,
                           const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Throws ConfigError when a referenced path does not exist, the seed is
// missing or a numeric setting is out of range.
void validate(const RunConfig& config);

// Fully resolved configuration, echoed into reports.
nlohmann::json to_json(const RunConfig& config);

nlohmann::json to_json(const DatasetSchema& schema);
DatasetSchema schema_from_json(const nlohmann::json& node);

}  // namespace skipgp::cli
