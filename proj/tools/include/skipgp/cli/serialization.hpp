#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skipgp/cli/config.hpp"
#include "skipgp/cli/dataset.hpp"
#include "skipgp/gp.hpp"
#include "skipgp/kernels.hpp"

namespace skipgp::cli {

nlohmann::json to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& node);

nlohmann::json to_json(const SkipSettings& settings);
SkipSettings skip_settings_from_json(const nlohmann::json& node);

nlohmann::json to_json(const Standardization& transform);
Standardization standardization_from_json(const nlohmann::json& node);

// Everything `predict` needs to rebuild the posterior: the fitted model, the
// training data location and schema, the checksum of that file at fit time
// and the standardization applied to it.
struct HoldoutSplit {
  double test_fraction = 0.0;
  std::uint64_t seed = 0;
};

// Rows of an n-row file kept for training and held out for testing by a
// seeded shuffle. Both lists are sorted.
struct SplitRows {
  std::vector<Index> train;
  std::vector<Index> test;
};
SplitRows split_rows(Index n, const HoldoutSplit& split);

struct ModelArtifact {
  GpModel model;
  DataSource train;
  // Set when the model was trained on part of the training file.
  std::optional<HoldoutSplit> split;
  std::uint64_t train_checksum = 0;
  Standardization transform;
};

nlohmann::json to_json(const ModelArtifact& artifact);
ModelArtifact model_artifact_from_json(const nlohmann::json& node,
                                       const std::filesystem::path& base_dir);

// Throws MissingModelError when the file does not exist and ModelError when
// it cannot be interpreted.
ModelArtifact load_model_artifact(const std::filesystem::path& path);

// Hex rendering of a 64-bit checksum.
std::string checksum_hex(std::uint64_t value);

// Writes `contents` to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace skipgp::cli
