#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "skipgp/types.hpp"

namespace skipgp::cli {

struct DatasetSchema {
  std::vector<std::string> features;
  std::string target;
  std::optional<std::string> task;
  bool standardize = false;
};

struct Dataset {
  Matrix x;  // rows are points
  Vector y;  // empty when the target column was optional and absent
  bool has_target = false;
  // Task indices in order of first appearance of each label.
  std::vector<Index> task;
  std::vector<std::string> task_labels;

  Index size() const { return x.rows(); }
  Index num_tasks() const { return static_cast<Index>(task_labels.size()); }
};

// Reads a comma-separated file with a header row. Throws SchemaError for a
// missing column, ParseError for a non-numeric cell and ValidationError for
// NaN or infinite values. With `target_optional` a missing target column
// yields a dataset without targets instead of a SchemaError.
Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema,
                     bool target_optional = false);

// Column names from the header row.
std::vector<std::string> read_csv_header(const std::filesystem::path& path);

// Per-column affine transform recorded at fit time and inverted at
// prediction time. Identity when disabled.
struct Standardization {
  bool enabled = false;
  Vector feature_mean;
  Vector feature_scale;
  double target_mean = 0.0;
  double target_scale = 1.0;

  static Standardization identity(Index num_features);
  static Standardization fit(const Dataset& data);

  Matrix transform_features(const Matrix& x) const;
  Vector transform_target(const Vector& y) const;
  Vector restore_mean(const Vector& mean) const;
  Vector restore_variance(const Vector& variance) const;
};

// 64-bit FNV-1a over the file's bytes.
std::uint64_t fnv1a_file(const std::filesystem::path& path);

}  // namespace skipgp::cli
