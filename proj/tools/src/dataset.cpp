#include "skipgp/cli/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "skipgp/cli/errors.hpp"

namespace skipgp::cli {
namespace {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  std::string out(text.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(const std::string& cell, double& value) {
  if (cell.empty()) return false;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc() && ptr == end;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema,
                     bool target_optional) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset: " + path.string());

  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("dataset " + path.string() + " has no header row", "");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_row(line);
  std::map<std::string, std::size_t> column_of;
  for (std::size_t c = 0; c < header.size(); ++c) column_of.emplace(header[c], c);

  const auto locate = [&](const std::string& name) {
    const auto it = column_of.find(name);
    if (it == column_of.end()) {
      throw SchemaError("dataset " + path.string() + " has no column '" + name + "'", name);
    }
    return it->second;
  };
  if (schema.features.empty()) throw ConfigError("dataset schema lists no feature columns");
  std::vector<std::size_t> feature_cols;
  for (const auto& name : schema.features) feature_cols.push_back(locate(name));
  std::optional<std::size_t> target_col;
  if (!target_optional || column_of.count(schema.target)) target_col = locate(schema.target);
  std::optional<std::size_t> task_col;
  if (schema.task) task_col = locate(*schema.task);

  std::vector<std::vector<double>> features;
  std::vector<double> targets;
  Dataset data;
  std::map<std::string, Index> task_index;
  std::int64_t line_number = 1;
  std::int64_t row = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_row(line);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + " (line " +
                           std::to_string(line_number) + ") has " +
                           std::to_string(cells.size()) + " fields, header has " +
                           std::to_string(header.size()),
                       row, line_number, "");
    }
    const auto numeric = [&](std::size_t col) {
      const std::string& name = header[col];
      if (col >= cells.size()) {
        throw ParseError("row " + std::to_string(row) + " (line " +
                             std::to_string(line_number) + ") has no value for column '" +
                             name + "'",
                         row, line_number, name);
      }
      double value = 0.0;
      if (!parse_double(cells[col], value)) {
        throw ParseError("non-numeric value '" + cells[col] + "' at row " +
                             std::to_string(row) + " (line " + std::to_string(line_number) +
                             "), column '" + name + "'",
                         row, line_number, name);
      }
      if (!std::isfinite(value)) {
        throw ValidationError("non-finite value at row " + std::to_string(row) +
                                  ", column '" + name + "'",
                              row, name);
      }
      return value;
    };
    std::vector<double> point;
    point.reserve(feature_cols.size());
    for (std::size_t col : feature_cols) point.push_back(numeric(col));
    features.push_back(std::move(point));
    if (target_col) targets.push_back(numeric(*target_col));
    if (task_col) {
      if (*task_col >= cells.size() || cells[*task_col].empty()) {
        throw ParseError("missing task label at row " + std::to_string(row), row,
                         line_number, header[*task_col]);
      }
      const auto [it, inserted] =
          task_index.emplace(cells[*task_col], static_cast<Index>(data.task_labels.size()));
      if (inserted) data.task_labels.push_back(cells[*task_col]);
      data.task.push_back(it->second);
    }
  }

  const auto n = static_cast<Index>(features.size());
  const auto d = static_cast<Index>(feature_cols.size());
  data.x.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) data.x(i, j) = features[i][j];
  }
  data.has_target = target_col.has_value();
  if (data.has_target) data.y = Eigen::Map<const Vector>(targets.data(), n);
  return data;
}

std::vector<std::string> read_csv_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset: " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("dataset " + path.string() + " has no header row", "");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  return split_row(line);
}

Standardization Standardization::identity(Index num_features) {
  Standardization t;
  t.feature_mean = Vector::Zero(num_features);
  t.feature_scale = Vector::Ones(num_features);
  return t;
}

Standardization Standardization::fit(const Dataset& data) {
  Standardization t = identity(data.x.cols());
  t.enabled = true;
  const auto scale_of = [](double variance) {
    return variance > 0.0 ? std::sqrt(variance) : 1.0;
  };
  if (data.size() == 0) return t;
  t.feature_mean = data.x.colwise().mean().transpose();
  for (Index j = 0; j < data.x.cols(); ++j) {
    t.feature_scale[j] =
        scale_of((data.x.col(j).array() - t.feature_mean[j]).square().mean());
  }
  if (data.has_target) {
    t.target_mean = data.y.mean();
    t.target_scale = scale_of((data.y.array() - t.target_mean).square().mean());
  }
  return t;
}

Matrix Standardization::transform_features(const Matrix& x) const {
  if (!enabled) return x;
  require_size(x.cols(), feature_mean.size(), "standardized feature count");
  return (x.rowwise() - feature_mean.transpose()).array().rowwise() /
         feature_scale.transpose().array();
}

Vector Standardization::transform_target(const Vector& y) const {
  if (!enabled) return y;
  return (y.array() - target_mean) / target_scale;
}

Vector Standardization::restore_mean(const Vector& mean) const {
  if (!enabled) return mean;
  return mean.array() * target_scale + target_mean;
}

Vector Standardization::restore_variance(const Vector& variance) const {
  if (!enabled) return variance;
  return variance * (target_scale * target_scale);
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buffer[1 << 14];
  while (in.read(buffer, sizeof buffer) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

}  // namespace skipgp::cli
