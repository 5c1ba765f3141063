#include "skipgp/cli/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <unistd.h>

#include "skipgp/cli/errors.hpp"
#include "skipgp/random.hpp"
#include "skipgp/version.hpp"

namespace skipgp::cli {
namespace {

using nlohmann::json;

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const KernelSpec& spec) {
  json node;
  node["family"] = to_string(spec.family);
  node["lengthscales"] = to_std(spec.lengthscales);
  node["outputscale"] = spec.outputscale;
  node["active_dimension"] =
      spec.active_dimension ? json(*spec.active_dimension) : json(nullptr);
  return node;
}

KernelSpec kernel_from_json(const nlohmann::json& node) {
  KernelSpec spec;
  spec.family = kernel_family_from_string(node.at("family").get<std::string>());
  spec.lengthscales = to_eigen(node.at("lengthscales").get<std::vector<double>>());
  spec.outputscale = node.at("outputscale").get<double>();
  if (node.contains("active_dimension") && !node.at("active_dimension").is_null()) {
    spec.active_dimension = node.at("active_dimension").get<Index>();
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const SkipSettings& settings) {
  return {{"grid_size", settings.grid_size},
          {"rank", settings.rank},
          {"num_probes", settings.num_probes},
          {"probe_seed", settings.probe_seed},
          {"cg_tolerance", settings.cg_tolerance},
          {"max_cg_iterations", settings.max_cg_iterations},
          {"rebuild_grid", settings.rebuild_grid}};
}

SkipSettings skip_settings_from_json(const nlohmann::json& node) {
  SkipSettings s;
  s.grid_size = node.at("grid_size").get<Index>();
  s.rank = node.at("rank").get<Index>();
  s.num_probes = node.at("num_probes").get<Index>();
  s.probe_seed = node.at("probe_seed").get<std::uint64_t>();
  s.cg_tolerance = node.at("cg_tolerance").get<double>();
  s.max_cg_iterations = node.at("max_cg_iterations").get<Index>();
  s.rebuild_grid = node.at("rebuild_grid").get<bool>();
  return s;
}

nlohmann::json to_json(const Standardization& t) {
  return {{"enabled", t.enabled},
          {"feature_mean", to_std(t.feature_mean)},
          {"feature_scale", to_std(t.feature_scale)},
          {"target_mean", t.target_mean},
          {"target_scale", t.target_scale}};
}

Standardization standardization_from_json(const nlohmann::json& node) {
  Standardization t;
  t.enabled = node.at("enabled").get<bool>();
  t.feature_mean = to_eigen(node.at("feature_mean").get<std::vector<double>>());
  t.feature_scale = to_eigen(node.at("feature_scale").get<std::vector<double>>());
  t.target_mean = node.at("target_mean").get<double>();
  t.target_scale = node.at("target_scale").get<double>();
  return t;
}

SplitRows split_rows(Index n, const HoldoutSplit& split) {
  constexpr std::uint64_t kSplitStream = 0x5b1;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(derive_seed(split.seed, kSplitStream));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const auto n_test = static_cast<std::ptrdiff_t>(
      std::llround(split.test_fraction * static_cast<double>(n)));
  SplitRows rows;
  rows.test.assign(order.begin(), order.begin() + n_test);
  rows.train.assign(order.begin() + n_test, order.end());
  std::sort(rows.test.begin(), rows.test.end());
  std::sort(rows.train.begin(), rows.train.end());
  return rows;
}

std::string checksum_hex(std::uint64_t value) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << value;
  return out.str();
}

nlohmann::json to_json(const ModelArtifact& artifact) {
  const GpModel& m = artifact.model;
  json node;
  node["format"] = "skipgp-model";
  node["library_version"] = kVersion;
  node["kernel"] = to_json(m.kernel);
  node["log_hyperparameters"] = to_std(pack_log_hyperparameters(m));
  node["noise_variance"] = m.noise_variance;
  node["constant_mean"] = m.constant_mean;
  node["inference"] = to_json(m.skip);
  node["inference"]["mode"] = to_string(m.mode);
  node["training_data"] = {{"path", artifact.train.path.string()},
                           {"schema", to_json(artifact.train.schema)},
                           {"checksum_fnv1a64", checksum_hex(artifact.train_checksum)}};
  if (artifact.split) {
    node["training_data"]["split"] = {{"test_fraction", artifact.split->test_fraction},
                                      {"seed", artifact.split->seed}};
  }
  node["standardization"] = to_json(artifact.transform);
  return node;
}

ModelArtifact model_artifact_from_json(const nlohmann::json& node,
                                       const std::filesystem::path& base_dir) {
  try {
    if (node.value("format", "") != "skipgp-model") {
      throw ModelError("not a model artifact (missing format tag)");
    }
    ModelArtifact a;
    a.model.kernel = kernel_from_json(node.at("kernel"));
    a.model.noise_variance = node.at("noise_variance").get<double>();
    a.model.constant_mean = node.at("constant_mean").get<double>();
    a.model.skip = skip_settings_from_json(node.at("inference"));
    a.model.mode = inference_mode_from_string(node.at("inference").at("mode").get<std::string>());
    const json& train = node.at("training_data");
    std::filesystem::path path = train.at("path").get<std::string>();
    a.train.path = path.is_absolute() ? path : (base_dir / path).lexically_normal();
    a.train.schema = schema_from_json(train.at("schema"));
    a.train_checksum =
        std::stoull(train.at("checksum_fnv1a64").get<std::string>(), nullptr, 16);
    if (train.contains("split") && !train.at("split").is_null()) {
      a.split = HoldoutSplit{train.at("split").at("test_fraction").get<double>(),
                             train.at("split").at("seed").get<std::uint64_t>()};
    }
    a.transform = standardization_from_json(node.at("standardization"));
    if (!(a.model.noise_variance > 0.0)) throw ModelError("model noise must be positive");
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed model artifact: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelError(std::string("malformed model artifact: ") + e.what());
  } catch (const ConfigError& e) {
    throw ModelError(std::string("malformed model artifact: ") + e.what());
  } catch (const skipgp::Error& e) {
    throw ModelError(std::string("invalid model artifact: ") + e.what());
  }
}

ModelArtifact load_model_artifact(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw MissingModelError(path.string());
  std::ifstream in(path);
  if (!in) throw MissingModelError(path.string());
  json node;
  try {
    node = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelError("model artifact " + path.string() + " is not valid JSON: " + e.what());
  }
  return model_artifact_from_json(node, path.parent_path());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  std::filesystem::path temp = path;
  temp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + temp.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("failed writing " + temp.string());
  }
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::filesystem::remove(temp, ec);
    throw IoError("cannot move " + temp.string() + " to " + path.string());
  }
}

}  // namespace skipgp::cli
