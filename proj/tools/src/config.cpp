#include "skipgp/cli/config.hpp"

#include <fstream>
#include <set>

#include "skipgp/cli/errors.hpp"

namespace skipgp::cli {
namespace {

using nlohmann::json;

void reject_unknown(const json& node, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : node.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& node, const char* key, T& out) {
  if (node.contains(key) && !node.at(key).is_null()) out = node.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

DataSource source_from_json(const json& node, const std::filesystem::path& base,
                            const DatasetSchema* inherited, const std::string& where) {
  if (!node.is_object()) throw ConfigError(where + " must be an object");
  reject_unknown(node, {"path", "features", "target", "task", "standardize"}, where);
  if (!node.contains("path")) throw ConfigError(where + ".path is required");
  DataSource source;
  source.path = resolve(base, node.at("path").get<std::string>());
  if (inherited) source.schema = *inherited;
  if (node.contains("features") || !inherited) {
    source.schema = schema_from_json(node);
  }
  return source;
}

}  // namespace

DatasetSchema schema_from_json(const nlohmann::json& node) {
  DatasetSchema schema;
  if (!node.contains("features") || !node.at("features").is_array() ||
      node.at("features").empty()) {
    throw ConfigError("dataset schema needs a nonempty 'features' list");
  }
  schema.features = node.at("features").get<std::vector<std::string>>();
  schema.target = "y";
  read(node, "target", schema.target);
  if (node.contains("task") && !node.at("task").is_null()) {
    schema.task = node.at("task").get<std::string>();
  }
  read(node, "standardize", schema.standardize);
  return schema;
}

nlohmann::json to_json(const DatasetSchema& schema) {
  json node;
  node["features"] = schema.features;
  node["target"] = schema.target;
  node["task"] = schema.task ? json(*schema.task) : json(nullptr);
  node["standardize"] = schema.standardize;
  return node;
}

RunConfig parse_run_config(const nlohmann::json& document,
                           const std::filesystem::path& base_dir) {
  try {
    if (!document.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(document,
                   {"command", "data", "test_data", "test_fraction", "kernel", "inference",
                    "optimizer", "seed", "output_dir"},
                   "config");
    if (document.contains("command") && document.at("command") != "fit") {
      throw ConfigError("config command must be 'fit'");
    }
    RunConfig config;
    if (!document.contains("data")) throw ConfigError("config.data is required");
    config.train = source_from_json(document.at("data"), base_dir, nullptr, "data");
    if (document.contains("test_data") && !document.at("test_data").is_null()) {
      config.test = source_from_json(document.at("test_data"), base_dir,
                                     &config.train.schema, "test_data");
    }
    read(document, "test_fraction", config.test_fraction);

    if (document.contains("kernel")) {
      const json& kernel = document.at("kernel");
      reject_unknown(kernel, {"family", "ard"}, "kernel");
      if (kernel.contains("family")) {
        config.family = kernel_family_from_string(kernel.at("family").get<std::string>());
      }
      read(kernel, "ard", config.ard);
    }
    if (document.contains("inference")) {
      const json& inference = document.at("inference");
      reject_unknown(inference,
                     {"mode", "grid_size", "rank", "num_probes", "cg_tolerance",
                      "max_cg_iterations", "rebuild_grid"},
                     "inference");
      if (inference.contains("mode")) {
        config.mode = inference_mode_from_string(inference.at("mode").get<std::string>());
      }
      read(inference, "grid_size", config.skip.grid_size);
      read(inference, "rank", config.skip.rank);
      read(inference, "num_probes", config.skip.num_probes);
      read(inference, "cg_tolerance", config.skip.cg_tolerance);
      read(inference, "max_cg_iterations", config.skip.max_cg_iterations);
      read(inference, "rebuild_grid", config.skip.rebuild_grid);
    }
    if (document.contains("optimizer")) {
      const json& optimizer = document.at("optimizer");
      reject_unknown(optimizer, {"learning_rate", "steps"}, "optimizer");
      read(optimizer, "learning_rate", config.optimizer.learning_rate);
      read(optimizer, "steps", config.optimizer.steps);
    }
    if (document.contains("seed") && !document.at("seed").is_null()) {
      config.seed = document.at("seed").get<std::uint64_t>();
    }
    if (document.contains("output_dir")) {
      config.output_dir = resolve(base_dir, document.at("output_dir").get<std::string>());
    }
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const skipgp::Error& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json document;
  try {
    document = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(document, path.parent_path());
}

void validate(const RunConfig& config) {
  const auto must_exist = [](const std::filesystem::path& p, const char* what) {
    if (!std::filesystem::is_regular_file(p)) {
      throw ConfigError(std::string(what) + " does not exist: " + p.string());
    }
  };
  must_exist(config.train.path, "training data");
  if (config.test) must_exist(config.test->path, "test data");
  if (!config.seed) throw ConfigError("a seed is required (config 'seed' or --seed)");
  if (!config.test && !(config.test_fraction >= 0.0 && config.test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in [0, 1)");
  }
  if (config.optimizer.steps < 1) throw ConfigError("optimizer.steps must be >= 1");
  if (!(config.optimizer.learning_rate > 0.0)) {
    throw ConfigError("optimizer.learning_rate must be positive");
  }
  if (config.skip.grid_size < 4) throw ConfigError("inference.grid_size must be >= 4");
  if (config.skip.rank < 1) throw ConfigError("inference.rank must be >= 1");
  if (config.skip.num_probes < 1) throw ConfigError("inference.num_probes must be >= 1");
  if (!(config.skip.cg_tolerance > 0.0)) {
    throw ConfigError("inference.cg_tolerance must be positive");
  }
}

nlohmann::json to_json(const RunConfig& config) {
  json node;
  node["command"] = "fit";
  node["data"] = to_json(config.train.schema);
  node["data"]["path"] = config.train.path.string();
  if (config.test) {
    node["test_data"] = to_json(config.test->schema);
    node["test_data"]["path"] = config.test->path.string();
  } else {
    node["test_data"] = nullptr;
    node["test_fraction"] = config.test_fraction;
  }
  node["kernel"] = {{"family", to_string(config.family)}, {"ard", config.ard}};
  node["inference"] = {{"mode", to_string(config.mode)},
                       {"grid_size", config.skip.grid_size},
                       {"rank", config.skip.rank},
                       {"num_probes", config.skip.num_probes},
                       {"cg_tolerance", config.skip.cg_tolerance},
                       {"max_cg_iterations", config.skip.max_cg_iterations},
                       {"rebuild_grid", config.skip.rebuild_grid}};
  node["optimizer"] = {{"learning_rate", config.optimizer.learning_rate},
                       {"steps", config.optimizer.steps}};
  node["seed"] = config.seed ? json(*config.seed) : json(nullptr);
  node["output_dir"] = config.output_dir.string();
  return node;
}

}  // namespace skipgp::cli
