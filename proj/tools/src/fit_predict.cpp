#include <cmath>
#include <sstream>

#include "skipgp/cli/commands.hpp"
#include "skipgp/cli/errors.hpp"
#include "skipgp/cli/serialization.hpp"
#include "skipgp/version.hpp"
#include "util.hpp"

namespace skipgp::cli {
namespace {

using nlohmann::json;
using detail::Stopwatch;

json finite_or_null(double value) { return std::isfinite(value) ? json(value) : json(nullptr); }

json fit_metrics_block(const Vector& truth, const Vector& mean) {
  return {{"n", truth.size()},
          {"rmse", detail::rmse(truth, mean)},
          {"mae", detail::mae(truth, mean)}};
}

std::string predictions_csv(const Prediction& p) {
  std::ostringstream out;
  out << "row,mean,variance\n";
  for (Index i = 0; i < p.mean.size(); ++i) {
    out << i << ',' << detail::format_double(p.mean[i]) << ','
        << detail::format_double(p.variance[i]) << '\n';
  }
  return out.str();
}

}  // namespace

FitOutcome run_fit(const RunConfig& config) {
  validate(config);
  const std::uint64_t seed = *config.seed;
  Stopwatch total;

  Dataset train = load_dataset(config.train.path, config.train.schema);
  Dataset test;
  if (config.test) {
    test = load_dataset(config.test->path, config.test->schema);
  } else {
    const SplitRows rows = split_rows(train.size(), {config.test_fraction, seed});
    test.x = detail::select_rows(train.x, rows.test);
    test.y = detail::select_rows(train.y, rows.test);
    test.has_target = true;
    train.x = detail::select_rows(train.x, rows.train);
    train.y = detail::select_rows(train.y, rows.train);
  }
  if (train.size() < 2) throw ConfigError("training data needs at least 2 rows");

  const Standardization transform = config.train.schema.standardize
                                        ? Standardization::fit(train)
                                        : Standardization::identity(train.x.cols());
  const Matrix x = transform.transform_features(train.x);
  const Vector y = transform.transform_target(train.y);
  const Matrix x_test = transform.transform_features(test.x);

  GpModel initial = initialize_model(x, y, config.family, config.ard, config.mode);
  initial.skip = config.skip;
  initial.skip.probe_seed = seed;
  OptimizerSettings optimizer = config.optimizer;
  optimizer.seed = seed;

  Stopwatch fit_clock;
  const FitResult fitted = fit(initial, x, y, optimizer);
  const double fit_seconds = fit_clock.seconds();

  const MllResult final_mll = mll_detailed(fitted.model, x, y);

  Stopwatch predict_clock;
  const TrainedPosterior posterior =
      TrainedPosterior::build(fitted.model, x, y, test.size() > 0 ? &x_test : nullptr);
  const Prediction train_pred = posterior.predict(x);
  const Prediction test_pred =
      test.size() > 0 ? posterior.predict(x_test) : Prediction{Vector(), Vector()};
  const double predict_seconds = predict_clock.seconds();

  ModelArtifact artifact;
  artifact.model = fitted.model;
  artifact.train.path = std::filesystem::absolute(config.train.path);
  artifact.train.schema = config.train.schema;
  artifact.train_checksum = fnv1a_file(config.train.path);
  artifact.transform = transform;
  if (!config.test) artifact.split = HoldoutSplit{config.test_fraction, seed};

  FitOutcome outcome;
  outcome.model = to_json(artifact);

  json& m = outcome.metrics;
  m["library_version"] = kVersion;
  m["command"] = "fit";
  m["config"] = to_json(config);
  json trace = json::array();
  for (double value : fitted.trace.mll) trace.push_back(finite_or_null(value));
  m["mll_trace"] = trace;
  m["best_index"] = fitted.trace.best_index;
  m["initial_mll"] = fitted.initial_mll;
  m["best_mll"] = fitted.best_mll;
  m["hyperparameters"] = {{"kernel", to_json(fitted.model.kernel)},
                          {"noise_variance", fitted.model.noise_variance},
                          {"constant_mean", fitted.model.constant_mean}};
  m["train"] = fit_metrics_block(train.y, transform.restore_mean(train_pred.mean));
  m["test"] = test.size() > 0
                  ? fit_metrics_block(test.y, transform.restore_mean(test_pred.mean))
                  : json{{"n", 0}};
  m["final_mll"] = {{"value", final_mll.value},
                    {"quadratic_term", final_mll.quadratic_term},
                    {"logdet", final_mll.logdet},
                    {"cg_iterations", final_mll.cg_iterations},
                    {"cg_residual", final_mll.cg_residual},
                    {"clamped_ritz_values", final_mll.clamped_ritz_values}};
  m["operator_applies"] = {{"kernel", final_mll.kernel_applies},
                           {"leaf", final_mll.leaf_applies},
                           {"prediction_cg_iterations", posterior.cg_iterations()}};
  m["prediction_solve_residual"] = posterior.solve_residual();
  m["timing"] = {{"fit_seconds", fit_seconds},
                 {"predict_seconds", predict_seconds},
                 {"final_mll", {{"decompose_seconds", final_mll.times.decompose_seconds},
                                {"solve_seconds", final_mll.times.solve_seconds},
                                {"logdet_seconds", final_mll.times.logdet_seconds},
                                {"total_seconds", final_mll.times.total_seconds}}},
                 {"total_seconds", total.seconds()}};

  write_file_atomic(config.output_dir / "model.json", outcome.model.dump(2) + "\n");
  write_file_atomic(config.output_dir / "metrics.json", outcome.metrics.dump(2) + "\n");
  return outcome;
}

nlohmann::json run_predict(const PredictOptions& options) {
  Stopwatch total;
  const ModelArtifact artifact = load_model_artifact(options.model_path);
  if (!std::filesystem::is_regular_file(artifact.train.path)) {
    throw ModelError("training data referenced by the model is missing: " +
                     artifact.train.path.string());
  }
  if (fnv1a_file(artifact.train.path) != artifact.train_checksum) {
    throw ModelError("training data changed since the model was fit: " +
                     artifact.train.path.string());
  }
  if (!std::filesystem::is_regular_file(options.data_path)) {
    throw ConfigError("prediction data does not exist: " + options.data_path.string());
  }

  Dataset train = load_dataset(artifact.train.path, artifact.train.schema);
  if (artifact.split) {
    const SplitRows rows = split_rows(train.size(), *artifact.split);
    train.x = detail::select_rows(train.x, rows.train);
    train.y = detail::select_rows(train.y, rows.train);
  }
  const Dataset data =
      load_dataset(options.data_path, artifact.train.schema, /*target_optional=*/true);

  const Standardization& t = artifact.transform;
  const Matrix x = t.transform_features(train.x);
  const Vector y = t.transform_target(train.y);
  const Matrix xstar = t.transform_features(data.x);

  const TrainedPosterior posterior = TrainedPosterior::build(artifact.model, x, y, &xstar);
  const Prediction raw = posterior.predict(xstar);
  const Prediction restored{t.restore_mean(raw.mean), t.restore_variance(raw.variance)};

  write_file_atomic(options.output_dir / "predictions.csv", predictions_csv(restored));
  json report;
  report["library_version"] = kVersion;
  report["command"] = "predict";
  report["model"] = options.model_path.string();
  report["data"] = options.data_path.string();
  report["n"] = data.size();
  if (data.has_target) report["test"] = fit_metrics_block(data.y, restored.mean);
  report["prediction_solve_residual"] = posterior.solve_residual();
  report["timing"] = {{"total_seconds", total.seconds()}};
  write_file_atomic(options.output_dir / "report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace skipgp::cli
