#include <set>
#include <sstream>

#include "skipgp/cli/commands.hpp"
#include "skipgp/cli/dataset.hpp"
#include "skipgp/cli/errors.hpp"
#include "skipgp/cli/serialization.hpp"
#include "skipgp/random.hpp"
#include "skipgp/version.hpp"
#include "util.hpp"

namespace skipgp::cli {
namespace {

using nlohmann::json;
using detail::Stopwatch;

constexpr Index kBaselineSteps = 50;

struct HeldOutTask {
  Vector x_seen;
  Vector y_seen;
  Vector x_hidden;
  Vector y_hidden;
};

HeldOutTask split_task(const MultitaskData& data, Index task, double reveal) {
  const std::vector<Index> rows = data.rows_of_task(task);
  std::vector<double> xs;
  for (Index r : rows) xs.push_back(data.x[r]);
  const double cut = detail::quantile(xs, reveal);
  std::vector<Index> seen;
  std::vector<Index> hidden;
  for (Index r : rows) (data.x[r] <= cut ? seen : hidden).push_back(r);
  return {detail::select_rows(data.x, seen), detail::select_rows(data.y, seen),
          detail::select_rows(data.x, hidden), detail::select_rows(data.y, hidden)};
}

// Independent Matérn 5/2 GP fit on the revealed part of one task.
Vector single_task_prediction(const HeldOutTask& task, std::uint64_t seed) {
  if (task.x_seen.size() < 2) {
    const double mean = task.y_seen.size() > 0 ? task.y_seen.mean() : 0.0;
    return Vector::Constant(task.x_hidden.size(), mean);
  }
  const Matrix x = task.x_seen;
  GpModel model = initialize_model(x, task.y_seen, KernelFamily::kMatern52, false,
                                   InferenceMode::kExactDense);
  OptimizerSettings optimizer;
  optimizer.steps = kBaselineSteps;
  optimizer.seed = seed;
  const FitResult fitted = fit(model, x, task.y_seen, optimizer);
  const Matrix xstar = task.x_hidden;
  return predict(TrainedPosterior::build(fitted.model, x, task.y_seen), xstar).mean;
}

std::vector<Index> range(Index n) {
  std::vector<Index> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

std::vector<Index> one_based(const std::vector<Index>& labels) {
  std::vector<Index> out = labels;
  for (auto& a : out) ++a;
  return out;
}

}  // namespace

MultitaskReport run_multitask(const MultitaskOptions& options) {
  if (options.clusters < 1) throw InvalidArgument("multitask: clusters must be >= 1");
  if (options.sweeps < 1) throw InvalidArgument("multitask: sweeps must be >= 1");
  if (options.holdout < 1) throw InvalidArgument("multitask: holdout must be >= 1");
  if (!(options.reveal > 0.0 && options.reveal < 1.0)) {
    throw InvalidArgument("multitask: reveal must lie in (0, 1)");
  }
  Stopwatch total;

  MultitaskData all;
  std::optional<std::vector<Index>> truth;
  if (options.data_path) {
    if (!std::filesystem::is_regular_file(*options.data_path)) {
      throw ConfigError("dataset does not exist: " + options.data_path->string());
    }
    DatasetSchema schema{{"x"}, "y", std::string("task_id"), false};
    const Dataset data = load_dataset(*options.data_path, schema);
    all.x = data.x.col(0);
    all.y = data.y;
    all.task = data.task;
    all.num_tasks = data.num_tasks();
  } else {
    const SyntheticTasks synthetic =
        synthetic_growth_curves(options.synthetic_tasks + options.holdout, options.clusters,
                                options.points_per_task, options.seed);
    all = synthetic.data;
    truth = synthetic.cluster_of_task;
  }
  const Index num_train = all.num_tasks - options.holdout;
  if (num_train < 1) {
    throw InvalidArgument("multitask: dataset has " + std::to_string(all.num_tasks) +
                          " tasks, not enough for " + std::to_string(options.holdout) +
                          " held-out tasks");
  }

  std::vector<Index> counts = options.task_counts;
  if (counts.empty()) {
    for (Index k = 1; k < num_train; k *= 2) counts.push_back(k);
    counts.push_back(num_train);
  }
  std::set<Index> unique;
  for (Index k : counts) {
    if (k < 1 || k > num_train) {
      throw InvalidArgument("multitask: task count " + std::to_string(k) +
                            " outside [1, " + std::to_string(num_train) + "]");
    }
    unique.insert(k);
  }
  if (!unique.count(num_train)) unique.insert(num_train);

  std::vector<HeldOutTask> targets;
  for (Index h = num_train; h < all.num_tasks; ++h) {
    targets.push_back(split_task(all, h, options.reveal));
  }
  Vector hidden_truth(0);
  for (const auto& t : targets) {
    Vector joined(hidden_truth.size() + t.y_hidden.size());
    joined << hidden_truth, t.y_hidden;
    hidden_truth = joined;
  }

  Stopwatch baseline_clock;
  Vector baseline(0);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const Vector p = single_task_prediction(targets[k], derive_seed(options.seed, 50 + k));
    Vector joined(baseline.size() + p.size());
    joined << baseline, p;
    baseline = joined;
  }
  const double baseline_rmse = detail::rmse(baseline, hidden_truth);
  const double baseline_seconds = baseline_clock.seconds();

  ClusterFitSettings settings;
  settings.num_clusters = options.clusters;
  settings.sweeps = options.sweeps;
  settings.burn_in = options.burn_in;
  settings.seed = options.seed;
  settings.inference.mode = options.mode;

  MultitaskReport report;
  json fits = json::array();
  Stopwatch multitask_clock;
  for (Index k : unique) {
    const MultitaskData subset = all.subset_tasks(range(k));
    const ClusterFitResult fitted = fit_cluster_model(subset, settings);
    Vector predicted(0);
    for (std::size_t h = 0; h < targets.size(); ++h) {
      const TaskPrediction p =
          predict_task(fitted.state, subset, targets[h].x_seen, targets[h].y_seen,
                       targets[h].x_hidden, settings.inference,
                       derive_seed(options.seed, 90 + h));
      Vector joined(predicted.size() + p.mean.size());
      joined << predicted, p.mean;
      predicted = joined;
    }
    report.extrapolation.push_back({k, detail::rmse(predicted, hidden_truth), baseline_rmse});
    fits.push_back({{"num_tasks", k},
                    {"assignment", one_based(fitted.state.lambda)},
                    {"mll_evaluations", fitted.mll_evaluations},
                    {"hyperparameters",
                     {{"cluster_kernel", to_json(fitted.state.hyper.cluster_kernel)},
                      {"individual_kernel", to_json(fitted.state.hyper.individual_kernel)},
                      {"noise_variance", fitted.state.hyper.noise_variance},
                      {"constant_mean", fitted.state.hyper.constant_mean}}}});
    if (k == num_train) {
      report.trace = fitted.trace;
      report.final_assignment = fitted.state.lambda;
      if (truth) {
        const std::vector<Index> train_truth(truth->begin(), truth->begin() + num_train);
        report.adjusted_rand_index = adjusted_rand_index(fitted.state.lambda, train_truth);
      }
    }
  }
  const double multitask_seconds = multitask_clock.seconds();

  json& m = report.metrics;
  m["library_version"] = kVersion;
  m["command"] = "multitask";
  m["config"] = {
      {"data", options.data_path ? json(options.data_path->string()) : json(nullptr)},
      {"clusters", options.clusters},
      {"sweeps", options.sweeps},
      {"burn_in", options.burn_in},
      {"seed", options.seed},
      {"mode", to_string(options.mode)},
      {"synthetic_tasks", options.synthetic_tasks},
      {"points_per_task", options.points_per_task},
      {"holdout", options.holdout},
      {"reveal", options.reveal}};
  m["num_training_tasks"] = num_train;
  m["final_assignment"] = one_based(report.final_assignment);
  m["adjusted_rand_index"] =
      report.adjusted_rand_index ? json(*report.adjusted_rand_index) : json(nullptr);
  json curve = json::array();
  for (const auto& row : report.extrapolation) {
    curve.push_back({{"num_tasks", row.num_tasks},
                     {"multitask_rmse", row.multitask_rmse},
                     {"single_task_rmse", row.single_task_rmse}});
  }
  m["extrapolation"] = curve;
  m["fits"] = fits;
  m["timing"] = {{"single_task_seconds", baseline_seconds},
                 {"multitask_seconds", multitask_seconds},
                 {"total_seconds", total.seconds()}};

  if (options.output_dir) {
    std::ostringstream trace;
    for (const auto& entry : report.trace) {
      trace << json{{"sweep", entry.sweep},
                    {"lambda", one_based(entry.lambda)},
                    {"mll", entry.mll}}
                   .dump()
            << '\n';
    }
    std::ostringstream csv;
    csv << "num_tasks,multitask_rmse,single_task_rmse\n";
    for (const auto& row : report.extrapolation) {
      csv << row.num_tasks << ',' << detail::format_double(row.multitask_rmse) << ','
          << detail::format_double(row.single_task_rmse) << '\n';
    }
    write_file_atomic(*options.output_dir / "trace.jsonl", trace.str());
    write_file_atomic(*options.output_dir / "extrapolation.csv", csv.str());
    write_file_atomic(*options.output_dir / "metrics.json", m.dump(2) + "\n");
  }
  return report;
}

}  // namespace skipgp::cli
