#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skipgp/cli/config.hpp"
#include "skipgp/gp.hpp"
#include "skipgp/multitask.hpp"

namespace skipgp::cli {

// --- fit -------------------------------------------------------------------

struct FitOutcome {
  nlohmann::json model;    // contents of model.json
  nlohmann::json metrics;  // contents of metrics.json
};

// Fits hyperparameters on the training data, evaluates on the test data and
// writes model.json and metrics.json into the output directory. Wall-clock
// fields live under metrics["timing"] only.
FitOutcome run_fit(const RunConfig& config);

// --- predict ---------------------------------------------------------------

struct PredictOptions {
  std::filesystem::path model_path;
  std::filesystem::path data_path;
  std::filesystem::path output_dir = "out";
};

// Writes predictions.csv (row, mean, variance) and report.json. Returns the
// report.
nlohmann::json run_predict(const PredictOptions& options);

// --- bench-mvm -------------------------------------------------------------

struct BenchMvmOptions {
  Index n = 500;
  std::uint64_t seed = 7;
  std::vector<Index> dimensions{4, 8, 12};
  std::vector<Index> ranks{5, 10, 20, 30, 50, 100};
  // Random vectors per (d, r) cell; errors are summarized over them.
  Index num_vectors = 20;
  // Leaf operators: SKI approximations on `grid_size` points, or the exact
  // dense 1-D kernel matrices.
  bool ski_leaves = true;
  Index grid_size = 100;
  std::optional<std::filesystem::path> output_dir;
};

struct MvmErrorRow {
  Index d = 0;
  Index r = 0;
  double median_rel_error = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double decompose_seconds = 0.0;
};

// Relative error of skip_mvm against the exact dense product of 1-D
// unit-lengthscale RBF kernels, inputs drawn from N(0, I).
std::vector<MvmErrorRow> bench_mvm(const BenchMvmOptions& options);

// --- bench-inducing --------------------------------------------------------

struct BenchInducingOptions {
  // CSV with a target column and feature columns; a seeded synthetic
  // dataset of `n` points in `d` dimensions is used when absent.
  std::optional<std::filesystem::path> data_path;
  std::string target = "y";
  Index n = 2000;
  Index d = 2;
  std::uint64_t seed = 0;
  std::vector<Index> grid_sizes{50, 100, 200, 400};
  Index rank = 30;
  Index num_probes = 10;
  Index repeats = 3;
  std::optional<std::filesystem::path> output_dir;
};

struct InducingRow {
  Index m = 0;
  double seconds_per_mll = 0.0;  // median over repeats
  Index cg_iterations = 0;
  double mll = 0.0;
};

std::vector<InducingRow> bench_inducing(const BenchInducingOptions& options);

// --- multitask -------------------------------------------------------------

struct MultitaskOptions {
  // CSV with columns task_id, x, y; a seeded synthetic growth-curve dataset
  // is used when absent.
  std::optional<std::filesystem::path> data_path;
  Index clusters = 3;
  Index sweeps = 20;
  Index burn_in = 5;
  std::uint64_t seed = 0;
  InferenceMode mode = InferenceMode::kExactDense;
  // Synthetic data shape: training tasks plus held-out tasks.
  Index synthetic_tasks = 15;
  Index points_per_task = 20;
  // The last `holdout` tasks are extrapolation targets: their observations
  // with x at or below the `reveal` quantile are shown, the rest predicted.
  Index holdout = 5;
  double reveal = 0.5;
  // Training-task counts for the RMSE curve; empty means a default ladder.
  std::vector<Index> task_counts;
  std::optional<std::filesystem::path> output_dir;
};

struct ExtrapolationRow {
  Index num_tasks = 0;
  double multitask_rmse = 0.0;
  double single_task_rmse = 0.0;
};

struct MultitaskReport {
  std::vector<ClusterTraceEntry> trace;  // fit on all training tasks
  std::vector<Index> final_assignment;
  std::optional<double> adjusted_rand_index;  // synthetic data only
  std::vector<ExtrapolationRow> extrapolation;
  nlohmann::json metrics;
};

MultitaskReport run_multitask(const MultitaskOptions& options);

// --- entry point -------------------------------------------------------------

// Parses arguments, runs the command and maps failures to exit codes with a
// JSON error report on stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace skipgp::cli
