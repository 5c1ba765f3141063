#include <iostream>

#include <CLI11.hpp>

#include "skipgp/cli/commands.hpp"
#include "skipgp/cli/errors.hpp"
#include "skipgp/version.hpp"

namespace skipgp::cli {
namespace {

using nlohmann::json;

class UsageError : public CliError {
 public:
  explicit UsageError(const std::string& what)
      : CliError(ExitCode::kUsage, "usage_error", what) {}
};

InferenceMode parse_mode(const std::string& name) {
  try {
    return inference_mode_from_string(name);
  } catch (const skipgp::Error& e) {
    throw UsageError(e.what());
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Scalable Gaussian process regression with product-kernel MVMs"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // fit
  std::string fit_config;
  std::optional<std::uint64_t> fit_seed;
  std::optional<std::string> fit_mode;
  std::optional<std::string> fit_out;
  auto* fit_cmd = app.add_subcommand("fit", "Fit hyperparameters and evaluate a model");
  fit_cmd->add_option("--config", fit_config, "Run configuration (JSON)")->required();
  fit_cmd->add_option("--seed", fit_seed, "Seed (overrides the config)");
  fit_cmd->add_option("--mode", fit_mode, "Inference mode: exact or skip");
  fit_cmd->add_option("--out", fit_out, "Output directory (overrides the config)");

  // predict
  PredictOptions predict_options;
  std::string predict_model;
  std::string predict_data;
  std::string predict_out = "out";
  auto* predict_cmd = app.add_subcommand("predict", "Predict with a fitted model");
  predict_cmd->add_option("--model", predict_model, "model.json written by fit")->required();
  predict_cmd->add_option("--data", predict_data, "CSV with the model's feature columns")
      ->required();
  predict_cmd->add_option("--out", predict_out, "Output directory");

  // bench-mvm
  BenchMvmOptions mvm;
  std::string mvm_out = "out";
  auto* mvm_cmd = app.add_subcommand("bench-mvm", "Relative MVM error against rank");
  mvm_cmd->add_option("--n", mvm.n, "Number of points");
  mvm_cmd->add_option("--seed", mvm.seed, "Seed");
  mvm_cmd->add_option("--d-list", mvm.dimensions, "Input dimensions")->delimiter(',');
  mvm_cmd->add_option("--r-list", mvm.ranks, "Lanczos ranks")->delimiter(',');
  mvm_cmd->add_option("--vectors", mvm.num_vectors, "Random test vectors per cell");
  std::string mvm_leaves = "ski";
  mvm_cmd->add_option("--leaves", mvm_leaves, "Leaf operators: ski or dense")
      ->check(CLI::IsMember({"ski", "dense"}));
  mvm_cmd->add_option("--grid-size", mvm.grid_size, "SKI grid points per leaf");
  mvm_cmd->add_option("--out", mvm_out, "Output directory");

  // bench-inducing
  BenchInducingOptions inducing;
  std::optional<std::string> inducing_data;
  std::string inducing_out = "out";
  auto* inducing_cmd =
      app.add_subcommand("bench-inducing", "Wall time per mll against grid size");
  inducing_cmd->add_option("--data", inducing_data, "CSV; synthetic data when omitted");
  inducing_cmd->add_option("--target", inducing.target, "Target column");
  inducing_cmd->add_option("--m-list", inducing.grid_sizes, "Grid sizes")->delimiter(',');
  inducing_cmd->add_option("--n", inducing.n, "Synthetic points");
  inducing_cmd->add_option("--d", inducing.d, "Synthetic dimensions");
  inducing_cmd->add_option("--seed", inducing.seed, "Seed");
  inducing_cmd->add_option("--rank", inducing.rank, "Lanczos rank");
  inducing_cmd->add_option("--probes", inducing.num_probes, "SLQ probes");
  inducing_cmd->add_option("--repeats", inducing.repeats, "Timed repetitions per m");
  inducing_cmd->add_option("--out", inducing_out, "Output directory");

  // multitask
  MultitaskOptions multitask;
  std::optional<std::string> multitask_data;
  std::string multitask_mode = "exact";
  std::string multitask_out = "out";
  auto* multitask_cmd =
      app.add_subcommand("multitask", "Cluster multi-task GP with Gibbs sampling");
  multitask_cmd->add_option("--data", multitask_data,
                            "CSV with task_id,x,y; synthetic data when omitted");
  multitask_cmd->add_option("--clusters", multitask.clusters, "Number of clusters");
  multitask_cmd->add_option("--sweeps", multitask.sweeps, "Gibbs sweeps");
  multitask_cmd->add_option("--burn-in", multitask.burn_in, "Sweeps before recording");
  multitask_cmd->add_option("--seed", multitask.seed, "Seed");
  multitask_cmd->add_option("--mode", multitask_mode, "Inference mode: exact or skip");
  multitask_cmd->add_option("--holdout", multitask.holdout, "Held-out extrapolation tasks");
  multitask_cmd->add_option("--reveal", multitask.reveal,
                            "Quantile of x revealed for held-out tasks");
  multitask_cmd->add_option("--task-counts", multitask.task_counts,
                            "Training-task counts for the RMSE curve")
      ->delimiter(',');
  multitask_cmd->add_option("--synthetic-tasks", multitask.synthetic_tasks,
                            "Synthetic training tasks");
  multitask_cmd->add_option("--points-per-task", multitask.points_per_task,
                            "Synthetic points per task");
  multitask_cmd->add_option("--out", multitask_out, "Output directory");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      std::cout << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      std::cout << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::CallForVersion&) {
      std::cout << kVersion << '\n';
      return 0;
    } catch (const CLI::ParseError& e) {
      throw UsageError(e.what());
    }

    json summary;
    if (fit_cmd->parsed()) {
      RunConfig config = load_run_config(fit_config);
      if (fit_seed) config.seed = fit_seed;
      if (fit_mode) config.mode = parse_mode(*fit_mode);
      if (fit_out) config.output_dir = *fit_out;
      const FitOutcome outcome = run_fit(config);
      summary = {{"command", "fit"},
                 {"output_dir", config.output_dir.string()},
                 {"best_mll", outcome.metrics["best_mll"]},
                 {"test", outcome.metrics["test"]}};
    } else if (predict_cmd->parsed()) {
      predict_options.model_path = predict_model;
      predict_options.data_path = predict_data;
      predict_options.output_dir = predict_out;
      const json report = run_predict(predict_options);
      summary = {{"command", "predict"}, {"output_dir", predict_out}, {"n", report["n"]}};
    } else if (mvm_cmd->parsed()) {
      mvm.output_dir = mvm_out;
      mvm.ski_leaves = mvm_leaves == "ski";
      const auto rows = bench_mvm(mvm);
      summary = {{"command", "bench-mvm"}, {"output_dir", mvm_out}, {"cells", rows.size()}};
    } else if (inducing_cmd->parsed()) {
      if (inducing_data) inducing.data_path = *inducing_data;
      inducing.output_dir = inducing_out;
      const auto rows = bench_inducing(inducing);
      summary = {{"command", "bench-inducing"}, {"output_dir", inducing_out},
                 {"rows", rows.size()}};
    } else if (multitask_cmd->parsed()) {
      if (multitask_data) multitask.data_path = *multitask_data;
      multitask.mode = parse_mode(multitask_mode);
      multitask.output_dir = multitask_out;
      const MultitaskReport report = run_multitask(multitask);
      summary = {{"command", "multitask"}, {"output_dir", multitask_out},
                 {"adjusted_rand_index", report.metrics["adjusted_rand_index"]}};
    }
    std::cout << summary.dump() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << error_report(e).dump() << '\n';
    return static_cast<int>(exit_code_for(e));
  } catch (...) {
    std::cerr << json{{"error", "internal_error"},
                      {"message", "unknown exception"},
                      {"exit_code", static_cast<int>(ExitCode::kInternal)}}
                     .dump()
              << '\n';
    return static_cast<int>(ExitCode::kInternal);
  }
}

}  // namespace skipgp::cli
