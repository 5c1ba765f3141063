#include <sstream>

#include "skipgp/cli/commands.hpp"
#include "skipgp/cli/dataset.hpp"
#include "skipgp/cli/errors.hpp"
#include "skipgp/cli/serialization.hpp"
#include "skipgp/kernels.hpp"
#include "skipgp/random.hpp"
#include "skipgp/ski.hpp"
#include "skipgp/skip.hpp"
#include "skipgp/version.hpp"
#include "util.hpp"

namespace skipgp::cli {
namespace {

using nlohmann::json;
using detail::Stopwatch;

Matrix standard_normal_matrix(Index n, Index d, std::uint64_t seed) {
  const Vector draws = standard_normal(n * d, seed);
  return Eigen::Map<const Matrix>(draws.data(), n, d);
}

}  // namespace

std::vector<MvmErrorRow> bench_mvm(const BenchMvmOptions& options) {
  if (options.n < 2) throw InvalidArgument("bench-mvm: n must be >= 2");
  if (options.num_vectors < 1) throw InvalidArgument("bench-mvm: need >= 1 test vector");
  for (Index d : options.dimensions) {
    if (d < 1) throw InvalidArgument("bench-mvm: dimensions must be >= 1");
  }
  for (Index r : options.ranks) {
    if (r < 1) throw InvalidArgument("bench-mvm: ranks must be >= 1");
  }
  Stopwatch total;
  const Index n = options.n;
  std::vector<MvmErrorRow> rows;
  for (Index d : options.dimensions) {
    const auto stream = static_cast<std::uint64_t>(d);
    const Matrix x = standard_normal_matrix(n, d, derive_seed(options.seed, stream));
    const KernelSpec unit = KernelSpec::rbf(Vector::Ones(1), 1.0);
    std::vector<OperatorPtr> leaves;
    Matrix exact = Matrix::Ones(n, n);
    for (Index j = 0; j < d; ++j) {
      Matrix k = kernel_matrix(unit, Matrix(x.col(j)), Matrix(x.col(j)));
      exact.array() *= k.array();
      if (options.ski_leaves) {
        const Vector column = x.col(j);
        leaves.push_back(ski_operator(
            unit, std::span<const double>(column.data(), static_cast<std::size_t>(n)),
            options.grid_size));
      } else {
        leaves.push_back(std::make_shared<const DenseOperator>(std::move(k)));
      }
    }
    std::vector<Vector> vectors;
    std::vector<Vector> reference;
    for (Index t = 0; t < options.num_vectors; ++t) {
      vectors.push_back(standard_normal(
          n, derive_seed(options.seed, 1000 * stream + static_cast<std::uint64_t>(t) + 1)));
      reference.push_back(exact * vectors.back());
    }
    for (Index r : options.ranks) {
      Stopwatch clock;
      const SkipTree tree =
          skip_decompose(leaves, r, derive_seed(options.seed, 7000 + stream));
      const double seconds = clock.seconds();
      std::vector<double> errors;
      for (std::size_t t = 0; t < vectors.size(); ++t) {
        errors.push_back((skip_mvm(tree, vectors[t]) - reference[t]).norm() /
                         reference[t].norm());
      }
      MvmErrorRow row;
      row.d = d;
      row.r = r;
      row.median_rel_error = detail::quantile(errors, 0.5);
      row.q1 = detail::quantile(errors, 0.25);
      row.q3 = detail::quantile(errors, 0.75);
      row.iqr = row.q3 - row.q1;
      row.decompose_seconds = seconds;
      rows.push_back(row);
    }
  }

  if (options.output_dir) {
    std::ostringstream csv;
    csv << "d,r,median_rel_error,iqr,q1,q3\n";
    json table = json::array();
    json timing = json::array();
    for (const auto& row : rows) {
      csv << row.d << ',' << row.r << ',' << detail::format_double(row.median_rel_error) << ','
          << detail::format_double(row.iqr) << ',' << detail::format_double(row.q1) << ','
          << detail::format_double(row.q3) << '\n';
      table.push_back({{"d", row.d},
                       {"r", row.r},
                       {"median_rel_error", row.median_rel_error},
                       {"iqr", row.iqr}});
      timing.push_back({{"d", row.d}, {"r", row.r}, {"decompose_seconds", row.decompose_seconds}});
    }
    json metrics;
    metrics["library_version"] = kVersion;
    metrics["command"] = "bench-mvm";
    metrics["config"] = {{"n", options.n},
                         {"seed", options.seed},
                         {"dimensions", options.dimensions},
                         {"ranks", options.ranks},
                         {"num_vectors", options.num_vectors},
                         {"leaves", options.ski_leaves ? "ski" : "dense"},
                         {"grid_size", options.grid_size}};
    metrics["table"] = table;
    metrics["timing"] = {{"cells", timing}, {"total_seconds", total.seconds()}};
    write_file_atomic(*options.output_dir / "mvm_error.csv", csv.str());
    write_file_atomic(*options.output_dir / "metrics.json", metrics.dump(2) + "\n");
  }
  return rows;
}

std::vector<InducingRow> bench_inducing(const BenchInducingOptions& options) {
  if (options.repeats < 1) throw InvalidArgument("bench-inducing: repeats must be >= 1");
  if (options.grid_sizes.empty()) throw InvalidArgument("bench-inducing: empty m list");
  Stopwatch total;
  Matrix x;
  Vector y;
  if (options.data_path) {
    if (!std::filesystem::is_regular_file(*options.data_path)) {
      throw ConfigError("dataset does not exist: " + options.data_path->string());
    }
    DatasetSchema schema;
    schema.target = options.target;
    for (const auto& name : read_csv_header(*options.data_path)) {
      if (name != options.target) schema.features.push_back(name);
    }
    if (schema.features.empty()) {
      throw SchemaError("dataset has no feature columns besides the target", options.target);
    }
    const Dataset data = load_dataset(*options.data_path, schema);
    x = data.x;
    y = data.y;
  } else {
    if (options.n < 2 || options.d < 1) throw InvalidArgument("bench-inducing: bad n or d");
    x = standard_normal_matrix(options.n, options.d, derive_seed(options.seed, 1));
    y = x.array().sin().rowwise().sum().matrix() +
        0.1 * standard_normal(options.n, derive_seed(options.seed, 2));
  }

  std::vector<InducingRow> rows;
  for (Index m : options.grid_sizes) {
    GpModel model = initialize_model(x, y, KernelFamily::kRbf, true, InferenceMode::kSkip);
    model.skip.grid_size = m;
    model.skip.rank = options.rank;
    model.skip.num_probes = options.num_probes;
    model.skip.probe_seed = options.seed;
    std::vector<double> seconds;
    MllResult result;
    for (Index rep = 0; rep < options.repeats; ++rep) {
      Stopwatch clock;
      result = mll_detailed(model, x, y);
      seconds.push_back(clock.seconds());
    }
    rows.push_back({m, detail::quantile(seconds, 0.5), result.cg_iterations, result.value});
  }

  if (options.output_dir) {
    std::ostringstream csv;
    csv << "m,seconds_per_mll\n";
    json table = json::array();
    json timing = json::array();
    for (const auto& row : rows) {
      csv << row.m << ',' << detail::format_double(row.seconds_per_mll) << '\n';
      table.push_back({{"m", row.m}, {"mll", row.mll}, {"cg_iterations", row.cg_iterations}});
      timing.push_back({{"m", row.m}, {"seconds_per_mll", row.seconds_per_mll}});
    }
    json metrics;
    metrics["library_version"] = kVersion;
    metrics["command"] = "bench-inducing";
    metrics["config"] = {
        {"data", options.data_path ? json(options.data_path->string()) : json(nullptr)},
        {"n", x.rows()},
        {"d", x.cols()},
        {"seed", options.seed},
        {"m_list", options.grid_sizes},
        {"rank", options.rank},
        {"num_probes", options.num_probes},
        {"repeats", options.repeats}};
    metrics["table"] = table;
    metrics["timing"] = {{"cells", timing}, {"total_seconds", total.seconds()}};
    write_file_atomic(*options.output_dir / "inducing_time.csv", csv.str());
    write_file_atomic(*options.output_dir / "metrics.json", metrics.dump(2) + "\n");
  }
  return rows;
}

}  // namespace skipgp::cli
