// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance                 run every criterion
//   acceptance --criterion N   run criterion N only
//
// Exit status is 0 only when every selected criterion passes.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "skipgp/cli/commands.hpp"
#include "skipgp/cli/config.hpp"
#include "skipgp/kernels.hpp"
#include "skipgp/krylov.hpp"
#include "skipgp/linop.hpp"
#include "skipgp/multitask.hpp"
#include "skipgp/random.hpp"
#include "skipgp/ski.hpp"
#include "skipgp/skip.hpp"

namespace {

using namespace skipgp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, format, value);
  return buffer;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Oracles below use their own generator, independent of the library's.
Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> dist;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(engine);
  }
  return m;
}

Vector gaussian_vector(Index n, std::uint64_t seed) { return gaussian_matrix(n, 1, seed); }

Vector uniform_vector(Index n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(engine);
  return v;
}

Matrix random_spd(Index n, std::uint64_t seed, double shift) {
  const Matrix g = gaussian_matrix(n, n, seed);
  Matrix a = g * g.transpose() / static_cast<double>(n);
  a.diagonal().array() += shift;
  return a;
}

double rbf(double x, double z, double ls, double os) {
  const double t = (x - z) / ls;
  return os * std::exp(-0.5 * t * t);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

// 1. MVM accuracy vs rank.
Outcome criterion_mvm_accuracy() {
  const auto start = Clock::now();
  cli::BenchMvmOptions options;
  options.ranks = {5, 10, 20, 30, 50};
  const std::vector<cli::MvmErrorRow> rows = cli::bench_mvm(options);
  const double elapsed = seconds_since(start);

  bool below = true;
  bool monotone = true;
  std::ostringstream detail;
  for (Index d : options.dimensions) {
    double previous = std::numeric_limits<double>::infinity();
    detail << " d=" << d << ":";
    for (const auto& row : rows) {
      if (row.d != d) continue;
      detail << " r" << row.r << "=" << fmt("%.3g", row.median_rel_error);
      if (row.median_rel_error > previous) monotone = false;
      previous = row.median_rel_error;
      if (row.r == 30 && !(row.median_rel_error < 1e-2)) below = false;
    }
    detail << ";";
  }
  const bool fast = elapsed < 120.0;
  detail << " r30<1e-2 " << (below ? "yes" : "no") << ", monotone "
         << (monotone ? "yes" : "no") << ", " << fmt("%.1f", elapsed) << " s";
  return {below && monotone && fast, detail.str()};
}

// 2. Exactness at full rank.
Outcome criterion_full_rank() {
  double worst = 0.0;
  for (Index n : {10, 40, 70, 100}) {
    const Matrix a = random_spd(n, 100 + static_cast<std::uint64_t>(n), 1.0);
    const Matrix b = random_spd(n, 200 + static_cast<std::uint64_t>(n), 1.0);
    const std::vector<OperatorPtr> ops{std::make_shared<DenseOperator>(a),
                                       std::make_shared<DenseOperator>(b)};
    const SkipTree tree = skip_decompose(ops, n, 5);
    for (std::uint64_t t = 0; t < 5; ++t) {
      const Vector v = gaussian_vector(n, 300 + t);
      const Vector exact = a.cwiseProduct(b) * v;
      worst = std::max(worst, (skip_mvm(tree, v) - exact).norm() / exact.norm());
    }
  }
  return {worst <= 1e-8, "max relative error " + fmt("%.3g", worst) + " (n in {10,40,70,100})"};
}

// 3. Operator-apply budgets.
Outcome criterion_apply_budget() {
  const Index n = 400;
  const Index d = 5;
  const Index r = 25;
  const Matrix x = gaussian_matrix(n, d, 11);
  std::vector<std::shared_ptr<const CountingOperator>> counters;
  std::vector<OperatorPtr> leaves;
  for (Index c = 0; c < d; ++c) {
    const Vector column = x.col(c);
    // Lengthscale 0.3 keeps each leaf's numerical rank above r, so Lanczos
    // cannot stop early on an exhausted Krylov space.
    auto leaf = ski_operator(KernelSpec::rbf(Vector::Constant(1, 0.3), 1.0),
                             std::span<const double>(column.data(), n), 100);
    counters.push_back(std::make_shared<const CountingOperator>(leaf));
    leaves.push_back(counters.back());
  }
  const SkipTree tree = skip_decompose(leaves, r, 3);
  bool exact_budget = true;
  std::ostringstream detail;
  detail << "decompose applies per leaf:";
  for (const auto& c : counters) {
    detail << " " << c->applies();
    if (c->applies() != static_cast<std::uint64_t>(r)) exact_budget = false;
    c->reset();
  }
  for (std::uint64_t t = 0; t < 25; ++t) skip_mvm(tree, gaussian_vector(n, 50 + t));
  std::uint64_t after = 0;
  for (const auto& c : counters) after += c->applies();
  detail << " (r=" << r << "); leaf applies during 25 MVMs: " << after;
  return {exact_budget && after == 0, detail.str()};
}

// 4. Krylov correctness.
Outcome criterion_krylov() {
  const Matrix a = random_spd(200, 21, 1.0);
  const Vector b = gaussian_vector(200, 22);
  CgOptions options;
  options.tolerance = 1e-10;
  const CgResult cg = cg_solve(DenseOperator(a), b, options);
  const Vector reference = a.llt().solve(b);
  const double cg_error = (cg.solution - reference).norm() / reference.norm();

  const Matrix c = random_spd(100, 23, 1.0);
  const LanczosFactor factor = lanczos_decompose(DenseOperator(c), gaussian_vector(100, 24), 100);
  const double lanczos_error = (factor.reconstruct() - c).norm() / c.norm();

  // Shift 2: the log-spectrum has a mean well away from zero, so the
  // relative tolerance on log|A| is meaningful.
  const Matrix s = random_spd(300, 25, 2.0);
  const Eigen::LLT<Matrix> llt(s);
  const double exact = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  const SlqEstimate slq = slq_logdet(DenseOperator(s), 30, 50, 1234);
  const double slq_error = std::abs(slq.logdet - exact) / std::abs(exact);

  const bool pass = cg_error <= 1e-6 && lanczos_error <= 1e-8 && slq_error <= 1e-2;
  return {pass, "cg " + fmt("%.3g", cg_error) + ", lanczos " + fmt("%.3g", lanczos_error) +
                    ", slq " + fmt("%.3g", slq_error) + " (logdet " + fmt("%.6g", exact) + ")"};
}

// 5. SKI fidelity.
Outcome criterion_ski() {
  const Index n = 200;
  const Vector x = uniform_vector(n, 0.0, 10.0, 31);
  Matrix exact(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) exact(i, j) = rbf(x[i], x[j], 1.0, 1.0);
  }
  std::vector<double> errors;
  std::ostringstream detail;
  for (Index m : {50, 100, 200, 400}) {
    const auto op = ski_operator(KernelSpec::rbf(Vector::Ones(1), 1.0),
                                 std::span<const double>(x.data(), n), m);
    errors.push_back((op->to_dense() - exact).cwiseAbs().maxCoeff());
    detail << " m" << m << "=" << fmt("%.3g", errors.back());
  }
  const bool decreasing = std::is_sorted(errors.rbegin(), errors.rend(), std::less<>()) &&
                          std::adjacent_find(errors.begin(), errors.end()) == errors.end();
  return {errors.back() <= 1e-3 && decreasing, "max entry error" + detail.str()};
}

// 6. End-to-end GP agreement.
Outcome criterion_gp() {
  const Index n = 300;
  Matrix x(n, 2);
  x.col(0) = uniform_vector(n, 0.0, 5.0, 41);
  x.col(1) = uniform_vector(n, 0.0, 5.0, 42);
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      k(i, j) = rbf(x(i, 0), x(j, 0), 1.0, 1.0) * rbf(x(i, 1), x(j, 1), 1.0, 1.0);
    }
  }
  k.diagonal().array() += 0.05 + 1e-8;
  const Vector y = Matrix(k.llt().matrixL()) * gaussian_vector(n, 43);
  Matrix xstar(100, 2);
  xstar.col(0) = uniform_vector(100, 0.5, 4.5, 44);
  xstar.col(1) = uniform_vector(100, 0.5, 4.5, 45);

  GpModel model;
  model.kernel = KernelSpec::rbf(Vector::Ones(2), 1.0);
  model.noise_variance = 0.05;
  model.constant_mean = 0.0;
  model.mode = InferenceMode::kExactDense;
  const double exact_mll = mll(model, x, y);
  const Prediction exact = predict(TrainedPosterior::build(model, x, y), xstar);
  model.mode = InferenceMode::kSkip;
  model.skip.probe_seed = 46;
  const double skip_mll = mll(model, x, y);
  const Prediction approx = predict(TrainedPosterior::build(model, x, y), xstar);

  const double sd = std::sqrt((y.array() - y.mean()).square().mean());
  const double mean_diff = (approx.mean - exact.mean).cwiseAbs().maxCoeff();
  const double mll_rel = std::abs(skip_mll - exact_mll) / std::abs(exact_mll);
  return {mean_diff <= 1e-2 * sd && mll_rel <= 0.02,
          "max |mean diff| / std(y) " + fmt("%.3g", mean_diff / sd) + ", mll relative " +
              fmt("%.3g", mll_rel) + " (exact " + fmt("%.6g", exact_mll) + ", skip " +
              fmt("%.6g", skip_mll) + ")"};
}

// 7. Multi-task.
Outcome criterion_multitask() {
  // task_operator_mvm vs the expanded dense matrix.
  double task_error = 0.0;
  for (Index s : {1, 5, 12, 20}) {
    const Index n = 150;
    std::mt19937_64 engine(static_cast<std::uint64_t>(s));
    TaskAssignment assignment;
    assignment.num_tasks = s;
    for (Index i = 0; i < n; ++i) {
      assignment.task_of.push_back(i < s ? i : std::uniform_int_distribution<Index>(0, s - 1)(engine));
    }
    Coregionalization coreg;
    coreg.b = gaussian_matrix(s, 2, 60 + static_cast<std::uint64_t>(s));
    coreg.kappa = uniform_vector(s, 0.0, 1.0, 70 + static_cast<std::uint64_t>(s));
    const Matrix m = coreg.b * coreg.b.transpose() + Matrix(coreg.kappa.asDiagonal());
    Matrix dense(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) dense(i, j) = m(assignment.task_of[i], assignment.task_of[j]);
    }
    const Vector v = gaussian_vector(n, 80 + static_cast<std::uint64_t>(s));
    const Vector expected = dense * v;
    task_error = std::max(task_error, (task_operator_mvm(assignment, coreg, v) - expected)
                                          .cwiseAbs()
                                          .maxCoeff() /
                                          std::max(1.0, expected.cwiseAbs().maxCoeff()));
  }

  // Gibbs sweep evaluation count.
  const SyntheticTasks counted = synthetic_growth_curves(7, 3, 8, 90);
  ClusterMllEvaluator count_eval(counted.data, {});
  const GibbsSweepResult sweep =
      gibbs_sweep(initial_cluster_state(counted.data, 3, 90), count_eval);
  const bool count_ok = sweep.mll_evaluations == 3u * 7u;

  // Two tasks, two clusters: the four assignments are enumerable.
  const SyntheticTasks toy = synthetic_growth_curves(2, 2, 6, 91);
  ClusterState state = initial_cluster_state(toy.data, 2, 92);
  state.hyper = default_cluster_hyperparameters(toy.data);
  ClusterMllEvaluator toy_eval(toy.data, {});
  Vector exact(4);
  for (Index code = 0; code < 4; ++code) {
    exact[code] = cluster_kernel_mll({code / 2, code % 2}, 2, state.hyper, toy.data, {}, 0);
  }
  exact = (exact.array() - exact.maxCoeff()).exp();
  exact /= exact.sum();
  Vector empirical = Vector::Zero(4);
  constexpr int kSweeps = 5000;
  for (int t = 0; t < kSweeps; ++t) {
    state = gibbs_sweep(state, toy_eval).state;
    empirical[state.lambda[0] * 2 + state.lambda[1]] += 1.0;
  }
  empirical /= kSweeps;
  const double tv = 0.5 * (empirical - exact).cwiseAbs().sum();

  std::ostringstream detail;
  detail << "task mvm error " << fmt("%.3g", task_error) << ", sweep evaluations "
         << sweep.mll_evaluations << " (c*s=21), TV " << fmt("%.4f", tv) << " (exact "
         << fmt("%.3f", exact[0]) << "/" << fmt("%.3f", exact[1]) << "/"
         << fmt("%.3f", exact[2]) << "/" << fmt("%.3f", exact[3]) << ")";
  return {task_error <= 1e-12 && count_ok && tv <= 0.05, detail.str()};
}

// 8. Cluster recovery, membership concentration and extrapolation.
Outcome criterion_cluster_recovery() {
  constexpr int kSeeds = 10;
  const std::vector<Index> reveals{0, 2, 5, 10, 20};
  int recovered = 0;
  std::vector<std::vector<double>> concentration(reveals.size());
  std::ostringstream detail;
  detail << "ARI:";
  for (int seed = 0; seed < kSeeds; ++seed) {
    // 15 training tasks plus one new task from cluster 0.
    const SyntheticTasks syn = synthetic_growth_curves(16, 3, 20, static_cast<std::uint64_t>(seed));
    std::vector<Index> train_tasks(15);
    for (Index t = 0; t < 15; ++t) train_tasks[t] = t;
    const MultitaskData train = syn.data.subset_tasks(train_tasks);
    ClusterFitSettings settings;
    settings.num_clusters = 3;
    settings.sweeps = 20;
    settings.burn_in = 5;
    settings.seed = static_cast<std::uint64_t>(seed);
    const ClusterFitResult fit = fit_cluster_model(train, settings);
    const std::vector<Index> truth(syn.cluster_of_task.begin(), syn.cluster_of_task.begin() + 15);
    const double ari = adjusted_rand_index(fit.state.lambda, truth);
    if (ari >= 0.9) ++recovered;
    detail << " " << fmt("%.2f", ari);

    const std::vector<Index> rows = syn.data.rows_of_task(15);
    for (std::size_t k = 0; k < reveals.size(); ++k) {
      const Index shown = reveals[k];
      Vector xn(shown);
      Vector yn(shown);
      for (Index p = 0; p < shown; ++p) {
        xn[p] = syn.data.x[rows[p]];
        yn[p] = syn.data.y[rows[p]];
      }
      const TaskPrediction p = predict_task(fit.state, train, xn, yn, Vector::Zero(1),
                                            settings.inference, 0);
      concentration[k].push_back(p.membership.maxCoeff());
    }
  }
  bool nondecreasing = true;
  double previous = 0.0;
  detail << "; median max-membership by revealed points:";
  for (std::size_t k = 0; k < reveals.size(); ++k) {
    const double m = median(concentration[k]);
    detail << " " << reveals[k] << "->" << fmt("%.3f", m);
    if (m < previous - 1e-12) nondecreasing = false;
    previous = m;
  }

  cli::MultitaskOptions options;
  options.task_counts = {15};
  options.seed = 0;
  const cli::MultitaskReport report = cli::run_multitask(options);
  const cli::ExtrapolationRow& row = report.extrapolation.back();
  const bool better = row.num_tasks == 15 && row.multitask_rmse < row.single_task_rmse;
  detail << "; extrapolation RMSE multitask " << fmt("%.3f", row.multitask_rmse)
         << " vs single-task " << fmt("%.3f", row.single_task_rmse);
  detail << "; recovered " << recovered << "/" << kSeeds;
  return {recovered >= 8 && nondecreasing && better, detail.str()};
}

// 9. bench-inducing shape check.
Outcome criterion_inducing_scaling() {
  cli::BenchInducingOptions options;
  const std::vector<cli::InducingRow> rows = cli::bench_inducing(options);
  // Least-squares slope of log time against log m.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::ostringstream detail;
  detail << "seconds per mll:";
  for (const auto& row : rows) {
    const double lx = std::log(static_cast<double>(row.m));
    const double ly = std::log(row.seconds_per_mll);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    detail << " m" << row.m << "=" << fmt("%.3g", row.seconds_per_mll);
  }
  const auto k = static_cast<double>(rows.size());
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  const double ratio = rows.back().seconds_per_mll / rows.front().seconds_per_mll;
  const double quadratic = std::pow(static_cast<double>(rows.back().m) / rows.front().m, 2.0);
  detail << "; log-log slope " << fmt("%.3f", slope) << ", t(400)/t(50) " << fmt("%.2f", ratio)
         << " vs quadratic " << fmt("%.0f", quadratic);
  return {slope < 2.0 && ratio < quadratic, detail.str()};
}

// 10. Determinism.
Outcome criterion_determinism() {
  const fs::path dir = fs::temp_directory_path() / "skipgp_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "data.csv");
    out.precision(17);
    out << "x1,x2,y\n";
    const Vector a = uniform_vector(400, 0.0, 4.0, 101);
    const Vector b = uniform_vector(400, 0.0, 4.0, 102);
    const Vector e = gaussian_vector(400, 103);
    for (Index i = 0; i < 400; ++i) {
      out << a[i] << "," << b[i] << "," << std::sin(a[i]) * std::cos(b[i]) + 0.1 * e[i] << "\n";
    }
  }
  const nlohmann::json config = {
      {"command", "fit"},
      {"data", {{"path", "data.csv"}, {"features", {"x1", "x2"}}, {"target", "y"}}},
      {"inference", {{"mode", "skip"}, {"rank", 40}, {"num_probes", 10}}},
      {"optimizer", {{"steps", 10}}},
      {"seed", 17},
      {"output_dir", "out"}};
  const cli::RunConfig run = cli::parse_run_config(config, dir);

  const auto read_file = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto strip_timing = [](nlohmann::json j) {
    j.erase("timing");
    return j.dump();
  };
  cli::run_fit(run);
  const std::string metrics1 = strip_timing(nlohmann::json::parse(read_file(dir / "out" / "metrics.json")));
  const std::string model1 = read_file(dir / "out" / "model.json");
  cli::run_fit(run);
  const std::string metrics2 = strip_timing(nlohmann::json::parse(read_file(dir / "out" / "metrics.json")));
  const std::string model2 = read_file(dir / "out" / "model.json");
  fs::remove_all(dir);
  const bool same = metrics1 == metrics2 && model1 == model2;
  return {same, std::string("metrics (without timing) ") + (metrics1 == metrics2 ? "identical" : "differ") +
                    ", model.json " + (model1 == model2 ? "identical" : "differ") + " across two runs"};
}

const std::map<int, std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::map<int, std::pair<std::string, std::function<Outcome()>>> table{
      {1, {"MVM accuracy vs rank", criterion_mvm_accuracy}},
      {2, {"full-rank exactness", criterion_full_rank}},
      {3, {"operator-apply budgets", criterion_apply_budget}},
      {4, {"Krylov correctness", criterion_krylov}},
      {5, {"SKI fidelity", criterion_ski}},
      {6, {"GP skip vs exact", criterion_gp}},
      {7, {"multi-task operators and Gibbs", criterion_multitask}},
      {8, {"cluster recovery", criterion_cluster_recovery}},
      {9, {"inducing-point scaling", criterion_inducing_scaling}},
      {10, {"determinism", criterion_determinism}},
  };
  return table;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skipgp acceptance suite"};
  int selected = 0;
  app.add_option("--criterion", selected, "run a single criterion (1-10)")
      ->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (const auto& [id, entry] : criteria()) {
    if (selected != 0 && id != selected) continue;
    Outcome outcome;
    const auto start = Clock::now();
    try {
      outcome = entry.second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", outcome.pass ? "PASS" : "FAIL", id,
                entry.first.c_str(), outcome.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
    all_pass = all_pass && outcome.pass;
  }
  return all_pass ? 0 : 1;
}
