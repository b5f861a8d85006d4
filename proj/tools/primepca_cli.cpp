// primepca command-line interface.
//
//   primepca simulate --config cfg.json --seed 7 --out dir
//   primepca fit      --input y.csv --method primepca --K 2 --out dir
//   primepca bench    --config cfg.json --threads 4 --out dir
//   primepca scores   --frame v.csv --input y.csv --out dir
//   primepca eval     --a v1.csv --b v2.csv
//
// Exit status: 0 on success, 2 on usage or configuration errors, 1 when a
// computation fails.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "primepca/baselines.hpp"
#include "primepca/error.hpp"
#include "primepca/estimators.hpp"
#include "primepca/experiment.hpp"
#include "primepca/kernels.hpp"
#include "primepca/simulate.hpp"

namespace fs = std::filesystem;
using namespace primepca;

namespace {

// Configuration or input problems; reported with exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 1;
  bool seed_set = false;
  int threads = 0;
  std::string out;
};

fs::path out_dir(const Globals& g) {
  if (g.out.empty()) throw UsageError("--out is required for this command");
  fs::create_directories(g.out);
  return fs::path(g.out);
}

data::MatrixFormat format_of(const std::string& name) {
  try {
    return data::parse_format(name);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

std::string partial_name(data::MatrixFormat f) {
  return f == data::MatrixFormat::dense_csv ? "observed.csv" : "observed.txt";
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// n x K scores with NaN ("NA" on output) on rows outside `scores.rows`.
Matrix full_scores(const data::ScoreMatrix& scores, Index n, Index K) {
  Matrix out = Matrix::Constant(n, K, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < scores.rows.size(); ++r) {
    out.row(scores.rows[r]) = scores.scores.row(static_cast<Index>(r));
  }
  return out;
}

linalg::Frame load_frame(const std::string& path) {
  try {
    return linalg::Frame(data::load_dense(path));
  } catch (const InvalidArgument& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void write_trace(const std::vector<est::IterationRecord>& trace, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << "iter,step_change,loss_vs_truth,screened_rows\n";
  for (const auto& r : trace) {
    out << r.iter << ',' << harness::format_number(r.step_change) << ','
        << (r.loss ? harness::format_number(*r.loss) : "NA") << ',' << r.screened << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---- simulate ----

struct SimulateArgs {
  std::string config;
  std::string format = "dense-csv";
};

int run_simulate(const SimulateArgs& a, const Globals& g) {
  const fs::path cfg_path(a.config);
  const auto spec = harness::parse_simulation(read_file(cfg_path), cfg_path.parent_path());
  const auto fmt = format_of(a.format);
  const fs::path dir = out_dir(g);
  const auto sample = sim::generate_data(spec.data, sim::derive_seed(g.seed, 0));
  Mask mask = sim::generate_mask(spec.missingness, spec.data.n, spec.data.d, sim::derive_seed(g.seed, 1));
  const data::PartialMatrix pm(sample.y, mask);
  data::save_partial(pm, dir / partial_name(fmt), fmt);
  data::save_dense(mask.cast<double>(), dir / "mask.csv");
  data::save_dense(sample.y, dir / "complete.csv");
  data::save_dense(sample.truth.matrix(), dir / "truth_frame.csv");
  data::save_dense(sample.scores, dir / "truth_scores.csv");
  std::cout << "n=" << pm.rows() << " d=" << pm.cols() << " observed_fraction="
            << harness::format_number(data::observed_fraction(pm)) << "\n";
  return 0;
}

// ---- fit ----

struct FitArgs {
  std::string input;
  std::string format = "dense-csv";
  std::string method = "primepca";
  std::string truth;
  Index K = 1;
  int n_iter = 1000;
  double sigma_star = 3.0;
  double kappa_star = 1e-6;
  double lambda = 0.0;
  Index rank_max = 20;
  double thresh = 1e-5;
  int max_iter = 100;
  bool center = false;
};

int run_fit(const FitArgs& a, const Globals& g) {
  const fs::path dir = out_dir(g);
  data::PartialMatrix pm = data::load_partial(a.input, format_of(a.format));
  if (a.center) pm = data::center_columns(pm);
  std::optional<linalg::Frame> truth;
  if (!a.truth.empty()) truth = load_frame(a.truth);
  if (a.K < 1 || a.K > std::min(pm.rows(), pm.cols())) throw UsageError("--K must lie in [1, min(n, d)]");

  linalg::Frame frame;
  if (a.method == "init") {
    frame = est::init_estimator(pm, a.K).vectors;
  } else if (a.method == "primepca") {
    est::PrimeConfig cfg;
    cfg.K = a.K;
    cfg.n_iter = a.n_iter;
    cfg.sigma_star = a.sigma_star;
    cfg.kappa_star = a.kappa_star;
    try {
      est::validate(cfg);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    const auto report = est::prime_pca(cfg, pm, truth ? &*truth : nullptr);
    frame = report.estimate;
    write_trace(report.iterations, dir / "trace.csv");
    std::cout << "iterations=" << report.iterations_used << " stop="
              << (report.stop == est::StopReason::converged ? "converged" : "max_iter") << "\n";
  } else if (a.method == "hard_impute" || a.method == "soft_impute") {
    base::ImputeConfig cfg;
    cfg.lambda = a.lambda;
    cfg.rank_max = a.rank_max;
    cfg.thresh = a.thresh;
    cfg.max_iter = a.max_iter;
    try {
      base::validate(cfg);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    const auto res = a.method == "hard_impute" ? base::hard_impute(pm, a.K, cfg)
                                               : base::soft_impute(pm, cfg, a.K);
    frame = res.frame;
    data::save_dense(res.completed, dir / "completed.csv");
    std::cout << "iterations=" << res.iterations << " converged=" << (res.converged ? 1 : 0) << "\n";
  } else {
    throw UsageError("unknown method '" + a.method + "'");
  }
  data::save_dense(frame.matrix(), dir / "frame.csv");
  const auto scores = est::estimate_scores(frame, pm, a.K);
  data::save_dense(full_scores(scores, pm.rows(), a.K), dir / "scores.csv");
  if (truth) {
    if (truth->dim() != frame.dim() || truth->rank() != frame.rank()) {
      throw UsageError("--truth frame shape differs from the estimate");
    }
    std::cout << "loss=" << harness::format_number(linalg::sin_theta_loss(frame, *truth)) << "\n";
  }
  return 0;
}

// ---- bench ----

struct BenchArgs {
  std::string config;
  int reps = 0;
  bool quiet = false;
};

int run_bench(const BenchArgs& a, const Globals& g) {
  harness::ExperimentConfig cfg = harness::load_config(a.config);
  if (g.seed_set) cfg.base_seed = g.seed;
  if (g.threads > 0) cfg.threads = g.threads;
  if (a.reps > 0) cfg.reps = a.reps;
  const fs::path dir = out_dir(g);
  auto progress = [&](int rep, int done, int total) {
    if (!a.quiet) std::cerr << "rep " << rep << " done (" << done << "/" << total << ")\n";
  };
  const auto report = harness::run_experiment(cfg, progress);
  harness::write_report_csv(report, dir / cfg.report_csv);
  harness::write_trace_csv(report, dir / cfg.trace_csv);
  harness::write_report_json(cfg, report, dir / cfg.report_json);
  std::printf("%-24s %10s %10s %6s %8s\n", "method", "mean_loss", "se", "n_ok", "n_failed");
  for (const auto& s : report.summaries) {
    std::printf("%-24s %10s %10s %6d %8d\n", s.method.c_str(), harness::format_number(s.mean).c_str(),
                harness::format_number(s.se).c_str(), s.n_ok, s.n_failed);
  }
  return 0;
}

// ---- scores ----

struct ScoresArgs {
  std::string frame;
  std::string input;
  std::string format = "dense-csv";
  bool all_rows = false;
  bool covariance = false;
};

int run_scores(const ScoresArgs& a, const Globals& g) {
  const fs::path dir = out_dir(g);
  const auto v = load_frame(a.frame);
  const auto pm = data::load_partial(a.input, format_of(a.format));
  if (v.dim() != pm.cols()) throw UsageError("frame dimension differs from the data's column count");
  const Index K = v.rank();
  const auto scores = est::estimate_scores(
      v, pm, K, a.all_rows ? est::ScoreRows::any_observed : est::ScoreRows::more_than_k);
  const auto cov = est::reconstruct_covariance(v, scores, pm.rows());
  data::save_dense(full_scores(scores, pm.rows(), K), dir / "scores.csv");
  data::save_dense(cov.eigenvalues, dir / "spectrum.csv");
  if (a.covariance) data::save_dense(cov.sigma, dir / "covariance.csv");
  std::cout << "rows_scored=" << scores.rows.size() << " of " << pm.rows() << "\n";
  for (Index k = 0; k < cov.eigenvalues.size(); ++k) {
    std::cout << "eigenvalue_" << (k + 1) << "=" << harness::format_number(cov.eigenvalues(k)) << "\n";
  }
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string a, b;
};

int run_eval(const EvalArgs& a) {
  const auto v1 = load_frame(a.a);
  const auto v2 = load_frame(a.b);
  if (v1.dim() != v2.dim() || v1.rank() != v2.rank()) throw UsageError("frames differ in shape");
  std::cout << "sin_theta_loss " << harness::format_number(linalg::sin_theta_loss(v1, v2)) << "\n";
  std::cout << "two_to_inf " << harness::format_number(linalg::two_to_inf_distance(v1, v2)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PCA with heterogeneous missingness: estimators, baselines and experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--threads", g.threads, "Worker threads for repetitions")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");
  app.add_flag_callback("--isa-info", [] {
    std::cout << "kernels=" << simd::isa_name(simd::kernels().isa) << "\n";
  }, "Print the selected SIMD kernel set");

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate data and a mask from a JSON spec");
  sim_cmd->add_option("--config", sa.config, "JSON with data and missingness sections")->required();
  sim_cmd->add_option("--format", sa.format, "dense-csv or coordinate-triplet");

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Estimate the principal subspace of one data set");
  fit_cmd->add_option("--input", fa.input, "Partially observed matrix")->required();
  fit_cmd->add_option("--format", fa.format, "dense-csv or coordinate-triplet");
  fit_cmd->add_option("--method", fa.method, "primepca, init, hard_impute or soft_impute");
  fit_cmd->add_option("--K", fa.K, "Target rank")->required();
  fit_cmd->add_option("--n-iter", fa.n_iter, "primepca: maximum iterations");
  fit_cmd->add_option("--sigma-star", fa.sigma_star, "primepca: screening threshold");
  fit_cmd->add_option("--kappa-star", fa.kappa_star, "primepca: convergence threshold");
  fit_cmd->add_option("--lambda", fa.lambda, "soft_impute: regularisation");
  fit_cmd->add_option("--rank-max", fa.rank_max, "soft_impute: rank cap");
  fit_cmd->add_option("--thresh", fa.thresh, "impute: relative-change tolerance");
  fit_cmd->add_option("--max-iter", fa.max_iter, "impute: iteration cap");
  fit_cmd->add_option("--truth", fa.truth, "Frame CSV to report the loss against");
  fit_cmd->add_flag("--center", fa.center, "De-mean columns over observed entries first");

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Run a Monte Carlo experiment from a JSON config");
  bench_cmd->add_option("--config", ba.config, "Experiment JSON")->required();
  bench_cmd->add_option("--reps", ba.reps, "Override the number of repetitions")->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--quiet", ba.quiet, "No progress lines");

  ScoresArgs sc;
  auto* scores_cmd = app.add_subcommand("scores", "Principal scores and covariance spectrum");
  scores_cmd->add_option("--frame", sc.frame, "Frame CSV")->required();
  scores_cmd->add_option("--input", sc.input, "Partially observed matrix")->required();
  scores_cmd->add_option("--format", sc.format, "dense-csv or coordinate-triplet");
  scores_cmd->add_flag("--all-rows", sc.all_rows, "Score every row with an observation");
  scores_cmd->add_flag("--covariance", sc.covariance, "Also write the d x d covariance estimate");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Compare two frames");
  eval_cmd->add_option("--a", ea.a, "First frame CSV")->required();
  eval_cmd->add_option("--b", ea.b, "Second frame CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim_cmd) return run_simulate(sa, g);
    if (*fit_cmd) return run_fit(fa, g);
    if (*bench_cmd) return run_bench(ba, g);
    if (*scores_cmd) return run_scores(sc, g);
    if (*eval_cmd) return run_eval(ea);
  } catch (const UsageError& e) {
    std::cerr << "primepca: error: " << e.what() << "\n" << app.help() ;
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "primepca: error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "primepca: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "primepca: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
