#pragma once
// Monte Carlo experiment runner: JSON configuration, per-repetition data and
// mask generation, method dispatch, aggregation and report writers.
//
// Repetition r uses seed s_r = derive_seed(base_seed, r); data come from
// stream derive_seed(s_r, 0) and the mask from derive_seed(s_r, 1). Results
// are keyed by repetition, so the thread count never changes the numbers.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "primepca/baselines.hpp"
#include "primepca/estimators.hpp"
#include "primepca/simulate.hpp"

namespace primepca::harness {

enum class MethodKind { init_only, primepca, hard_impute, soft_impute_oracle };

std::string_view method_kind_name(MethodKind kind) noexcept;

struct MethodSpec {
  MethodKind kind = MethodKind::primepca;
  std::string label;
  est::PrimeConfig prime;          // primepca, init_only (K only)
  base::ImputeConfig impute;       // hard_impute, soft_impute_oracle
  int grid_points = 20;            // soft_impute_oracle default grid size
  std::vector<double> grid;        // explicit lambda grid; overrides grid_points
  Index K() const noexcept { return prime.K; }
};

struct ExperimentConfig {
  sim::DataModelSpec data;
  sim::MissingnessSpec missingness;
  std::vector<MethodSpec> methods;
  int reps = 20;
  std::uint64_t base_seed = 1;
  int threads = 1;
  std::string report_csv = "report.csv";
  std::string trace_csv = "trace.csv";
  std::string report_json = "report.json";
  std::string echo;   // the configuration as parsed, compact JSON
};

// Throws ParseError on malformed JSON, unknown keys or invalid values.
// Relative paths inside the configuration resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view json_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Data + missingness sections only (for `simulate`).
struct SimulationSpec {
  sim::DataModelSpec data;
  sim::MissingnessSpec missingness;
};
SimulationSpec parse_simulation(std::string_view json_text, const std::filesystem::path& base_dir = {});

struct MethodRun {
  std::string method;
  int rep = 0;
  std::optional<double> loss;      // empty when the run failed
  double runtime_s = 0.0;
  std::string error;
  std::vector<est::IterationRecord> trace;   // primepca only
};

struct MethodSummary {
  std::string method;
  double mean = 0.0;     // NaN when no run succeeded
  double se = 0.0;       // sample sd / sqrt(n_ok); NaN when n_ok < 2
  double mean_runtime_s = 0.0;
  int n_ok = 0;
  int n_failed = 0;
  std::vector<std::pair<int, std::string>> failures;
};

struct ExperimentReport {
  std::vector<std::uint64_t> rep_seeds;
  std::vector<MethodRun> runs;          // rep-major, methods in config order
  std::vector<MethodSummary> summaries;
  double wall_time_s = 0.0;
};

// Called after each finished repetition (from worker threads, serialised).
using ProgressFn = std::function<void(int rep, int done, int total)>;

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

// Mean and standard error of the successful runs of each method.
std::vector<MethodSummary> summarize(const ExperimentConfig& cfg, const std::vector<MethodRun>& runs);

void write_report_csv(const ExperimentReport& report, const std::filesystem::path& path);
void write_trace_csv(const ExperimentReport& report, const std::filesystem::path& path);
void write_report_json(const ExperimentConfig& cfg, const ExperimentReport& report,
                       const std::filesystem::path& path);

// Shortest decimal text that reads back to the same double; "NA" for NaN.
std::string format_number(double x);

}  // namespace primepca::harness
