#include "primepca/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "primepca/error.hpp"

namespace primepca::harness {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Rejects keys outside `allowed` so that typos fail loudly.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ParseError(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
T get_or(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + "." + key + ": wrong type");
  }
}

template <class T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
  return get_or<T>(obj, key, where, T{});
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

sim::FrameSource parse_frame(const json& f, const std::filesystem::path& base) {
  const std::string where = "data.frame";
  const auto type = require<std::string>(f, "type", where);
  if (type == "block_sign") {
    check_keys(f, where, {"type"});
    return sim::BlockSign{};
  }
  if (type == "seeded_gaussian") {
    check_keys(f, where, {"type", "samples", "seed", "max_incoherence"});
    sim::SeededGaussianEigvecs s;
    s.samples = get_or<Index>(f, "samples", where, s.samples);
    s.seed = get_or<std::uint64_t>(f, "seed", where, s.seed);
    s.max_incoherence = get_or<double>(f, "max_incoherence", where, s.max_incoherence);
    return s;
  }
  if (type == "explicit") {
    check_keys(f, where, {"type", "path", "columns"});
    Matrix m;
    if (f.contains("path")) {
      m = data::load_dense(resolve(base, require<std::string>(f, "path", where)));
    } else {
      const auto cols = require<std::vector<std::vector<double>>>(f, "columns", where);
      if (cols.empty() || cols.front().empty()) throw ParseError(where + ": empty frame");
      m.resize(static_cast<Index>(cols.front().size()), static_cast<Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) {
        if (cols[k].size() != cols.front().size()) throw ParseError(where + ": ragged columns");
        for (std::size_t j = 0; j < cols[k].size(); ++j) {
          m(static_cast<Index>(j), static_cast<Index>(k)) = cols[k][j];
        }
      }
    }
    try {
      return sim::ExplicitFrame{linalg::Frame(std::move(m))};
    } catch (const InvalidArgument& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  throw ParseError(where + ": unknown frame type '" + type + "'");
}

sim::DataModelSpec parse_data(const json& d, const std::filesystem::path& base) {
  const std::string where = "data";
  check_keys(d, where, {"n", "d", "K", "score_variances", "score_variance", "noise", "frame"});
  sim::DataModelSpec s;
  s.n = require<Index>(d, "n", where);
  s.d = require<Index>(d, "d", where);
  s.K = require<Index>(d, "K", where);
  if (d.contains("score_variances")) {
    const auto v = require<std::vector<double>>(d, "score_variances", where);
    s.score_variances = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  } else {
    const double v = require<double>(d, "score_variance", where);
    s.score_variances = Vector::Constant(std::max<Index>(s.K, 0), v);
  }
  s.noise = get_or<bool>(d, "noise", where, false);
  if (d.contains("frame")) s.frame = parse_frame(d.at("frame"), base);
  try {
    sim::validate(s);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  return s;
}

std::pair<double, double> range_of(const json& m, const char* key, const std::string& where,
                                   std::pair<double, double> fallback) {
  if (!m.contains(key)) return fallback;
  const auto v = require<std::vector<double>>(m, key, where);
  if (v.size() != 2) throw ParseError(where + "." + key + ": expected [lo, hi]");
  return {v[0], v[1]};
}

sim::MissingnessSpec parse_missingness(const json& m, const sim::DataModelSpec& data,
                                       const std::filesystem::path& base) {
  const std::string where = "missingness";
  const auto type = require<std::string>(m, "type", where);
  sim::MissingnessSpec spec;
  if (type == "homogeneous" || type == "H1") {
    check_keys(m, where, {"type", "p"});
    spec = sim::Homogeneous{get_or<double>(m, "p", where, 0.05)};
  } else if (type == "row_col_product" || type == "H2") {
    check_keys(m, where, {"type", "row", "col"});
    sim::RowColProduct s;
    std::tie(s.row_lo, s.row_hi) = range_of(m, "row", where, {s.row_lo, s.row_hi});
    std::tie(s.col_lo, s.col_hi) = range_of(m, "col", where, {s.col_lo, s.col_hi});
    spec = s;
  } else if (type == "checker_columns" || type == "H3") {
    check_keys(m, where, {"type", "p_odd", "p_even"});
    sim::CheckerColumns s;
    s.p_odd = get_or<double>(m, "p_odd", where, s.p_odd);
    s.p_even = get_or<double>(m, "p_even", where, s.p_even);
    spec = s;
  } else if (type == "checker_rows" || type == "H4") {
    check_keys(m, where, {"type", "p_odd", "p_even"});
    sim::CheckerRows s;
    s.p_odd = get_or<double>(m, "p_odd", where, s.p_odd);
    s.p_even = get_or<double>(m, "p_even", where, s.p_even);
    spec = s;
  } else if (type == "two_pattern") {
    check_keys(m, where, {"type"});
    spec = sim::TwoPattern{};
  } else if (type == "explicit") {
    check_keys(m, where, {"type", "path"});
    spec = sim::ExplicitProbs{data::load_dense(resolve(base, require<std::string>(m, "path", where)))};
  } else {
    throw ParseError(where + ": unknown mechanism '" + type + "'");
  }
  try {
    sim::validate(spec, data.n, data.d);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  return spec;
}

MethodSpec parse_method(const json& m, std::size_t index) {
  const std::string where = "methods[" + std::to_string(index) + "]";
  const auto type = require<std::string>(m, "type", where);
  MethodSpec s;
  if (type == "init_only") {
    s.kind = MethodKind::init_only;
    check_keys(m, where, {"type", "K", "label", "center"});
  } else if (type == "primepca") {
    s.kind = MethodKind::primepca;
    check_keys(m, where, {"type", "K", "label", "n_iter", "sigma_star", "kappa_star", "center"});
    s.prime.n_iter = get_or<int>(m, "n_iter", where, s.prime.n_iter);
    s.prime.sigma_star = get_or<double>(m, "sigma_star", where, s.prime.sigma_star);
    s.prime.kappa_star = get_or<double>(m, "kappa_star", where, s.prime.kappa_star);
  } else if (type == "hard_impute") {
    s.kind = MethodKind::hard_impute;
    check_keys(m, where, {"type", "K", "label", "thresh", "max_iter"});
  } else if (type == "soft_impute_oracle") {
    s.kind = MethodKind::soft_impute_oracle;
    check_keys(m, where,
               {"type", "K", "label", "thresh", "max_iter", "rank_max", "grid", "grid_points"});
    s.impute.rank_max = get_or<Index>(m, "rank_max", where, s.impute.rank_max);
    s.grid = get_or<std::vector<double>>(m, "grid", where, {});
    s.grid_points = get_or<int>(m, "grid_points", where, s.grid_points);
    if (s.grid_points < 1) throw ParseError(where + ": grid_points must be at least 1");
  } else {
    throw ParseError(where + ": unknown method type '" + type + "'");
  }
  s.prime.K = require<Index>(m, "K", where);
  s.prime.center = get_or<bool>(m, "center", where, false);
  s.impute.thresh = get_or<double>(m, "thresh", where, s.impute.thresh);
  s.impute.max_iter = get_or<int>(m, "max_iter", where, s.impute.max_iter);
  s.label = get_or<std::string>(m, "label", where, type);
  try {
    est::validate(s.prime);
    if (s.kind == MethodKind::hard_impute || s.kind == MethodKind::soft_impute_oracle) {
      base::validate(s.impute);
    }
  } catch (const InvalidArgument& e) {
    throw ParseError(where + ": " + e.what());
  }
  return s;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One repetition, all methods.
std::vector<MethodRun> run_rep(const ExperimentConfig& cfg, int rep, std::uint64_t rep_seed) {
  std::vector<MethodRun> out;
  sim::SimulatedData sample;
  data::PartialMatrix pm;
  std::string setup_error;
  try {
    sample = sim::generate_data(cfg.data, sim::derive_seed(rep_seed, 0));
    Mask mask = sim::generate_mask(cfg.missingness, cfg.data.n, cfg.data.d, sim::derive_seed(rep_seed, 1));
    pm = data::PartialMatrix(sample.y, std::move(mask));
  } catch (const std::exception& e) {
    setup_error = std::string("data generation: ") + e.what();
  }

  // Initialisers shared between init_only and primepca, keyed by (K, center).
  std::map<std::pair<Index, bool>, std::pair<linalg::Frame, double>> inits;
  auto initial = [&](Index K, bool center) -> const std::pair<linalg::Frame, double>& {
    const auto key = std::make_pair(K, center);
    auto it = inits.find(key);
    if (it == inits.end()) {
      const auto t0 = Clock::now();
      auto v = est::init_estimator(center ? data::center_columns(pm) : pm, K).vectors;
      it = inits.emplace(key, std::make_pair(std::move(v), seconds_since(t0))).first;
    }
    return it->second;
  };

  for (const auto& m : cfg.methods) {
    MethodRun run;
    run.method = m.label;
    run.rep = rep;
    if (!setup_error.empty()) {
      run.error = setup_error;
      out.push_back(std::move(run));
      continue;
    }
    const auto t0 = Clock::now();
    try {
      const linalg::Frame truth = sample.truth.leading(m.K());
      switch (m.kind) {
        case MethodKind::init_only: {
          const auto& [v, secs] = initial(m.K(), m.prime.center);
          run.loss = linalg::sin_theta_loss(v, truth);
          run.runtime_s = secs;
          break;
        }
        case MethodKind::primepca: {
          const auto& [v0, secs] = initial(m.K(), m.prime.center);
          const auto t1 = Clock::now();
          est::PrimeConfig pc = m.prime;
          pc.center = false;
          const auto report =
              est::prime_pca(pc, v0, m.prime.center ? data::center_columns(pm) : pm, &truth);
          run.loss = linalg::sin_theta_loss(report.estimate, truth);
          run.runtime_s = secs + seconds_since(t1);
          run.trace = report.iterations;
          break;
        }
        case MethodKind::hard_impute: {
          const auto res = base::hard_impute(pm, m.K(), m.impute);
          run.loss = linalg::sin_theta_loss(res.frame, truth);
          run.runtime_s = seconds_since(t0);
          break;
        }
        case MethodKind::soft_impute_oracle: {
          const auto grid = m.grid.empty() ? base::default_lambda_grid(pm, m.grid_points) : m.grid;
          const auto choice = base::oracle_lambda(pm, truth, m.K(), grid, m.impute, 1);
          run.loss = choice.loss;
          run.runtime_s = seconds_since(t0);
          break;
        }
      }
    } catch (const std::exception& e) {
      run.loss.reset();
      run.error = e.what();
      run.runtime_s = seconds_since(t0);
    }
    out.push_back(std::move(run));
  }
  return out;
}

template <class Row>
void write_csv(const std::filesystem::path& path, const std::string& header, const Row& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header << '\n';
  rows(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

std::string_view method_kind_name(MethodKind kind) noexcept {
  switch (kind) {
    case MethodKind::init_only: return "init_only";
    case MethodKind::primepca: return "primepca";
    case MethodKind::hard_impute: return "hard_impute";
    case MethodKind::soft_impute_oracle: return "soft_impute_oracle";
  }
  return "unknown";
}

std::string format_number(double x) {
  if (std::isnan(x)) return "NA";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

SimulationSpec parse_simulation(std::string_view json_text, const std::filesystem::path& base_dir) {
  const json root = parse_json(json_text);
  if (!root.is_object()) throw ParseError("config: expected a JSON object");
  if (!root.contains("data") || !root.contains("missingness")) {
    throw ParseError("config: 'data' and 'missingness' sections are required");
  }
  SimulationSpec s;
  s.data = parse_data(root.at("data"), base_dir);
  s.missingness = parse_missingness(root.at("missingness"), s.data, base_dir);
  return s;
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  const json root = parse_json(json_text);
  check_keys(root, "config",
             {"data", "missingness", "methods", "reps", "base_seed", "threads", "outputs", "description"});
  ExperimentConfig cfg;
  const auto sim_spec = parse_simulation(json_text, base_dir);
  cfg.data = sim_spec.data;
  cfg.missingness = sim_spec.missingness;
  if (!root.contains("methods") || !root.at("methods").is_array() || root.at("methods").empty()) {
    throw ParseError("config: 'methods' must be a nonempty array");
  }
  std::set<std::string> labels;
  for (std::size_t k = 0; k < root.at("methods").size(); ++k) {
    MethodSpec m = parse_method(root.at("methods").at(k), k);
    if (m.K() > cfg.data.K) {
      throw ParseError("methods[" + std::to_string(k) + "]: K exceeds the data model's K");
    }
    if (!labels.insert(m.label).second) {
      throw ParseError("methods[" + std::to_string(k) + "]: duplicate label '" + m.label + "'");
    }
    cfg.methods.push_back(std::move(m));
  }
  cfg.reps = get_or<int>(root, "reps", "config", cfg.reps);
  cfg.base_seed = get_or<std::uint64_t>(root, "base_seed", "config", cfg.base_seed);
  cfg.threads = get_or<int>(root, "threads", "config", cfg.threads);
  if (cfg.reps < 1) throw ParseError("config: reps must be at least 1");
  if (cfg.threads < 1) throw ParseError("config: threads must be at least 1");
  if (root.contains("outputs")) {
    const json& o = root.at("outputs");
    check_keys(o, "outputs", {"report_csv", "trace_csv", "report_json"});
    cfg.report_csv = get_or<std::string>(o, "report_csv", "outputs", cfg.report_csv);
    cfg.trace_csv = get_or<std::string>(o, "trace_csv", "outputs", cfg.trace_csv);
    cfg.report_json = get_or<std::string>(o, "report_json", "outputs", cfg.report_json);
  }
  cfg.echo = root.dump();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text(path), path.parent_path());
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  if (cfg.methods.empty()) throw InvalidArgument("run_experiment: no methods");
  if (cfg.reps < 1) throw InvalidArgument("run_experiment: reps must be at least 1");
  const auto t0 = Clock::now();
  ExperimentReport report;
  report.rep_seeds.resize(static_cast<std::size_t>(cfg.reps));
  for (int r = 0; r < cfg.reps; ++r) {
    report.rep_seeds[static_cast<std::size_t>(r)] = sim::derive_seed(cfg.base_seed, static_cast<std::uint64_t>(r));
  }
  // Resolve memoised frames once, before workers start.
  (void)sim::resolve_frame(cfg.data);

  std::vector<std::vector<MethodRun>> per_rep(static_cast<std::size_t>(cfg.reps));
  std::atomic<int> next{0};
  std::atomic<int> done{0};
  std::mutex progress_mu;
  auto worker = [&] {
    for (int r = next++; r < cfg.reps; r = next++) {
      per_rep[static_cast<std::size_t>(r)] = run_rep(cfg, r, report.rep_seeds[static_cast<std::size_t>(r)]);
      const int finished = ++done;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mu);
        progress(r, finished, cfg.reps);
      }
    }
  };
  const int nt = std::clamp(cfg.threads, 1, cfg.reps);
  std::vector<std::thread> pool;
  for (int w = 1; w < nt; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (auto& runs : per_rep) {
    for (auto& run : runs) report.runs.push_back(std::move(run));
  }
  report.summaries = summarize(cfg, report.runs);
  report.wall_time_s = seconds_since(t0);
  return report;
}

std::vector<MethodSummary> summarize(const ExperimentConfig& cfg, const std::vector<MethodRun>& runs) {
  std::vector<MethodSummary> out;
  for (const auto& m : cfg.methods) {
    MethodSummary s;
    s.method = m.label;
    std::vector<double> losses;
    double runtime = 0.0;
    int count = 0;
    for (const auto& run : runs) {
      if (run.method != m.label) continue;
      ++count;
      runtime += run.runtime_s;
      if (run.loss) {
        losses.push_back(*run.loss);
      } else {
        ++s.n_failed;
        s.failures.emplace_back(run.rep, run.error);
      }
    }
    s.n_ok = static_cast<int>(losses.size());
    s.mean_runtime_s = count > 0 ? runtime / count : 0.0;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (losses.empty()) {
      s.mean = nan;
      s.se = nan;
    } else {
      double sum = 0.0;
      for (const double l : losses) sum += l;
      s.mean = sum / static_cast<double>(losses.size());
      if (losses.size() < 2) {
        s.se = nan;
      } else {
        double ss = 0.0;
        for (const double l : losses) ss += (l - s.mean) * (l - s.mean);
        const double sd = std::sqrt(ss / static_cast<double>(losses.size() - 1));
        s.se = sd / std::sqrt(static_cast<double>(losses.size()));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_report_csv(const ExperimentReport& report, const std::filesystem::path& path) {
  write_csv(path, "method,rep,loss,runtime_s", [&](std::ostream& out) {
    for (const auto& run : report.runs) {
      out << run.method << ',' << run.rep << ','
          << (run.loss ? format_number(*run.loss) : std::string("NA")) << ','
          << format_number(run.runtime_s) << '\n';
    }
  });
}

void write_trace_csv(const ExperimentReport& report, const std::filesystem::path& path) {
  write_csv(path, "method,rep,iter,step_change,loss_vs_truth,screened_rows", [&](std::ostream& out) {
    for (const auto& run : report.runs) {
      for (const auto& rec : run.trace) {
        out << run.method << ',' << run.rep << ',' << rec.iter << ','
            << format_number(rec.step_change) << ','
            << (rec.loss ? format_number(*rec.loss) : std::string("NA")) << ',' << rec.screened
            << '\n';
      }
    }
  });
}

void write_report_json(const ExperimentConfig& cfg, const ExperimentReport& report,
                       const std::filesystem::path& path) {
  json j;
  j["config"] = json::parse(cfg.echo.empty() ? "{}" : cfg.echo);
  j["base_seed"] = cfg.base_seed;
  j["reps"] = cfg.reps;
  j["threads"] = cfg.threads;
  j["rep_seeds"] = report.rep_seeds;
  j["wall_time_s"] = report.wall_time_s;
  json methods = json::array();
  for (const auto& s : report.summaries) {
    json m;
    m["method"] = s.method;
    m["mean_loss"] = number_or_null(s.mean);
    m["se"] = number_or_null(s.se);
    m["n_ok"] = s.n_ok;
    m["n_failed"] = s.n_failed;
    m["mean_runtime_s"] = s.mean_runtime_s;
    json failures = json::array();
    for (const auto& [rep, msg] : s.failures) failures.push_back({{"rep", rep}, {"error", msg}});
    m["failures"] = failures;
    methods.push_back(m);
  }
  j["methods"] = methods;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace primepca::harness
