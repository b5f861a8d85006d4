#include "primepca/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "primepca/error.hpp"
#include "primepca/kernels.hpp"
#include "primepca/top_svd.hpp"

namespace primepca::base {

namespace {

constexpr double kSvdTol = 1e-10;

// x_ij = <a_i, b_j> on the observed entries, with a_i, b_j columns of the
// transposed factors.
void observed_entries(const Matrix& at, const Matrix& bt, const linalg::SparsePattern& p,
                      std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(p.nnz()), 0.0);
  const std::size_t q = static_cast<std::size_t>(at.rows());
  if (q == 0) return;
  for (Index i = 0; i < p.rows(); ++i) {
    const auto cols = p.row_cols(i);
    const double* ai = at.col(i).data();
    double* o = out.data() + p.row_begin(i);
    for (std::size_t k = 0; k < cols.size(); ++k) o[k] = simd::dot(ai, bt.col(cols[k]).data(), q);
  }
}

}  // namespace

void validate(const ImputeConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
    throw InvalidArgument("impute: lambda must be finite and nonnegative");
  }
  if (cfg.rank_max < 1) throw InvalidArgument("impute: rank_max must be at least 1");
  if (!(cfg.thresh > 0.0)) throw InvalidArgument("impute: thresh must be positive");
  if (cfg.max_iter < 1) throw InvalidArgument("impute: max_iter must be at least 1");
}

ImputeResult soft_impute(const PartialMatrix& pm, const ImputeConfig& cfg, Index K) {
  validate(cfg);
  const Index n = pm.rows(), d = pm.cols();
  if (K < 1 || K > std::min(n, d)) throw InvalidArgument("soft_impute: K must lie in [1, min(n, d)]");
  const Index r = std::min(std::max(cfg.rank_max, K), std::min(n, d));
  const auto& pattern = pm.pattern();
  const auto y = pm.observed_values();

  // X = A B^T with A = U diag(s), B = V. Start from X = Y_Omega, for which
  // the first input  X + P_Omega(Y - X)  is Y_Omega itself.
  Matrix a(n, 0), b(d, 0);
  Vector s(0);
  std::vector<double> resid(y.begin(), y.end());
  double prev_norm2 = 0.0;
  for (const double v : y) prev_norm2 += v * v;

  linalg::TopSvdOptions opts;
  opts.tol = kSvdTol;
  opts.threshold = cfg.lambda;

  ImputeResult result;
  Matrix last_right;
  std::vector<double> x_obs;
  for (int t = 1; t <= cfg.max_iter; ++t) {
    const linalg::LowRankPlusSparse op(a, b, pattern, resid);
    const auto svd = linalg::top_svd_robust(op, r, b.cols() > 0 ? &b : nullptr, opts);
    last_right = svd.right.matrix();

    Index kept = 0;
    while (kept < r && svd.singular_values(kept) > cfg.lambda) ++kept;
    const Vector s_new = (svd.singular_values.head(kept).array() - cfg.lambda).matrix();
    Matrix a_new = svd.left.matrix().leftCols(kept) * s_new.asDiagonal();
    Matrix b_new = svd.right.matrix().leftCols(kept);

    const Matrix at = a_new.transpose(), bt = b_new.transpose();
    observed_entries(at, bt, pattern, x_obs);
    double cross = 0.0;
    if (t == 1) {
      for (std::size_t k = 0; k < x_obs.size(); ++k) cross += x_obs[k] * y[k];
    } else if (kept > 0 && a.cols() > 0) {
      cross = ((a_new.transpose() * a) * (b.transpose() * b_new)).trace();
    }
    const double norm2 = s_new.squaredNorm();
    double fit_loss = 0.0;
    for (std::size_t k = 0; k < x_obs.size(); ++k) {
      resid[k] = y[k] - x_obs[k];
      fit_loss += resid[k] * resid[k];
    }
    result.objective.push_back(0.5 * fit_loss + cfg.lambda * s_new.sum());

    const double change2 = std::max(0.0, norm2 + prev_norm2 - 2.0 * cross);
    const bool converged = prev_norm2 > 0.0 ? std::sqrt(change2 / prev_norm2) < cfg.thresh
                                            : norm2 == 0.0;
    a = std::move(a_new);
    b = std::move(b_new);
    s = s_new;
    prev_norm2 = norm2;
    result.iterations = t;
    if (converged) {
      result.converged = true;
      break;
    }
  }

  result.fit = a * b.transpose();
  result.completed = result.fit;
  for (Index i = 0; i < n; ++i) {
    const auto cols = pattern.row_cols(i);
    const double* yi = y.data() + pattern.row_begin(i);
    for (std::size_t k = 0; k < cols.size(); ++k) result.completed(i, cols[k]) = yi[k];
  }
  result.frame = linalg::Frame(last_right.leftCols(K));
  result.singular_values = s;
  return result;
}

ImputeResult hard_impute(const PartialMatrix& pm, Index K, ImputeConfig cfg) {
  cfg.lambda = 0.0;
  cfg.rank_max = K;
  return soft_impute(pm, cfg, K);
}

double top_singular_value(const PartialMatrix& pm) {
  const Matrix a(pm.rows(), 0), b(pm.cols(), 0);
  const linalg::LowRankPlusSparse op(a, b, pm.pattern(), pm.observed_values());
  linalg::TopSvdOptions opts;
  opts.tol = kSvdTol;
  return linalg::top_svd_robust(op, 1, nullptr, opts).singular_values(0);
}

std::vector<double> default_lambda_grid(const PartialMatrix& pm, int points) {
  if (points < 1) throw InvalidArgument("default_lambda_grid: need at least one point");
  const double s1 = top_singular_value(pm);
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    const double e = points == 1 ? 0.0 : -3.0 + 3.0 * k / (points - 1);
    grid[static_cast<std::size_t>(k)] = s1 * std::pow(10.0, e);
  }
  return grid;
}

OracleChoice oracle_lambda(const PartialMatrix& pm, const linalg::Frame& truth, Index K,
                           const std::vector<double>& grid, const ImputeConfig& cfg, int threads) {
  if (grid.empty()) throw InvalidArgument("oracle_lambda: empty grid");
  if (truth.dim() != pm.cols() || truth.rank() != K) {
    throw InvalidArgument("oracle_lambda: truth frame must be d x K");
  }
  OracleChoice out;
  out.losses.assign(grid.size(), 0.0);
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t g = next++; g < grid.size(); g = next++) {
      try {
        ImputeConfig c = cfg;
        c.lambda = grid[g];
        out.losses[g] = linalg::sin_theta_loss(soft_impute(pm, c, K).frame, truth);
      } catch (...) {
        errors[g] = std::current_exception();
      }
    }
  };
  const int nt = std::clamp<int>(threads, 1, static_cast<int>(grid.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < nt; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const double l = out.losses[g], lb = out.losses[best];
    if (l < lb || (l == lb && grid[g] < grid[best])) best = g;
  }
  out.lambda = grid[best];
  out.loss = out.losses[best];
  return out;
}

}  // namespace primepca::base
