#include "primepca/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "primepca/error.hpp"
#include "primepca/kernels.hpp"
#include "primepca/top_svd.hpp"

namespace primepca::est {

namespace {

// Above this observed fraction a dense rank update beats pairwise accumulation.
constexpr double kDenseGramDensity = 0.2;

// Factorises v_J = U S H^T for the rows J of a frame by one-sided Jacobi
// rotations, then solves least-squares problems against it. Scratch buffers
// are reused across rows.
class RowSolver {
 public:
  explicit RowSolver(const Matrix& v) : v_(v), k_(v.cols()), h_(k_ * k_), sv_(k_) {}

  // Returns sigma_K(v_J); zero when |J| < K.
  double factor(std::span<const std::int32_t> cols) {
    m_ = cols.size();
    const std::size_t k = static_cast<std::size_t>(k_);
    g_.resize(m_ * k);
    a_.resize(m_ * k);
    for (std::size_t c = 0; c < k; ++c) {
      simd::gather(v_.col(static_cast<Index>(c)).data(), cols.data(), g_.data() + c * m_, m_);
    }
    std::copy(g_.begin(), g_.end(), a_.begin());
    std::fill(h_.begin(), h_.end(), 0.0);
    for (std::size_t c = 0; c < k; ++c) h_[c * k + c] = 1.0;

    constexpr double eps = 1e-15;
    constexpr int kMaxSweeps = 60;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
      bool rotated = false;
      for (std::size_t p = 0; p + 1 < k; ++p) {
        for (std::size_t q = p + 1; q < k; ++q) {
          double* ap = a_.data() + p * m_;
          double* aq = a_.data() + q * m_;
          const double alpha = simd::sum_squares(ap, m_);
          const double beta = simd::sum_squares(aq, m_);
          const double gamma = simd::dot(ap, aq, m_);
          if (alpha == 0.0 || beta == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) {
            continue;
          }
          rotated = true;
          const double zeta = (beta - alpha) / (2.0 * gamma);
          const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = c * t;
          rotate(ap, aq, m_, c, s);
          rotate(h_.data() + p * k, h_.data() + q * k, k, c, s);
        }
      }
      if (!rotated) break;
    }
    double smax = 0.0;
    double smin = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      sv_[c] = std::sqrt(simd::sum_squares(a_.data() + c * m_, m_));
      smax = std::max(smax, sv_[c]);
      smin = std::min(smin, sv_[c]);
    }
    smax_ = smax;
    return m_ < k ? 0.0 : smin;
  }

  // u = v_J^+ y with singular values <= kPinvTol * sigma_1 dropped.
  void solve(const double* y, double* u) const {
    const std::size_t k = static_cast<std::size_t>(k_);
    std::fill(u, u + k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      if (sv_[c] <= linalg::kPinvTol * smax_ || sv_[c] == 0.0) continue;
      const double coef = simd::dot(a_.data() + c * m_, y, m_) / (sv_[c] * sv_[c]);
      simd::axpy(coef, h_.data() + c * k, u, k);
    }
  }

  // r = y - v_J u
  void residual(const double* y, const double* u, double* r) const {
    std::copy(y, y + m_, r);
    for (std::size_t c = 0; c < static_cast<std::size_t>(k_); ++c) {
      simd::axpy(-u[c], g_.data() + c * m_, r, m_);
    }
  }

 private:
  static void rotate(double* x, double* y, std::size_t n, double c, double s) {
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = x[i];
      const double yi = y[i];
      x[i] = c * xi - s * yi;
      y[i] = s * xi + c * yi;
    }
  }

  const Matrix& v_;
  Index k_;
  std::size_t m_ = 0;
  std::vector<double> g_;    // v_J as gathered
  std::vector<double> a_;    // v_J H, orthogonal columns
  std::vector<double> h_;    // K x K rotation
  std::vector<double> sv_;
  double smax_ = 0.0;
};

struct Regression {
  std::vector<Index> rows;
  std::vector<double> scores;      // row-major, K per retained row
  std::vector<double> residuals;   // CSR order of the retained-row pattern
};

struct RowFilter {
  Index min_observed = 1;          // keep rows with |J_i| >= min_observed
  double sigma_star = 0.0;         // > 0 enables the sigma_K screen
};

Regression regress_rows(const Matrix& v, const PartialMatrix& pm, const RowFilter& filter,
                        bool need_residuals) {
  const auto& p = pm.pattern();
  const auto vals = pm.observed_values();
  const Index K = v.cols();
  const double sqrt_d = std::sqrt(static_cast<double>(pm.cols()));
  RowSolver solver(v);
  Regression out;
  out.rows.reserve(static_cast<std::size_t>(pm.rows()));
  out.scores.reserve(static_cast<std::size_t>(pm.rows() * K));
  if (need_residuals) out.residuals.reserve(vals.size());
  std::vector<double> u(static_cast<std::size_t>(K));
  for (Index i = 0; i < pm.rows(); ++i) {
    const auto cols = p.row_cols(i);
    const Index m = static_cast<Index>(cols.size());
    if (m < filter.min_observed) continue;
    const double sk = solver.factor(cols);
    if (filter.sigma_star > 0.0 &&
        !(sk >= std::sqrt(static_cast<double>(m)) / (sqrt_d * filter.sigma_star))) {
      continue;
    }
    const double* y = vals.data() + p.row_begin(i);
    solver.solve(y, u.data());
    out.rows.push_back(i);
    out.scores.insert(out.scores.end(), u.begin(), u.end());
    if (need_residuals) {
      const std::size_t at = out.residuals.size();
      out.residuals.resize(at + static_cast<std::size_t>(m));
      solver.residual(y, u.data(), out.residuals.data() + at);
    }
  }
  return out;
}

Matrix scores_matrix(const Regression& reg, Index K) {
  Matrix u(static_cast<Index>(reg.rows.size()), K);
  for (Index r = 0; r < u.rows(); ++r) {
    for (Index k = 0; k < K; ++k) u(r, k) = reg.scores[static_cast<std::size_t>(r * K + k)];
  }
  return u;
}

// Top-K right singular vectors of  U_hat V^T + R  on the retained rows.
Frame refine_from(const Regression& reg, const Frame& v_in, const PartialMatrix& pm) {
  const Index K = v_in.rank();
  const auto sub = pm.pattern().subset_rows(reg.rows);
  if (K > std::min(sub.rows(), sub.cols())) {
    throw InvalidArgument("refine: K exceeds min(rows, d) of the retained data (" +
                          std::to_string(sub.rows()) + " rows)");
  }
  const Matrix u = scores_matrix(reg, K);
  const linalg::LowRankPlusSparse op(u, v_in.matrix(), sub, reg.residuals);
  return linalg::top_svd_robust(op, K, &v_in.matrix()).right;
}

void check_frame(const Frame& v, const PartialMatrix& pm, Index K, const char* who) {
  if (K < 1) throw InvalidArgument(std::string(who) + ": K must be positive");
  if (v.dim() != pm.cols()) {
    throw InvalidArgument(std::string(who) + ": frame dimension does not match data columns");
  }
  if (v.rank() != K) throw InvalidArgument(std::string(who) + ": frame rank differs from K");
}

}  // namespace

Matrix observed_gram(const PartialMatrix& pm) {
  const Index d = pm.cols();
  if (data::observed_fraction(pm) > kDenseGramDensity) {
    Matrix g = Matrix::Zero(d, d);
    g.selfadjointView<Eigen::Lower>().rankUpdate(pm.values().transpose());
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    return g;
  }
  Matrix g = Matrix::Zero(d, d);
  const auto& p = pm.pattern();
  const auto vals = pm.observed_values();
  for (Index i = 0; i < p.rows(); ++i) {
    const auto cols = p.row_cols(i);
    const double* y = vals.data() + p.row_begin(i);
    for (std::size_t a = 0; a < cols.size(); ++a) {
      double* gj = g.col(cols[a]).data();
      const double ya = y[a];
      for (std::size_t b = 0; b < cols.size(); ++b) gj[cols[b]] += ya * y[b];
    }
  }
  return g;
}

Matrix homogeneous_weights(double p, Index d) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("homogeneous_weights: p must lie in (0, 1]");
  Matrix w = Matrix::Constant(d, d, 1.0 / (p * p));
  w.diagonal().setConstant(1.0 / p);
  return w;
}

Matrix ipw_covariance(const PartialMatrix& pm, std::optional<double> p) {
  const double ph = p ? *p : data::observed_fraction(pm);
  if (!(ph > 0.0)) throw InvalidArgument("ipw_covariance: observation rate is zero");
  const Matrix g = observed_gram(pm) / static_cast<double>(pm.rows());
  return g.cwiseProduct(homogeneous_weights(ph, pm.cols()));
}

Matrix init_weights(const PartialMatrix& pm) {
  const Eigen::MatrixXi counts = data::coobservation_counts(pm);
  const double n = static_cast<double>(pm.rows());
  return counts.unaryExpr([n](int c) { return c > 0 ? n / static_cast<double>(c) : 0.0; });
}

Matrix init_covariance(const PartialMatrix& pm) {
  const Matrix g = observed_gram(pm) / static_cast<double>(pm.rows());
  return g.cwiseProduct(init_weights(pm));
}

linalg::EigenPairs init_estimator(const PartialMatrix& pm, Index K) {
  if (K < 1 || K > pm.cols()) throw InvalidArgument("init_estimator: K must lie in [1, d]");
  return linalg::top_k_eigenvectors(init_covariance(pm), K);
}

Frame refine(Index K, const Frame& v_in, const PartialMatrix& pm) {
  check_frame(v_in, pm, K, "refine");
  if (K > std::min(pm.rows(), pm.cols())) throw InvalidArgument("refine: K exceeds min(n, d)");
  for (Index i = 0; i < pm.rows(); ++i) {
    if (pm.row_observed(i) == 0) {
      throw InvalidArgument("refine: row " + std::to_string(i) + " has no observed entries");
    }
  }
  const Regression reg = regress_rows(v_in.matrix(), pm, RowFilter{1, 0.0}, true);
  return refine_from(reg, v_in, pm);
}

std::vector<Index> screen_rows(Index K, const Frame& v, const PartialMatrix& pm, double sigma_star) {
  check_frame(v, pm, K, "screen_rows");
  if (!(sigma_star > 0.0)) throw InvalidArgument("screen_rows: sigma_star must be positive");
  return regress_rows(v.matrix(), pm, RowFilter{K + 1, sigma_star}, false).rows;
}

void validate(const PrimeConfig& cfg) {
  if (cfg.K < 1) throw InvalidArgument("primepca: K must be at least 1");
  if (cfg.n_iter < 1) throw InvalidArgument("primepca: n_iter must be at least 1");
  if (!(cfg.sigma_star > 0.0)) throw InvalidArgument("primepca: sigma_star must be positive");
  if (!(cfg.kappa_star >= 0.0)) throw InvalidArgument("primepca: kappa_star must be nonnegative");
}

TrajectoryReport prime_pca(const PrimeConfig& cfg, const Frame& v0, const PartialMatrix& pm,
                           const Frame* truth) {
  validate(cfg);
  if (cfg.center) {
    PrimeConfig inner = cfg;
    inner.center = false;
    return prime_pca(inner, v0, data::center_columns(pm), truth);
  }
  check_frame(v0, pm, cfg.K, "primepca");
  if (truth != nullptr && (truth->dim() != v0.dim() || truth->rank() != v0.rank())) {
    throw InvalidArgument("primepca: truth frame shape differs from the estimate");
  }
  TrajectoryReport report;
  Frame current = v0;
  for (int t = 1; t <= cfg.n_iter; ++t) {
    const Regression reg =
        regress_rows(current.matrix(), pm, RowFilter{cfg.K + 1, cfg.sigma_star}, true);
    if (reg.rows.empty()) {
      throw ScreeningError("primepca: screening retained no rows at iteration " + std::to_string(t), t);
    }
    Frame next = refine_from(reg, current, pm);
    IterationRecord rec;
    rec.iter = t;
    rec.step_change = linalg::sin_theta_loss(next, current);
    rec.screened = static_cast<Index>(reg.rows.size());
    if (truth != nullptr) rec.loss = linalg::sin_theta_loss(next, *truth);
    report.iterations.push_back(rec);
    current = std::move(next);
    if (rec.step_change < cfg.kappa_star) {
      report.stop = StopReason::converged;
      break;
    }
  }
  report.iterations_used = static_cast<int>(report.iterations.size());
  report.estimate = std::move(current);
  return report;
}

TrajectoryReport prime_pca(const PrimeConfig& cfg, const PartialMatrix& pm, const Frame* truth) {
  validate(cfg);
  if (cfg.center) {
    PrimeConfig inner = cfg;
    inner.center = false;
    return prime_pca(inner, data::center_columns(pm), truth);
  }
  const Frame v0 = init_estimator(pm, cfg.K).vectors;
  return prime_pca(cfg, v0, pm, truth);
}

data::ScoreMatrix estimate_scores(const Frame& v, const PartialMatrix& pm, Index K, ScoreRows rows) {
  check_frame(v, pm, K, "estimate_scores");
  const Index min_obs = rows == ScoreRows::more_than_k ? K + 1 : 1;
  Regression reg = regress_rows(v.matrix(), pm, RowFilter{min_obs, 0.0}, false);
  data::ScoreMatrix out;
  out.scores = scores_matrix(reg, K);
  out.rows = std::move(reg.rows);
  return out;
}

CovarianceEstimate reconstruct_covariance(const Frame& v, const data::ScoreMatrix& scores, Index n) {
  if (n < 1) throw InvalidArgument("reconstruct_covariance: n must be positive");
  if (scores.scores.cols() != v.rank()) {
    throw InvalidArgument("reconstruct_covariance: score width differs from frame rank");
  }
  const Index K = v.rank();
  Matrix m = Matrix::Zero(K, K);
  if (scores.scores.rows() > 0) {
    m.selfadjointView<Eigen::Lower>().rankUpdate(scores.scores.transpose(),
                                                 1.0 / static_cast<double>(n));
    m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
  }
  CovarianceEstimate out;
  out.sigma = v.matrix() * m * v.matrix().transpose();
  // v has orthonormal columns, so the nonzero spectrum of sigma is that of m.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  out.eigenvalues = eig.eigenvalues().reverse();
  return out;
}

double incoherence(const Frame& v) {
  if (v.dim() == 0 || v.rank() == 0) return 0.0;
  return std::sqrt(static_cast<double>(v.dim())) * v.matrix().cwiseAbs().maxCoeff();
}

}  // namespace primepca::est
