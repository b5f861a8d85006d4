#pragma once
// Principal-subspace estimators for partially observed data: inverse
// probability weighted covariances, the co-observation weighted initialiser,
// the projected-refinement step and its iteration with row screening, and
// score estimation.

#include <optional>
#include <span>
#include <vector>

#include "primepca/linalg.hpp"
#include "primepca/partial_matrix.hpp"

namespace primepca::est {

using data::PartialMatrix;
using linalg::Frame;

// Y_Omega^T Y_Omega (sparse accumulation for sparse masks).
Matrix observed_gram(const PartialMatrix& pm);

// W = p^-2 {1 1^T - (1 - p) I}.
Matrix homogeneous_weights(double p, Index d);

// (n^-1 Y_Omega^T Y_Omega) o W with W from `p`, or from the observed
// fraction when `p` is not given. Throws InvalidArgument if p is 0.
Matrix ipw_covariance(const PartialMatrix& pm, std::optional<double> p = std::nullopt);

// W_jk = n / N_jk where N = Omega^T Omega is positive, 0 elsewhere.
Matrix init_weights(const PartialMatrix& pm);

// (n^-1 Y_Omega^T Y_Omega) o init_weights(pm). May be indefinite.
Matrix init_covariance(const PartialMatrix& pm);

// Top-K eigenpairs of init_covariance(pm).
linalg::EigenPairs init_estimator(const PartialMatrix& pm, Index K);

// One imputation-and-SVD step over every row of `pm`. Each row needs at least
// one observed entry.
Frame refine(Index K, const Frame& v_in, const PartialMatrix& pm);

// Rows i with |J_i| > K and sigma_K(v_J) >= sqrt(|J_i|) / (sqrt(d) sigma_star).
std::vector<Index> screen_rows(Index K, const Frame& v, const PartialMatrix& pm, double sigma_star);

struct PrimeConfig {
  Index K = 1;
  int n_iter = 1000;
  double sigma_star = 3.0;
  double kappa_star = 0.0;
  bool center = false;
};

void validate(const PrimeConfig& cfg);

enum class StopReason { converged, max_iter };

struct IterationRecord {
  int iter = 0;                       // 1-based
  double step_change = 0.0;           // L(V^(t), V^(t-1))
  Index screened = 0;                 // |I^(t-1)|
  std::optional<double> loss;         // L(V^(t), truth) when a truth is supplied
};

struct TrajectoryReport {
  std::vector<IterationRecord> iterations;
  Frame estimate;
  int iterations_used = 0;
  StopReason stop = StopReason::max_iter;
};

// Iterates screen + refine from `v0`. Throws ScreeningError naming the
// iteration when no row survives screening.
TrajectoryReport prime_pca(const PrimeConfig& cfg, const Frame& v0, const PartialMatrix& pm,
                           const Frame* truth = nullptr);

// prime_pca started from init_estimator(pm, K).
TrajectoryReport prime_pca(const PrimeConfig& cfg, const PartialMatrix& pm,
                           const Frame* truth = nullptr);

enum class ScoreRows {
  more_than_k,    // rows with |J_i| > K
  any_observed,   // rows with |J_i| >= 1
};

// u_i = (v_J)^+ y_{i,J} for the selected rows.
data::ScoreMatrix estimate_scores(const Frame& v, const PartialMatrix& pm, Index K,
                                  ScoreRows rows = ScoreRows::more_than_k);

struct CovarianceEstimate {
  Matrix sigma;         // n^-1 sum_i (v u_i)(v u_i)^T
  Vector eigenvalues;   // top K, descending
};

CovarianceEstimate reconstruct_covariance(const Frame& v, const data::ScoreMatrix& scores, Index n);

// sqrt(d) * max |v_jk|
double incoherence(const Frame& v);

}  // namespace primepca::est
