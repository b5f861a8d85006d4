#pragma once
// Matrix-completion baselines: softImpute (iterative singular value
// soft-thresholding) and hardImpute (iterative rank-K truncated SVD).
//
// Iterates are kept in factored form, so each step costs a few products with
// a low-rank-plus-sparse matrix rather than a dense n x d SVD.

#include <vector>

#include "primepca/linalg.hpp"
#include "primepca/partial_matrix.hpp"

namespace primepca::base {

using data::PartialMatrix;

struct ImputeConfig {
  double lambda = 0.0;
  Index rank_max = 20;
  double thresh = 1e-5;   // stop when ||X_t - X_{t-1}||_F / ||X_{t-1}||_F < thresh
  int max_iter = 100;
};

void validate(const ImputeConfig& cfg);

struct ImputeResult {
  Matrix fit;                   // low-rank iterate X
  Matrix completed;             // P_Omega(Y) + P_Omega^c(X)
  linalg::Frame frame;          // top-K right singular vectors of the last thresholded matrix
  Vector singular_values;       // of X, nonincreasing (may be shorter than rank_max)
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective;   // 0.5 ||Y_Omega - X_Omega||_F^2 + lambda ||X||_*, per iteration
};

// Starts from X = Y_Omega. Soft-thresholding keeps singular vectors, so the
// frame spans the leading right singular space of X whenever rank(X) >= K;
// otherwise it also carries directions that were shrunk to zero.
ImputeResult soft_impute(const PartialMatrix& pm, const ImputeConfig& cfg, Index K);

// soft_impute with lambda = 0 and rank_max = K.
ImputeResult hard_impute(const PartialMatrix& pm, Index K, ImputeConfig cfg = {});

// sigma_1(Y_Omega)
double top_singular_value(const PartialMatrix& pm);

// `points` log-spaced values from 1e-3 sigma_1(Y_Omega) up to sigma_1(Y_Omega).
std::vector<double> default_lambda_grid(const PartialMatrix& pm, int points = 20);

struct OracleChoice {
  double lambda = 0.0;
  double loss = 0.0;
  std::vector<double> losses;   // one per grid point
};

// Exhaustive search over `grid` for the smallest sin-theta loss to `truth`;
// ties go to the smaller lambda. Grid points run on up to `threads` threads.
OracleChoice oracle_lambda(const PartialMatrix& pm, const linalg::Frame& truth, Index K,
                           const std::vector<double>& grid, const ImputeConfig& cfg = {},
                           int threads = 1);

}  // namespace primepca::base
