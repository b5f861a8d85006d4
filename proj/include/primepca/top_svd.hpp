#pragma once
// Leading singular triplets of matrices of the form  A = L R^T + S  with L, R
// thin dense factors and S sparse. Imputed data matrices in primePCA and in
// the hard/soft-impute baselines all have this form, so products with A cost
// O(nnz + (n + d) q) rather than O(n d).

#include <span>
#include <vector>

#include "primepca/linalg.hpp"
#include "primepca/sparse_pattern.hpp"

namespace primepca::linalg {

// Non-owning view: `left`, `right` and `pattern` must outlive the operator.
class LowRankPlusSparse {
 public:
  LowRankPlusSparse(const Matrix& left, const Matrix& right, const SparsePattern& pattern,
                    std::span<const double> csr_values);

  Index rows() const noexcept { return pattern_->rows(); }
  Index cols() const noexcept { return pattern_->cols(); }

  // out = A x   (x: cols x b, out: rows x b)
  void apply(const Matrix& x, Matrix& out) const;
  // out = A^T z (z: rows x b, out: cols x b)
  void apply_transpose(const Matrix& z, Matrix& out) const;

  Matrix to_dense() const;

 private:
  const Matrix* left_;
  const Matrix* right_;
  const SparsePattern* pattern_;
  std::span<const double> csr_;
  std::vector<double> csc_;
};

struct TopSvdOptions {
  Index oversample = 2;
  int max_iter = 500;
  // Converged when ||A^T u_k - s_k v_k|| <= tol * s_1 for every requested k.
  double tol = 1e-12;
  // Triplets whose Ritz value plus residual stays below `threshold` need not
  // converge (used by singular-value thresholding, where they are discarded).
  double threshold = 0.0;
};

// Block subspace iteration with Rayleigh-Ritz extraction. `start` (d x q)
// seeds the first q block columns; remaining columns come from a fixed
// internal generator, so the result is deterministic. Throws ConvergenceError.
SvdFactors top_svd(const LowRankPlusSparse& op, Index r, const Matrix* start = nullptr,
                   const TopSvdOptions& options = {});

// top_svd, falling back to a dense SVD of the materialised operator when the
// iteration does not converge or the problem is small.
SvdFactors top_svd_robust(const LowRankPlusSparse& op, Index r, const Matrix* start = nullptr,
                          const TopSvdOptions& options = {});

}  // namespace primepca::linalg
