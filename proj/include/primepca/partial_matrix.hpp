#pragma once
// Partially observed data matrices: values Y_Omega (zero where unobserved)
// paired with the 0/1 revelation mask Omega.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "primepca/linalg.hpp"
#include "primepca/sparse_pattern.hpp"

namespace primepca::data {

class PartialMatrix {
 public:
  PartialMatrix();
  // Entries of `values` where mask == 0 are overwritten with 0. Throws on shape
  // mismatch or non-finite observed values.
  PartialMatrix(Matrix values, Mask mask);

  // Fully observed matrix.
  static PartialMatrix fully_observed(Matrix values);

  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  const Mask& mask() const noexcept { return mask_; }
  bool observed(Index i, Index j) const noexcept { return mask_(i, j) != 0; }

  // Row/column index structure of the mask.
  const linalg::SparsePattern& pattern() const noexcept { return *pattern_; }
  // Observed values in CSR order of pattern().
  std::span<const double> observed_values() const noexcept { return *csr_values_; }

  Index observed_count() const noexcept { return pattern_->nnz(); }
  Index row_observed(Index i) const noexcept { return pattern_->row_size(i); }

  PartialMatrix select_rows(std::span<const Index> rows) const;
  PartialMatrix scaled(double c) const;

 private:
  void build_index();

  Matrix values_;
  Mask mask_;
  // Shared between copies; never mutated after construction.
  std::shared_ptr<const linalg::SparsePattern> pattern_;
  std::shared_ptr<const std::vector<double>> csr_values_;
};

// Sorted observed column indices J_i per row, and their complements.
struct RowIndexSets {
  std::vector<std::vector<Index>> observed;
  std::vector<std::vector<Index>> missing;
};
RowIndexSets row_index_sets(const PartialMatrix& pm);

// Estimated principal scores u_i for a subset of rows.
struct ScoreMatrix {
  Matrix scores;              // |rows| x K
  std::vector<Index> rows;    // original row index of each score row
};

enum class MatrixFormat { dense_csv, coordinate_triplet };

MatrixFormat parse_format(std::string_view name);

// dense-csv: header-free, comma separated; empty cells and "NA" are missing.
// coordinate-triplet: header "n d nnz", then nnz lines "row col value"
// (1-based); unlisted entries are missing. Throws ParseError with the line
// number on malformed input.
PartialMatrix load_partial(const std::filesystem::path& path, MatrixFormat format);
void save_partial(const PartialMatrix& pm, const std::filesystem::path& path, MatrixFormat format);

// Header-free dense CSV of a fully observed matrix (frames, scores). Rows may
// contain "NA" only if `allow_missing` is set, in which case they read as NaN.
Matrix load_dense(const std::filesystem::path& path, bool allow_missing = false);
void save_dense(const Matrix& m, const std::filesystem::path& path);

// Fraction of observed entries, ||Omega||_1 / (n d).
double observed_fraction(const PartialMatrix& pm);

// N = Omega^T Omega, N_jk = number of rows observing both j and k.
Eigen::MatrixXi coobservation_counts(const PartialMatrix& pm);

// Subtracts from every observed entry the mean of the observed entries of its
// column. Columns with no observations are left as is.
PartialMatrix center_columns(const PartialMatrix& pm);

}  // namespace primepca::data
