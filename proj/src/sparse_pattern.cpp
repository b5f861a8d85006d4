#include "primepca/sparse_pattern.hpp"

#include <limits>

#include "primepca/error.hpp"
#include "primepca/kernels.hpp"

namespace primepca::linalg {

SparsePattern SparsePattern::from_mask(const Mask& mask) {
  constexpr auto kMax = static_cast<Index>(std::numeric_limits<std::int32_t>::max());
  if (mask.rows() >= kMax || mask.cols() >= kMax || mask.size() >= kMax) {
    throw InvalidArgument("SparsePattern: mask too large for 32-bit indices");
  }
  SparsePattern p;
  p.rows_ = mask.rows();
  p.cols_ = mask.cols();
  // Count per row with a column sweep (mask is column-major), then fill.
  std::vector<std::int32_t> counts(static_cast<std::size_t>(p.rows_) + 1, 0);
  for (Index j = 0; j < p.cols_; ++j) {
    const std::uint8_t* col = mask.col(j).data();
    for (Index i = 0; i < p.rows_; ++i) counts[static_cast<std::size_t>(i) + 1] += col[i] != 0;
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(p.rows_); ++i) counts[i + 1] += counts[i];
  p.row_ptr_ = counts;
  p.col_idx_.assign(static_cast<std::size_t>(counts.back()), 0);
  std::vector<std::int32_t> fill(counts.begin(), counts.end() - 1);
  for (Index j = 0; j < p.cols_; ++j) {
    const std::uint8_t* col = mask.col(j).data();
    for (Index i = 0; i < p.rows_; ++i) {
      if (col[i] != 0) p.col_idx_[static_cast<std::size_t>(fill[static_cast<std::size_t>(i)]++)] =
                           static_cast<std::int32_t>(j);
    }
  }
  p.build_columns();
  return p;
}

SparsePattern SparsePattern::subset_rows(std::span<const Index> rows) const {
  SparsePattern p;
  p.rows_ = static_cast<Index>(rows.size());
  p.cols_ = cols_;
  p.row_ptr_.assign(1, 0);
  p.row_ptr_.reserve(rows.size() + 1);
  for (const Index src : rows) {
    if (src < 0 || src >= rows_) throw InvalidArgument("SparsePattern::subset_rows: row out of range");
    const auto cols = row_cols(src);
    p.col_idx_.insert(p.col_idx_.end(), cols.begin(), cols.end());
    p.row_ptr_.push_back(static_cast<std::int32_t>(p.col_idx_.size()));
  }
  p.build_columns();
  return p;
}

void SparsePattern::build_columns() {
  // Counting sort into column order; rows within a column stay ascending.
  col_ptr_.assign(static_cast<std::size_t>(cols_) + 1, 0);
  for (const auto j : col_idx_) ++col_ptr_[static_cast<std::size_t>(j) + 1];
  for (std::size_t j = 0; j < static_cast<std::size_t>(cols_); ++j) col_ptr_[j + 1] += col_ptr_[j];
  std::vector<std::int32_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
  row_idx_.assign(col_idx_.size(), 0);
  csc_src_.assign(col_idx_.size(), 0);
  for (Index i = 0; i < rows_; ++i) {
    const Index end = row_begin(i) + row_size(i);
    for (Index k = row_begin(i); k < end; ++k) {
      const auto j = static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)]);
      const auto pos = static_cast<std::size_t>(fill[j]++);
      row_idx_[pos] = static_cast<std::int32_t>(i);
      csc_src_[pos] = static_cast<std::int32_t>(k);
    }
  }
}

void SparsePattern::to_csc(std::span<const double> csr_values, std::span<double> csc_values) const {
  if (csr_values.size() != csc_src_.size() || csc_values.size() != csc_src_.size()) {
    throw InvalidArgument("SparsePattern::to_csc: value count does not match nnz");
  }
  simd::gather(csr_values.data(), csc_src_.data(), csc_values.data(), csc_src_.size());
}

}  // namespace primepca::linalg
