#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "primepca/linalg.hpp"

namespace primepca::linalg {

// Row- and column-compressed index structure of a 0/1 mask. Entries are
// numbered in row-major (CSR) order; `csc_source()` maps each CSC slot back to
// its CSR slot, so values laid out along the rows are re-laid along the
// columns with one gather.
class SparsePattern {
 public:
  SparsePattern() = default;

  static SparsePattern from_mask(const Mask& mask);
  // Pattern restricted to `rows` (in the given order), renumbered 0..rows.size().
  SparsePattern subset_rows(std::span<const Index> rows) const;

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  Index nnz() const noexcept { return static_cast<Index>(col_idx_.size()); }

  Index row_begin(Index i) const noexcept { return row_ptr_[static_cast<std::size_t>(i)]; }
  Index row_size(Index i) const noexcept {
    return row_ptr_[static_cast<std::size_t>(i) + 1] - row_ptr_[static_cast<std::size_t>(i)];
  }
  std::span<const std::int32_t> row_cols(Index i) const noexcept {
    return {col_idx_.data() + row_begin(i), static_cast<std::size_t>(row_size(i))};
  }

  Index col_begin(Index j) const noexcept { return col_ptr_[static_cast<std::size_t>(j)]; }
  Index col_size(Index j) const noexcept {
    return col_ptr_[static_cast<std::size_t>(j) + 1] - col_ptr_[static_cast<std::size_t>(j)];
  }
  std::span<const std::int32_t> col_rows(Index j) const noexcept {
    return {row_idx_.data() + col_begin(j), static_cast<std::size_t>(col_size(j))};
  }

  // csc_values[p] = csr_values[csc_source()[p]]
  const std::vector<std::int32_t>& csc_source() const noexcept { return csc_src_; }
  void to_csc(std::span<const double> csr_values, std::span<double> csc_values) const;

 private:
  void build_columns();

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<std::int32_t> row_ptr_{0};
  std::vector<std::int32_t> col_idx_;
  std::vector<std::int32_t> col_ptr_{0};
  std::vector<std::int32_t> row_idx_;
  std::vector<std::int32_t> csc_src_;
};

}  // namespace primepca::linalg
