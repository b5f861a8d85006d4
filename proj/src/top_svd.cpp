#include "primepca/top_svd.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "primepca/error.hpp"
#include "primepca/kernels.hpp"

namespace primepca::linalg {

namespace {

// Below this many entries a dense SVD is cheaper than subspace iteration.
constexpr Index kDenseEntries = 40000;

Matrix orthonormal_basis(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

Matrix starting_block(Index d, Index b, const Matrix* start) {
  Matrix x(d, b);
  Index filled = 0;
  if (start != nullptr) {
    if (start->rows() != d) throw InvalidArgument("top_svd: start block has wrong row count");
    filled = std::min(b, start->cols());
    x.leftCols(filled) = start->leftCols(filled);
  }
  std::mt19937_64 gen(0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(d * 131 + b));
  for (Index c = filled; c < b; ++c) {
    for (Index i = 0; i < d; ++i) {
      x(i, c) = static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5;
    }
  }
  return orthonormal_basis(x);
}

}  // namespace

LowRankPlusSparse::LowRankPlusSparse(const Matrix& left, const Matrix& right,
                                     const SparsePattern& pattern,
                                     std::span<const double> csr_values)
    : left_(&left), right_(&right), pattern_(&pattern), csr_(csr_values) {
  if (left.rows() != pattern.rows() || right.rows() != pattern.cols() ||
      left.cols() != right.cols()) {
    throw InvalidArgument("LowRankPlusSparse: factor shapes do not match pattern");
  }
  if (static_cast<Index>(csr_values.size()) != pattern.nnz()) {
    throw InvalidArgument("LowRankPlusSparse: value count does not match pattern");
  }
  csc_.resize(csr_values.size());
  pattern.to_csc(csr_values, csc_);
}

void LowRankPlusSparse::apply(const Matrix& x, Matrix& out) const {
  const Index n = rows();
  if (left_->cols() > 0) {
    out.noalias() = *left_ * (right_->transpose() * x);
  } else {
    out.setZero(n, x.cols());
  }
  const auto& p = *pattern_;
  for (Index c = 0; c < x.cols(); ++c) {
    const double* xc = x.col(c).data();
    double* oc = out.col(c).data();
    for (Index i = 0; i < n; ++i) {
      const auto cols = p.row_cols(i);
      oc[i] += simd::gather_dot(xc, cols.data(), csr_.data() + p.row_begin(i), cols.size());
    }
  }
}

void LowRankPlusSparse::apply_transpose(const Matrix& z, Matrix& out) const {
  const Index d = cols();
  if (left_->cols() > 0) {
    out.noalias() = *right_ * (left_->transpose() * z);
  } else {
    out.setZero(d, z.cols());
  }
  const auto& p = *pattern_;
  for (Index c = 0; c < z.cols(); ++c) {
    const double* zc = z.col(c).data();
    double* oc = out.col(c).data();
    for (Index j = 0; j < d; ++j) {
      const auto rows = p.col_rows(j);
      oc[j] += simd::gather_dot(zc, rows.data(), csc_.data() + p.col_begin(j), rows.size());
    }
  }
}

Matrix LowRankPlusSparse::to_dense() const {
  Matrix a = *left_ * right_->transpose();
  const auto& p = *pattern_;
  for (Index i = 0; i < rows(); ++i) {
    const auto cols = p.row_cols(i);
    const double* v = csr_.data() + p.row_begin(i);
    for (std::size_t k = 0; k < cols.size(); ++k) a(i, cols[k]) += v[k];
  }
  return a;
}

SvdFactors top_svd(const LowRankPlusSparse& op, Index r, const Matrix* start,
                   const TopSvdOptions& options) {
  const Index n = op.rows();
  const Index d = op.cols();
  const Index m = std::min(n, d);
  if (r < 1 || r > m) throw InvalidArgument("top_svd: rank out of range");
  const Index b = std::min(m, r + std::max<Index>(options.oversample, 0));

  Matrix x = starting_block(d, b, start);
  Matrix z(n, b);
  Matrix t(d, b);
  double best_res = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int it = 1; it <= options.max_iter; ++it) {
    op.apply(x, z);
    // A x = Qz Rz = Qz P S H^T  =>  A (x H) = (Qz P) S
    Eigen::HouseholderQR<Matrix> qr(z);
    const Matrix qz = qr.householderQ() * Matrix::Identity(n, b);
    const Matrix rz = qr.matrixQR().topRows(b).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Matrix> small(rz, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector s = small.singularValues();
    const Matrix u = qz * small.matrixU();
    const Matrix v = x * small.matrixV();

    op.apply_transpose(u, t);
    const double s1 = s(0);
    if (s1 == 0.0) {
      return SvdFactors{Frame(u.leftCols(r)), s.head(r), Frame(orthonormal_basis(v.leftCols(r)))};
    }
    double worst = 0.0;
    for (Index k = 0; k < r; ++k) {
      const double res = (t.col(k) - s(k) * v.col(k)).norm();
      if (s(k) + res > options.threshold) worst = std::max(worst, res);
    }
    const double rel = worst / s1;
    if (rel <= options.tol) {
      return SvdFactors{Frame(u.leftCols(r)), s.head(r), Frame(v.leftCols(r))};
    }
    // Accept a stalled residual once it is far below any tolerance we use
    // downstream; rounding can keep it a little above `tol`.
    if (rel < 0.5 * best_res) {
      best_res = rel;
      since_best = 0;
    } else if (++since_best >= 10 && best_res <= 1e3 * options.tol) {
      return SvdFactors{Frame(u.leftCols(r)), s.head(r), Frame(v.leftCols(r))};
    }
    x = orthonormal_basis(t);
  }
  throw ConvergenceError("top_svd: subspace iteration did not reach tolerance", options.max_iter);
}

SvdFactors top_svd_robust(const LowRankPlusSparse& op, Index r, const Matrix* start,
                          const TopSvdOptions& options) {
  if (op.rows() * op.cols() > kDenseEntries) {
    try {
      return top_svd(op, r, start, options);
    } catch (const ConvergenceError&) {
      // fall through to the dense path
    }
  }
  return thin_svd(op.to_dense(), r);
}

}  // namespace primepca::linalg
