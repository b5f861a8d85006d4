#include "primepca/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "primepca/error.hpp"
#include "primepca/kernels.hpp"

namespace primepca::linalg {

namespace {

void require_same_shape(const Frame& u, const Frame& v, const char* op) {
  if (u.dim() != v.dim() || u.rank() != v.rank()) {
    std::ostringstream msg;
    msg << op << ": frame shapes differ (" << u.dim() << "x" << u.rank() << " vs " << v.dim()
        << "x" << v.rank() << ")";
    throw InvalidArgument(msg.str());
  }
}

}  // namespace

bool all_finite(const Matrix& a) noexcept {
  const double* p = a.data();
  for (Index k = 0; k < a.size(); ++k) {
    if (!std::isfinite(p[k])) return false;
  }
  return true;
}

Frame::Frame(Matrix columns, double tol) : m_(std::move(columns)) {
  if (m_.cols() > m_.rows()) {
    throw InvalidArgument("Frame: rank " + std::to_string(m_.cols()) + " exceeds dimension " +
                          std::to_string(m_.rows()));
  }
  if (!all_finite(m_)) throw InvalidArgument("Frame: non-finite entry");
  const Matrix gram = m_.transpose() * m_;
  const double err = (gram - Matrix::Identity(m_.cols(), m_.cols())).cwiseAbs().maxCoeff();
  if (m_.cols() > 0 && err > tol) {
    throw InvalidArgument("Frame: columns not orthonormal (max |C^T C - I| = " +
                          std::to_string(err) + ")");
  }
}

Frame Frame::orthonormalized(const Matrix& a) {
  if (a.cols() > a.rows()) throw InvalidArgument("Frame::orthonormalized: more columns than rows");
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  return Frame(std::move(q));
}

Frame Frame::leading(Index k) const {
  if (k < 0 || k > rank()) throw InvalidArgument("Frame::leading: k out of range");
  return Frame(m_.leftCols(k));
}

Frame Frame::rotated(const Matrix& rotation) const {
  if (rotation.rows() != rank() || rotation.cols() != rank()) {
    throw InvalidArgument("Frame::rotated: rotation must be K x K");
  }
  return Frame(m_ * rotation);
}

SvdFactors thin_svd(const Matrix& a, Index r) {
  if (!all_finite(a)) throw InvalidArgument("thin_svd: non-finite entry");
  const Index m = std::min(a.rows(), a.cols());
  if (r < 0 || r > m) {
    throw InvalidArgument("thin_svd: rank bound " + std::to_string(r) + " exceeds min(rows, cols) = " +
                          std::to_string(m));
  }
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    // Eigen does not expose its sweep count; report the bound it iterates to.
    throw ConvergenceError("thin_svd: bidiagonal SVD did not converge", static_cast<int>(m));
  }
  const auto orthonormal = [](const Matrix& q) {
    return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff() <= 1e-10;
  };
  Matrix u = svd.matrixU().leftCols(r), v = svd.matrixV().leftCols(r);
  if (r > 0 && !(orthonormal(u) && orthonormal(v))) {
    // BDCSVD can leave zero columns for exactly zero singular values.
    Eigen::JacobiSVD<Matrix> jac(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return SvdFactors{Frame(jac.matrixU().leftCols(r)), jac.singularValues().head(r),
                      Frame(jac.matrixV().leftCols(r))};
  }
  return SvdFactors{Frame(std::move(u)), svd.singularValues().head(r), Frame(std::move(v))};
}

Matrix pseudoinverse(const Matrix& a, double tol) {
  const Index m = std::min(a.rows(), a.cols());
  if (m == 0) return Matrix::Zero(a.cols(), a.rows());
  const SvdFactors f = thin_svd(a, m);
  const double cutoff = tol * f.singular_values(0);
  Matrix scaled = f.right.matrix();
  for (Index k = 0; k < m; ++k) {
    const double s = f.singular_values(k);
    scaled.col(k) *= (s > cutoff && s > 0.0) ? 1.0 / s : 0.0;
  }
  return scaled * f.left.matrix().transpose();
}

Vector principal_angles(const Frame& u, const Frame& v) {
  require_same_shape(u, v, "principal_angles");
  const Matrix m = u.matrix().transpose() * v.matrix();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().cwiseMax(0.0).cwiseMin(1.0);
}

double sin_theta_loss(const Frame& u, const Frame& v) {
  require_same_shape(u, v, "sin_theta_loss");
  // ||v - u u^T v||_F^2 = sum_j (1 - cos^2 theta_j) for orthonormal frames; the
  // projection residual keeps full relative accuracy for tiny angles, where
  // 1 - cos^2 would cancel to zero below ~1e-8.
  const Matrix& a = u.matrix();
  const Matrix& b = v.matrix();
  if (a == b) return 0.0;
  const Matrix ab = a.transpose() * b;
  const double r1 = (b - a * ab).norm();
  const double r2 = (a - b * ab.transpose()).norm();
  const double loss = 0.5 * (r1 + r2);
  return std::clamp(loss, 0.0, std::sqrt(static_cast<double>(u.rank())));
}

Matrix procrustes_align(const Frame& v1, const Frame& v2) {
  require_same_shape(v1, v2, "procrustes_align");
  const Matrix m = v2.matrix().transpose() * v1.matrix();
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

double two_to_inf_distance(const Frame& v1, const Frame& v2) {
  require_same_shape(v1, v2, "two_to_inf_distance");
  if (v1.matrix() == v2.matrix()) return 0.0;
  const Matrix w = procrustes_align(v1, v2);
  const Matrix diff = v1.matrix() - v2.matrix() * w;
  return diff.rowwise().norm().maxCoeff();
}

MatrixNorms operator_norms(const Matrix& a) {
  if (a.size() == 0) return MatrixNorms{0, 0, 0, 0, 0, 0, 0};
  const Matrix abs = a.cwiseAbs();
  MatrixNorms n{};
  n.one_to_one = abs.colwise().sum().maxCoeff();
  n.inf_to_inf = abs.rowwise().sum().maxCoeff();
  n.two_to_inf = a.rowwise().norm().maxCoeff();
  n.frobenius = std::sqrt(simd::sum_squares(a.data(), static_cast<std::size_t>(a.size())));
  n.entrywise_l1 = abs.sum();
  n.entrywise_linf = abs.maxCoeff();
  n.op = Eigen::BDCSVD<Matrix>(a).singularValues()(0);
  return n;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("hadamard: shapes differ");
  }
  Matrix out(a.rows(), a.cols());
  simd::hadamard(a.data(), b.data(), out.data(), static_cast<std::size_t>(a.size()));
  return out;
}

Matrix hadamard_inverse(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      if (a(i, j) == 0.0) {
        throw InvalidArgument("hadamard_inverse: zero entry at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      }
      out(i, j) = 1.0 / a(i, j);
    }
  }
  return out;
}

EigenPairs top_k_eigenvectors(const Matrix& g, Index k) {
  if (g.rows() != g.cols()) throw InvalidArgument("top_k_eigenvectors: matrix not square");
  const Index d = g.rows();
  if (k < 0 || k > d) {
    throw InvalidArgument("top_k_eigenvectors: k = " + std::to_string(k) + " exceeds d = " +
                          std::to_string(d));
  }
  if (!all_finite(g)) throw InvalidArgument("top_k_eigenvectors: non-finite entry");
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  const double asym = (g - g.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    throw InvalidArgument("top_k_eigenvectors: matrix not symmetric (max |G - G^T| = " +
                          std::to_string(asym) + ")");
  }
  const Matrix sym = 0.5 * (g + g.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("top_k_eigenvectors: tridiagonal QR did not converge",
                           static_cast<int>(d));
  }
  // Eigen returns ascending eigenvalues.
  Matrix vecs(d, k);
  Vector vals(k);
  for (Index j = 0; j < k; ++j) {
    vecs.col(j) = es.eigenvectors().col(d - 1 - j);
    vals(j) = es.eigenvalues()(d - 1 - j);
  }
  return EigenPairs{Frame(std::move(vecs)), std::move(vals)};
}

}  // namespace primepca::linalg
