#pragma once
// Dense linear-algebra primitives, subspace metrics and matrix norms.
//
// Matrices are Eigen column-major doubles. Subspaces are carried as `Frame`s
// (matrices with orthonormal columns). Sign and rotation of singular/eigen
// vectors are never normalised; compare subspaces with the rotation-invariant
// metrics below.

#include <cstdint>

#include <Eigen/Dense>

namespace primepca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

namespace linalg {

inline constexpr double kOrthonormalTol = 1e-10;
inline constexpr double kPinvTol = 1e-12;

bool all_finite(const Matrix& a) noexcept;

// d x K matrix with orthonormal columns.
class Frame {
 public:
  Frame() = default;
  // Throws InvalidArgument if ||C^T C - I||_max > tol or K > d.
  explicit Frame(Matrix columns, double tol = kOrthonormalTol);

  // Orthonormal basis of the column space of `a` via thin Householder QR.
  // The span is preserved only when `a` has full column rank.
  static Frame orthonormalized(const Matrix& a);

  const Matrix& matrix() const noexcept { return m_; }
  Index dim() const noexcept { return m_.rows(); }
  Index rank() const noexcept { return m_.cols(); }

  Frame leading(Index k) const;
  // Frame spanned by the same subspace with columns V * rotation.
  Frame rotated(const Matrix& rotation) const;

 private:
  Matrix m_;
};

struct SvdFactors {
  Frame left;               // n x r
  Vector singular_values;   // nonincreasing, >= 0
  Frame right;              // d x r
};

// Top-r singular triplets of a dense matrix (bidiagonal divide-and-conquer).
SvdFactors thin_svd(const Matrix& a, Index r);

// Moore-Penrose pseudoinverse; singular values <= tol * sigma_1 are dropped.
Matrix pseudoinverse(const Matrix& a, double tol = kPinvTol);

// Cosines of the principal angles between col(u) and col(v), nonincreasing,
// clamped to [0, 1].
Vector principal_angles(const Frame& u, const Frame& v);

// ||sin Theta(u, v)||_F, in [0, sqrt(K)].
double sin_theta_loss(const Frame& u, const Frame& v);

// Orthogonal W minimising ||v1 - v2 W||_F (W1 W2^T from an SVD of v2^T v1).
// W is not unique when v2^T v1 is singular; the factors returned by the SVD
// are used as they come.
Matrix procrustes_align(const Frame& v1, const Frame& v2);

// ||v1 - v2 W||_{2->inf} with W from procrustes_align.
double two_to_inf_distance(const Frame& v1, const Frame& v2);

struct MatrixNorms {
  double one_to_one;      // max column absolute sum
  double two_to_inf;      // max row Euclidean norm
  double inf_to_inf;      // max row absolute sum
  double frobenius;
  double entrywise_l1;
  double entrywise_linf;
  double op;              // largest singular value
};

MatrixNorms operator_norms(const Matrix& a);

Matrix hadamard(const Matrix& a, const Matrix& b);
// Entrywise reciprocal; throws InvalidArgument naming the first zero entry.
Matrix hadamard_inverse(const Matrix& a);

struct EigenPairs {
  Frame vectors;   // d x k
  Vector values;   // algebraically largest first
};

// Top-k eigenpairs of a symmetric matrix (tridiagonal QR). The input is
// symmetrised by averaging; asymmetry above 1e-10 (relative) is rejected.
// The matrix need not be positive semidefinite.
EigenPairs top_k_eigenvectors(const Matrix& g, Index k);

}  // namespace linalg
}  // namespace primepca
