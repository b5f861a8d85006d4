#pragma once
// Test-only reference computations. Nothing here calls Eigen's decompositions;
// matrices are only used as containers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Eig {
  Vector values;    // descending
  Matrix vectors;   // columns
};

// Cyclic Jacobi rotations on a symmetric matrix.
inline Eig jacobi_eigen(Matrix a) {
  const Eigen::Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    }
    if (off <= 1e-30 * std::max(total, 1e-300)) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
  Eig out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

// Singular values of a, descending, from the eigenvalues of a^T a.
inline Vector singular_values(const Matrix& a) {
  const Matrix g = a.cols() <= a.rows() ? Matrix(a.transpose() * a) : Matrix(a * a.transpose());
  Vector ev = jacobi_eigen(g).values;
  for (Eigen::Index k = 0; k < ev.size(); ++k) ev(k) = std::sqrt(std::max(0.0, ev(k)));
  return ev;
}

// Classical Gram-Schmidt twice; columns assumed independent.
inline Matrix gram_schmidt(Matrix a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < j; ++k) a.col(j) -= a.col(k).dot(a.col(j)) * a.col(k);
    }
    a.col(j) /= a.col(j).norm();
  }
  return a;
}

inline Matrix gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& g) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(g);
  return m;
}

inline Matrix random_frame(Eigen::Index d, Eigen::Index k, std::mt19937_64& g) {
  return gram_schmidt(gaussian(d, k, g));
}

inline Matrix random_orthogonal(Eigen::Index k, std::mt19937_64& g) {
  return gram_schmidt(gaussian(k, k, g));
}

// ||sin Theta||_F from the cosines of the principal angles (eigenvalues of
// (u^T v)^T (u^T v)).
inline double sin_theta(const Matrix& u, const Matrix& v) {
  const Matrix c = u.transpose() * v;
  const Vector cos2 = jacobi_eigen(c.transpose() * c).values;
  double s = 0.0;
  for (Eigen::Index k = 0; k < cos2.size(); ++k) s += 1.0 - std::min(1.0, std::max(0.0, cos2(k)));
  return std::sqrt(std::max(0.0, s));
}

// Least-squares solution via normal equations, solved by Gaussian elimination
// with partial pivoting.
inline Vector normal_equations(const Matrix& a, const Vector& b) {
  Matrix m = a.transpose() * a;
  Vector r = a.transpose() * b;
  const Eigen::Index n = m.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = c;
    for (Eigen::Index i = c + 1; i < n; ++i)
      if (std::abs(m(i, c)) > std::abs(m(piv, c))) piv = i;
    m.row(c).swap(m.row(piv));
    std::swap(r(c), r(piv));
    for (Eigen::Index i = c + 1; i < n; ++i) {
      const double f = m(i, c) / m(c, c);
      m.row(i) -= f * m.row(c);
      r(i) -= f * r(c);
    }
  }
  Vector x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = r(i);
    for (Eigen::Index k = i + 1; k < n; ++k) s -= m(i, k) * x(k);
    x(i) = s / m(i, i);
  }
  return x;
}

}  // namespace oracle
