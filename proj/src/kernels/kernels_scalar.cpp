#include "primepca/kernels.hpp"

namespace primepca::simd::detail {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += x[k] * y[k];
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

void gather_scalar(const double* src, const std::int32_t* idx, double* out, std::size_t m) {
  for (std::size_t k = 0; k < m; ++k) out[k] = src[idx[k]];
}

double gather_dot_scalar(const double* src, const std::int32_t* idx, const double* w,
                         std::size_t m) {
  double s = 0.0;
  for (std::size_t k = 0; k < m; ++k) s += src[idx[k]] * w[k];
  return s;
}

void hadamard_scalar(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] = x[k] * y[k];
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += x[k] * x[k];
  return s;
}

}  // namespace

const KernelTable scalar_table{Isa::scalar,       dot_scalar,      axpy_scalar,
                               gather_scalar,     gather_dot_scalar, hadamard_scalar,
                               sum_squares_scalar};

}  // namespace primepca::simd::detail
