// AVX2/FMA variants. Compiled without global -mavx2; each function carries a
// target attribute and is only reached after a CPUID check in dispatch.cpp.

#include "primepca/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#define PRIMEPCA_AVX2 __attribute__((target("avx2,fma")))

namespace primepca::simd::detail {
namespace {

PRIMEPCA_AVX2 inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

PRIMEPCA_AVX2 double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k + 4), _mm256_loadu_pd(y + k + 4), acc1);
  }
  if (k + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k), acc0);
    k += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) s += x[k] * y[k];
  return s;
}

PRIMEPCA_AVX2 void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(y + k, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  }
  for (; k < n; ++k) y[k] += a * x[k];
}

PRIMEPCA_AVX2 void gather_avx2(const double* src, const std::int32_t* idx, double* out,
                               std::size_t m) {
  std::size_t k = 0;
  for (; k + 4 <= m; k += 4) {
    const __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + k));
    _mm256_storeu_pd(out + k, _mm256_i32gather_pd(src, vi, 8));
  }
  for (; k < m; ++k) out[k] = src[idx[k]];
}

PRIMEPCA_AVX2 double gather_dot_avx2(const double* src, const std::int32_t* idx,
                                     const double* w, std::size_t m) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= m; k += 8) {
    const __m128i i0 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + k));
    const __m128i i1 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + k + 4));
    acc0 = _mm256_fmadd_pd(_mm256_i32gather_pd(src, i0, 8), _mm256_loadu_pd(w + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_i32gather_pd(src, i1, 8), _mm256_loadu_pd(w + k + 4), acc1);
  }
  if (k + 4 <= m) {
    const __m128i i0 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + k));
    acc0 = _mm256_fmadd_pd(_mm256_i32gather_pd(src, i0, 8), _mm256_loadu_pd(w + k), acc0);
    k += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < m; ++k) s += src[idx[k]] * w[k];
  return s;
}

PRIMEPCA_AVX2 void hadamard_avx2(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(out + k, _mm256_mul_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  }
  for (; k < n; ++k) out[k] = x[k] * y[k];
}

PRIMEPCA_AVX2 double sum_squares_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    const __m256d a = _mm256_loadu_pd(x + k);
    const __m256d b = _mm256_loadu_pd(x + k + 4);
    acc0 = _mm256_fmadd_pd(a, a, acc0);
    acc1 = _mm256_fmadd_pd(b, b, acc1);
  }
  if (k + 4 <= n) {
    const __m256d a = _mm256_loadu_pd(x + k);
    acc0 = _mm256_fmadd_pd(a, a, acc0);
    k += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) s += x[k] * x[k];
  return s;
}

}  // namespace

const KernelTable avx2_table{Isa::avx2,     dot_avx2,        axpy_avx2,
                             gather_avx2,   gather_dot_avx2, hadamard_avx2,
                             sum_squares_avx2};

}  // namespace primepca::simd::detail

#endif
