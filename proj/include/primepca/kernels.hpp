#pragma once
// Data-parallel arithmetic kernels used in the hot loops of the estimators.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2/FMA variant. The variant is chosen once at runtime from CPUID; the
// environment variable PRIMEPCA_ISA=scalar forces the reference path.
// Vector variants reassociate sums, so results agree with the scalar path to
// rounding, not bit-for-bit.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace primepca::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  // sum_k x[k] * y[k]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[k] += a * x[k]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out[k] = src[idx[k]]
  void (*gather)(const double* src, const std::int32_t* idx, double* out, std::size_t m);
  // sum_k src[idx[k]] * w[k]
  double (*gather_dot)(const double* src, const std::int32_t* idx, const double* w,
                       std::size_t m);
  // out[k] = x[k] * y[k]
  void (*hadamard)(const double* x, const double* y, double* out, std::size_t n);
  // sum_k x[k]^2
  double (*sum_squares)(const double* x, std::size_t n);
};

bool isa_supported(Isa isa) noexcept;
std::string_view isa_name(Isa isa) noexcept;

// Table for a specific ISA; throws std::runtime_error if the CPU lacks it.
const KernelTable& kernels_for(Isa isa);

// Table selected at first use (best supported ISA unless overridden).
const KernelTable& kernels() noexcept;

inline double dot(const double* x, const double* y, std::size_t n) {
  return kernels().dot(x, y, n);
}
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  kernels().axpy(a, x, y, n);
}
inline void gather(const double* src, const std::int32_t* idx, double* out, std::size_t m) {
  kernels().gather(src, idx, out, m);
}
inline double gather_dot(const double* src, const std::int32_t* idx, const double* w,
                         std::size_t m) {
  return kernels().gather_dot(src, idx, w, m);
}
inline void hadamard(const double* x, const double* y, double* out, std::size_t n) {
  kernels().hadamard(x, y, out, n);
}
inline double sum_squares(const double* x, std::size_t n) {
  return kernels().sum_squares(x, n);
}

namespace detail {
extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
}  // namespace detail

}  // namespace primepca::simd
