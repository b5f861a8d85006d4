#include <cstdlib>
#include <stdexcept>
#include <string>

#include "primepca/kernels.hpp"

namespace primepca::simd {

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

std::string_view isa_name(Isa isa) noexcept {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::runtime_error("kernel ISA not supported on this CPU: " + std::string(isa_name(isa)));
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::avx2) return detail::avx2_table;
#endif
  return detail::scalar_table;
}

namespace {

const KernelTable& select_table() noexcept {
  const char* forced = std::getenv("PRIMEPCA_ISA");
  if (forced != nullptr && std::string_view(forced) == "scalar") return detail::scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
  if (isa_supported(Isa::avx2)) return detail::avx2_table;
#endif
  return detail::scalar_table;
}

}  // namespace

const KernelTable& kernels() noexcept {
  static const KernelTable& table = select_table();
  return table;
}

}  // namespace primepca::simd
