#include <cstdlib>
#include <string_view>

#include "ntssl/simd/kernels.hpp"

namespace ntssl::simd {

#ifdef NTSSL_HAVE_AVX2_TU
const KernelTable* avx2_table_unchecked();
#endif

const KernelTable* avx2_kernels() {
#ifdef NTSSL_HAVE_AVX2_TU
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = [] () -> const KernelTable& {
    const char* env = std::getenv("NTSSL_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const KernelTable* t = avx2_kernels()) return *t;
    return scalar_kernels();
  }();
  return table;
}

}  // namespace ntssl::simd
