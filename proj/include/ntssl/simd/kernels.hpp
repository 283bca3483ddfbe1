#pragma once

#include <cstddef>

namespace ntssl::simd {

// Dense f64 primitives behind the autodiff core. Every table entry has the
// same contract in every variant; variants differ only in summation order
// and FMA contraction, so results agree to rounding, not bit for bit.
//
// Matrices are row-major with tight leading dimensions unless a stride
// argument says otherwise.
struct KernelTable {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// C(m x n) += A(m x k) * B(k x n)
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B, double* C);
  /// C(m x n) += A(m x k) * B(n x k)^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B, double* C);
  /// C(m x n) += A(k x m)^T * B(k x n)
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B, double* C);
};

const KernelTable& scalar_kernels();
/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

/// Table chosen once per process: AVX2 when available, else scalar.
/// NTSSL_SIMD=scalar in the environment forces the reference kernels.
const KernelTable& active();

}  // namespace ntssl::simd
