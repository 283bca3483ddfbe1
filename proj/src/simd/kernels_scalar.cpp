#include "ntssl/simd/kernels.hpp"

namespace ntssl::simd {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B, double* C) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy(A[i * k + p], B + p * n, c, n);
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B, double* C) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) C[i * n + j] += dot(A + i * k, B + j * k, k);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B, double* C) {
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) axpy(A[p * m + i], B + p * n, C + i * n, n);
}

constexpr KernelTable kScalar{"scalar", dot, axpy, gemm_nn, gemm_nt, gemm_tn};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace ntssl::simd
