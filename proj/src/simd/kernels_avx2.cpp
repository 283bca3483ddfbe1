// Compiled with -mavx2 -mfma. Keep this file free of standard-library
// templates so no AVX2-encoded inline function leaks into other objects.
#include <immintrin.h>

#include "ntssl/simd/kernels.hpp"

namespace ntssl::simd {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Row-of-C kernel: c[0..n) += sum_p a[p * a_stride] * B[p, :]. Four B rows
// are folded per pass to cut C traffic.
inline void rank_update_row(std::size_t n, std::size_t k, const double* a, std::size_t a_stride, const double* B,
                            double* c) {
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    const __m256d a0 = _mm256_set1_pd(a[(p + 0) * a_stride]);
    const __m256d a1 = _mm256_set1_pd(a[(p + 1) * a_stride]);
    const __m256d a2 = _mm256_set1_pd(a[(p + 2) * a_stride]);
    const __m256d a3 = _mm256_set1_pd(a[(p + 3) * a_stride]);
    const double* b0 = B + (p + 0) * n;
    const double* b1 = B + (p + 1) * n;
    const double* b2 = B + (p + 2) * n;
    const double* b3 = B + (p + 3) * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d acc = _mm256_loadu_pd(c + j);
      acc = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), acc);
      acc = _mm256_fmadd_pd(a1, _mm256_loadu_pd(b1 + j), acc);
      acc = _mm256_fmadd_pd(a2, _mm256_loadu_pd(b2 + j), acc);
      acc = _mm256_fmadd_pd(a3, _mm256_loadu_pd(b3 + j), acc);
      _mm256_storeu_pd(c + j, acc);
    }
    for (; j < n; ++j) {
      c[j] += a[(p + 0) * a_stride] * b0[j] + a[(p + 1) * a_stride] * b1[j] + a[(p + 2) * a_stride] * b2[j] +
              a[(p + 3) * a_stride] * b3[j];
    }
  }
  for (; p < k; ++p) axpy(a[p * a_stride], B + p * n, c, n);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B, double* C) {
  for (std::size_t i = 0; i < m; ++i) rank_update_row(n, k, A + i * k, 1, B, C + i * n);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B, double* C) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) C[i * n + j] += dot(A + i * k, B + j * k, k);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B, double* C) {
  for (std::size_t i = 0; i < m; ++i) rank_update_row(n, k, A + i, m, B, C + i * n);
}

constexpr KernelTable kAvx2{"avx2", dot, axpy, gemm_nn, gemm_nt, gemm_tn};

}  // namespace

const KernelTable* avx2_table_unchecked() { return &kAvx2; }

}  // namespace ntssl::simd
