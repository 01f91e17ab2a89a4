#include <algorithm>
#include <cmath>
#include <limits>

#include "ffdgan/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define FFDGAN_X86 1
#define FFDGAN_AVX2_FN __attribute__((target("avx2,fma")))
#else
#define FFDGAN_X86 0
#define FFDGAN_AVX2_FN
#endif

namespace ffdgan::kernels::avx2 {

#if FFDGAN_X86

namespace {

constexpr std::size_t kBlockK = 256;

// c[4 x 8] += a[4 x kc] * b[kc x 8] for one register tile.
FFDGAN_AVX2_FN inline void tile_4x8(const double* a, std::size_t lda, const double* b,
                                    std::size_t ldb, double* c, std::size_t ldc,
                                    std::size_t kc) {
  __m256d c00 = _mm256_loadu_pd(c), c01 = _mm256_loadu_pd(c + 4);
  __m256d c10 = _mm256_loadu_pd(c + ldc), c11 = _mm256_loadu_pd(c + ldc + 4);
  __m256d c20 = _mm256_loadu_pd(c + 2 * ldc), c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
  __m256d c30 = _mm256_loadu_pd(c + 3 * ldc), c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
    const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
    __m256d av = _mm256_broadcast_sd(a + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a + lda + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + ldc, c10);
  _mm256_storeu_pd(c + ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c20);
  _mm256_storeu_pd(c + 2 * ldc + 4, c21);
  _mm256_storeu_pd(c + 3 * ldc, c30);
  _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

// c[1 x 8] += a[1 x kc] * b[kc x 8]
FFDGAN_AVX2_FN inline void tile_1x8(const double* a, const double* b, std::size_t ldb,
                                    double* c, std::size_t kc) {
  __m256d c0 = _mm256_loadu_pd(c), c1 = _mm256_loadu_pd(c + 4);
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256d av = _mm256_broadcast_sd(a + p);
    c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb), c0);
    c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + 4), c1);
  }
  _mm256_storeu_pd(c, c0);
  _mm256_storeu_pd(c + 4, c1);
}

// Column remainder (< 8 wide). Fused like the vector tiles so every output
// element sees the same rounding regardless of its column position.
FFDGAN_AVX2_FN inline void tail_columns(const double* a, std::size_t lda, const double* b,
                                        std::size_t ldb, double* c, std::size_t ldc,
                                        std::size_t rows, std::size_t cols,
                                        std::size_t kc) {
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t j = 0;
    if (cols >= 4) {
      __m256d acc = _mm256_loadu_pd(c + i * ldc);
      for (std::size_t p = 0; p < kc; ++p) {
        acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + i * lda + p),
                              _mm256_loadu_pd(b + p * ldb), acc);
      }
      _mm256_storeu_pd(c + i * ldc, acc);
      j = 4;
    }
    for (; j < cols; ++j) {
      double acc = c[i * ldc + j];
      for (std::size_t p = 0; p < kc; ++p) acc = std::fma(a[i * lda + p], b[p * ldb + j], acc);
      c[i * ldc + j] = acc;
    }
  }
}

}  // namespace

FFDGAN_AVX2_FN void gemm(const double* a, const double* b, double* c, std::size_t m,
                         std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  const std::size_t n8 = n - n % 8;
  const std::size_t m4 = m - m % 4;
  for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
    const std::size_t kc = std::min(kBlockK, k - p0);
    const double* bp = b + p0 * n;
    for (std::size_t j = 0; j < n8; j += 8) {
      for (std::size_t i = 0; i < m4; i += 4) {
        tile_4x8(a + i * k + p0, k, bp + j, n, c + i * n + j, n, kc);
      }
      for (std::size_t i = m4; i < m; ++i) {
        tile_1x8(a + i * k + p0, bp + j, n, c + i * n + j, kc);
      }
    }
    if (n8 < n) tail_columns(a + p0, k, bp + n8, n, c + n8, n, m, n - n8, kc);
  }
}

FFDGAN_AVX2_FN double directed_max_min_sq(const PointsSoA& from, const PointsSoA& to) {
  const std::size_t nt = to.size();
  const std::size_t nt4 = nt - nt % 4;
  const double* tx = to.x.data();
  const double* ty = to.y.data();
  const double* tz = to.z.data();
  double worst = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const __m256d px = _mm256_set1_pd(from.x[i]);
    const __m256d py = _mm256_set1_pd(from.y[i]);
    const __m256d pz = _mm256_set1_pd(from.z[i]);
    __m256d best4 = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < nt4; j += 4) {
      const __m256d dx = _mm256_sub_pd(px, _mm256_loadu_pd(tx + j));
      const __m256d dy = _mm256_sub_pd(py, _mm256_loadu_pd(ty + j));
      const __m256d dz = _mm256_sub_pd(pz, _mm256_loadu_pd(tz + j));
      // Same association as the scalar kernel so results agree bit-for-bit.
      const __m256d d = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                                      _mm256_mul_pd(dz, dz));
      best4 = _mm256_min_pd(best4, d);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, best4);
    double best = std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
    for (std::size_t j = nt4; j < nt; ++j) {
      const double dx = from.x[i] - tx[j];
      const double dy = from.y[i] - ty[j];
      const double dz = from.z[i] - tz[j];
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    worst = std::max(worst, best);
  }
  return worst;
}

#else

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate) {
  scalar::gemm(a, b, c, m, k, n, accumulate);
}

double directed_max_min_sq(const PointsSoA& from, const PointsSoA& to) {
  return scalar::directed_max_min_sq(from, to);
}

#endif

}  // namespace ffdgan::kernels::avx2
