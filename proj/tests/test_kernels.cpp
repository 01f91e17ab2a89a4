#include <cmath>
#include <vector>

#include "doctest.h"
#include "ffdgan/kernels.hpp"
#include "ffdgan/rng.hpp"

using namespace ffdgan;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("gemm: scalar reference matches a naive triple loop") {
  Rng rng(3);
  const std::size_t m = 7, k = 5, n = 9;
  const auto a = random_vec(rng, m * k);
  const auto b = random_vec(rng, k * n);
  std::vector<double> c(m * n);
  kernels::scalar::gemm(a.data(), b.data(), c.data(), m, k, n, false);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      CHECK(c[i * n + j] == doctest::Approx(acc).epsilon(1e-14));
    }
  }
}

TEST_CASE("gemm: AVX2 variant agrees with the scalar reference") {
  if (!kernels::avx2_available()) {
    MESSAGE("AVX2 not available; skipping SIMD equivalence");
    return;
  }
  Rng rng(11);
  const std::size_t shapes[][3] = {{1, 1, 1},  {4, 8, 8},   {5, 3, 13},  {64, 300, 512},
                                   {3, 1, 3},  {17, 257, 9}, {64, 1575, 37}, {2, 600, 4}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], k = s[1], n = s[2];
    const auto a = random_vec(rng, m * k);
    const auto b = random_vec(rng, k * n);
    for (bool accumulate : {false, true}) {
      auto c0 = random_vec(rng, m * n);
      auto c1 = c0;
      kernels::scalar::gemm(a.data(), b.data(), c0.data(), m, k, n, accumulate);
      kernels::avx2::gemm(a.data(), b.data(), c1.data(), m, k, n, accumulate);
      double worst = 0.0;
      for (std::size_t i = 0; i < c0.size(); ++i) worst = std::max(worst, std::abs(c0[i] - c1[i]));
      CHECK(worst <= 1e-12 * static_cast<double>(k));
    }
  }
}

TEST_CASE("gemm: identical columns of b give bit-identical columns of c") {
  Rng rng(12);
  const std::size_t m = 7, k = 300, n = 14;
  const auto a = random_vec(rng, m * k);
  auto b = random_vec(rng, k * n);
  for (std::size_t p = 0; p < k; ++p) b[p * n + n - 1] = b[p * n];
  for (bool simd : {false, true}) {
    if (simd && !kernels::avx2_available()) continue;
    std::vector<double> c(m * n);
    if (simd) {
      kernels::avx2::gemm(a.data(), b.data(), c.data(), m, k, n, false);
    } else {
      kernels::scalar::gemm(a.data(), b.data(), c.data(), m, k, n, false);
    }
    for (std::size_t i = 0; i < m; ++i) CHECK(c[i * n] == c[i * n + n - 1]);
  }
}

TEST_CASE("directed_max_min_sq: AVX2 variant is bit-identical to scalar") {
  if (!kernels::avx2_available()) return;
  Rng rng(5);
  for (std::size_t na : {1u, 3u, 4u, 9u, 130u}) {
    for (std::size_t nb : {1u, 2u, 5u, 8u, 203u}) {
      const auto ax = random_vec(rng, na), ay = random_vec(rng, na), az = random_vec(rng, na);
      const auto bx = random_vec(rng, nb), by = random_vec(rng, nb), bz = random_vec(rng, nb);
      const kernels::PointsSoA a{ax, ay, az}, b{bx, by, bz};
      CHECK(kernels::scalar::directed_max_min_sq(a, b) == kernels::avx2::directed_max_min_sq(a, b));
    }
  }
}

TEST_CASE("dispatch: override switches the active path and rejects bad input") {
  const auto original = kernels::active_isa();
  kernels::set_active_isa(kernels::Isa::kScalar);
  CHECK(kernels::active_isa() == kernels::Isa::kScalar);
  std::vector<double> a{1, 2}, b{3, 4}, c(1);
  kernels::gemm(a, b, c, 1, 2, 1);
  CHECK(c[0] == 11.0);
  CHECK_THROWS(kernels::gemm(a, b, c, 2, 2, 2));
  std::vector<double> empty;
  CHECK_THROWS(kernels::directed_max_min_sq({empty, empty, empty}, {a, a, a}));
  kernels::set_active_isa(original);
}
