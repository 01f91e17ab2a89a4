#pragma once

// Data-parallel inner loops. Each kernel has a portable scalar reference in
// `scalar::` and an AVX2/FMA variant in `avx2::`; the unqualified entry points
// dispatch on the instruction set detected at startup.

#include <cstddef>
#include <span>
#include <string_view>

namespace ffdgan::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

// Best instruction set supported by the running CPU. FFDGAN_ISA=scalar in the
// environment forces the reference path.
Isa detected_isa();

// Instruction set used by the dispatching entry points.
Isa active_isa();

// Overrides dispatch; intended for tests and benchmarks. Not thread-safe.
void set_active_isa(Isa isa);

bool avx2_available();

struct PointsSoA {
  std::span<const double> x;
  std::span<const double> y;
  std::span<const double> z;
  std::size_t size() const { return x.size(); }
};

// c[m x n] = a[m x k] * b[k x n] (or += when accumulate), all row-major and
// contiguous.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

// max over p in `from` of min over q in `to` of |p - q|^2.
double directed_max_min_sq(const PointsSoA& from, const PointsSoA& to);

namespace scalar {
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate);
double directed_max_min_sq(const PointsSoA& from, const PointsSoA& to);
}  // namespace scalar

namespace avx2 {
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate);
double directed_max_min_sq(const PointsSoA& from, const PointsSoA& to);
}  // namespace avx2

}  // namespace ffdgan::kernels
