#include <cstdlib>
#include <string>

#include "ffdgan/errors.hpp"
#include "ffdgan/kernels.hpp"

namespace ffdgan::kernels {

namespace {

Isa probe() {
  if (const char* forced = std::getenv("FFDGAN_ISA"); forced && std::string(forced) == "scalar") {
    return Isa::kScalar;
  }
  return avx2_available() ? Isa::kAvx2 : Isa::kScalar;
}

Isa& active() {
  static Isa isa = probe();
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detected_isa() {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() { return active(); }

void set_active_isa(Isa isa) {
  if (isa == Isa::kAvx2 && !avx2_available()) {
    throw ArgumentError("set_active_isa: AVX2/FMA not supported on this CPU");
  }
  active() = isa;
}

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (a.size() < m * k || b.size() < k * n || c.size() < m * n) {
    throw ArgumentError("gemm: buffer smaller than stated dimensions");
  }
  if (m == 0 || n == 0) return;
  if (active() == Isa::kAvx2) {
    avx2::gemm(a.data(), b.data(), c.data(), m, k, n, accumulate);
  } else {
    scalar::gemm(a.data(), b.data(), c.data(), m, k, n, accumulate);
  }
}

double directed_max_min_sq(const PointsSoA& from, const PointsSoA& to) {
  if (from.y.size() != from.size() || from.z.size() != from.size() ||
      to.y.size() != to.size() || to.z.size() != to.size()) {
    throw ArgumentError("directed_max_min_sq: ragged coordinate arrays");
  }
  if (from.size() == 0 || to.size() == 0) {
    throw ArgumentError("directed_max_min_sq: empty point set");
  }
  return active() == Isa::kAvx2 ? avx2::directed_max_min_sq(from, to)
                                : scalar::directed_max_min_sq(from, to);
}

}  // namespace ffdgan::kernels
