#include <algorithm>
#include <limits>

#include "ffdgan/kernels.hpp"

namespace ffdgan::kernels::scalar {

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

double directed_max_min_sq(const PointsSoA& from, const PointsSoA& to) {
  double worst = 0.0;
  const std::size_t nt = to.size();
  for (std::size_t i = 0; i < from.size(); ++i) {
    const double px = from.x[i], py = from.y[i], pz = from.z[i];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nt; ++j) {
      const double dx = px - to.x[j];
      const double dy = py - to.y[j];
      const double dz = pz - to.z[j];
      const double d = dx * dx + dy * dy + dz * dz;
      best = std::min(best, d);
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace ffdgan::kernels::scalar
