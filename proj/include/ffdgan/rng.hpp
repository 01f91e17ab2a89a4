#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace ffdgan {

// Seeded random stream. Distribution transforms are written out here rather
// than taken from <random> so draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  std::string state() const;
  void restore(const std::string& state);

  // Independent stream for item `index` of a run seeded with `seed`.
  static Rng derive(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a, used for config hashes recorded in manifests.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace ffdgan
