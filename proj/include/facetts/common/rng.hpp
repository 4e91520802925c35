#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace facetts {

/// Seeded random source. Normal draws use Box-Muller on raw engine output so the
/// sequence is identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  std::string state() const;
  void set_state(const std::string& state);

  /// Derive an independent seed for a sub-stream (splitmix64 mixing).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

}  // namespace facetts
