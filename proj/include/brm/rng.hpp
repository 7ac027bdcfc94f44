#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace brm {

// Seeded generator built on std::mt19937_64, whose raw output sequence is fixed
// by the standard. The standard distributions are implementation-defined, so
// uniform/normal/index draws are derived from the raw 64-bit words here and
// are therefore identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  static constexpr const char* algorithm() noexcept { return "mt19937_64"; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound). Unbiased (rejection on the top range).
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal by the Marsaglia polar method.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates shuffle driven by below().
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Child generator for an independent stream (e.g. one per epoch).
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace brm
