/// @file rng.h
/// @brief Seeded generator with a fixed, platform-independent output sequence.
///
/// std::uniform_int_distribution and std::shuffle differ between standard
/// library implementations; draws recorded in plan files must not.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace gapdx {

class DeterministicRng {
 public:
  /// Recorded alongside every seed that feeds this generator.
  static constexpr std::string_view kAlgorithm = "mt19937_64+mod-rejection+fisher-yates/v1";

  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t UniformBelow(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (true) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

  /// Moves a uniform random k-subset of `items` to its front (partial
  /// Fisher-Yates) and truncates to it.
  template <class T>
  void SampleInPlace(std::vector<T>& items, std::size_t k) {
    for (std::size_t i = 0; i < k && i < items.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(UniformBelow(items.size() - i));
      std::swap(items[i], items[j]);
    }
    if (k < items.size()) items.resize(k);
  }

  template <class T>
  void Shuffle(std::vector<T>& items) {
    SampleInPlace(items, items.size());
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gapdx
