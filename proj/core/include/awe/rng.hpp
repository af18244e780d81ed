// SPDX-License-Identifier: Apache-2.0
//
// Seeded random stream with a pinned draw order. std::mt19937_64 supplies the
// bits; the uniform/normal/bounded transforms are spelled out here so that a
// (seed, draw sequence) pair maps to the same values on every platform. The
// stream state round-trips through text, which is what makes mid-run
// checkpoint resume reproduce an uninterrupted run.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace awe {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0,1) from the top 53 bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; pairs are generated together and the
  // second value is handed out on the next call.
  double normal();

  // Unbiased integer in [0, n) by rejection on the top of the 64-bit range.
  std::uint64_t below(std::uint64_t n);

  // Fisher-Yates, back to front.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string serialize() const;
  void restore(const std::string& text);

  bool operator==(const Rng& other) const {
    return gen_ == other.gen_ && has_cached_ == other.has_cached_ &&
           cached_ == other.cached_;
  }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace awe
