// SPDX-License-Identifier: Apache-2.0
//
// Same-type pair construction: frequency-weighted random sampling, the
// per-type capped balanced sampler, and a label-corrupted variant that
// simulates the imperfect clusters a term-discovery system produces.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "awe/dataset.hpp"

namespace awe {

struct PairList {
  enum class Provenance { ground_truth, simulated_utd, external };
  Provenance provenance = Provenance::ground_truth;
  std::vector<std::pair<std::size_t, std::size_t>> items;  // dataset indices

  std::size_t size() const { return items.size(); }
};

// n pairs sampled uniformly over all same-type instance pairs (so types are
// weighted by their pair frequency); duplicates across draws allowed.
PairList make_random_pairs(const Dataset& data, std::size_t n, std::uint64_t seed);

// Caps each type at ceil(n / number-of-eligible-types) pairs, sampled without
// replacement per type; the concatenation is shuffled and trimmed to n. When
// fewer pairs exist under the cap, all of them are returned with a warning.
PairList make_balanced_pairs(const Dataset& data, std::size_t n, std::uint64_t seed);

// Random pairs where, with probability label_noise_rate, the second member is
// replaced by a uniformly random different-type segment.
PairList simulate_utd_pairs(const Dataset& data, std::size_t n, double label_noise_rate,
                            std::uint64_t seed);

// TSV with two id columns.
void save_pairs(const std::string& path, const Dataset& data, const PairList& pairs);
PairList load_pairs(const std::string& path, const Dataset& data);

}  // namespace awe
