// SPDX-License-Identifier: Apache-2.0
//
// Synthetic word-segment corpus: each word type is a smooth prototype
// trajectory, each instance a monotonically time-warped, noisy, per-instance
// offset copy. Stands in for real speech features at desk scale, with knobs
// to make the same-different task as easy or hard as an experiment needs.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "awe/dataset.hpp"

namespace awe {

struct SynthConfig {
  std::size_t num_word_types = 50;
  std::size_t instances_per_type = 20;
  std::size_t feat_dim = 13;
  std::size_t min_len = 20;  // prototype length range, inclusive
  std::size_t max_len = 60;
  double warp = 0.3;            // monotone time-warp strength (0 = exact copies)
  double noise = 0.25;          // per-element Gaussian noise level
  double speaker_offset = 0.75; // scale of the per-instance constant offset
  std::uint64_t seed = 0;
};

// Deterministic per seed: one stream drives prototype lengths, anchors,
// per-instance warps, offsets and noise, in that order.
Dataset generate_synthetic_corpus(const SynthConfig& config);

// Splits by instance position within each label (no randomness): the first
// round(f0*m) instances of a label go to split 0, and so on; the remainder
// joins the last split. Unlabelled segments go to the last split.
std::vector<Dataset> split_dataset(const Dataset& data, std::span<const double> fractions);

}  // namespace awe
