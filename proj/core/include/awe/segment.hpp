// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "awe/array.hpp"

namespace awe {

// Label value for segments without a transcription.
inline constexpr const char* kUnknownLabel = "UNK";

// A variable-length sequence of feature frames, stored {T, D}.
struct Segment {
  std::string id;
  std::string label = kUnknownLabel;
  Array frames;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t feat_dim() const { return frames.cols(); }
};

}  // namespace awe
