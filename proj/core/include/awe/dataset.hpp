// SPDX-License-Identifier: Apache-2.0
//
// On-disk dataset layout: a directory with an "index.tsv" (no header, one
// record per line: segment_id, label, T, D, relative path) and one binary
// file per segment holding the {T, D} frames as little-endian 32-bit floats,
// row-major. Values are widened to doubles on load.

#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "awe/segment.hpp"

namespace awe {

struct Dataset {
  std::size_t feat_dim = 0;
  std::vector<Segment> segments;

  std::size_t size() const { return segments.size(); }
  const Segment& operator[](std::size_t i) const { return segments[i]; }

  // Index of a segment id; throws if unknown.
  std::size_t index_of(const std::string& id) const;

  // label -> segment indices, in index order. Unlabelled (UNK) segments are
  // not grouped.
  std::unordered_map<std::string, std::vector<std::size_t>> by_label() const;

  void add(Segment s);

 private:
  std::unordered_map<std::string, std::size_t> id_to_index_;
};

void save_dataset(const std::string& directory, const Dataset& dataset);
Dataset load_dataset(const std::string& directory);

}  // namespace awe
