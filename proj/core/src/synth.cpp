// SPDX-License-Identifier: Apache-2.0

#include "awe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "awe/rng.hpp"

namespace awe {

namespace {

std::string padded(const char* prefix, std::size_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%03zu", prefix, v);
  return buf;
}

// Linear interpolation over rows of a {T,D} matrix at continuous position p.
void interp_row(const Array& m, double p, double* out) {
  const std::size_t rows = m.rows(), dim = m.cols();
  const double clamped = std::min(std::max(p, 0.0), static_cast<double>(rows - 1));
  const std::size_t lo = static_cast<std::size_t>(clamped);
  const std::size_t hi = std::min(lo + 1, rows - 1);
  const double frac = clamped - static_cast<double>(lo);
  for (std::size_t d = 0; d < dim; ++d)
    out[d] = m.at(lo, d) + frac * (m.at(hi, d) - m.at(lo, d));
}

}  // namespace

Dataset generate_synthetic_corpus(const SynthConfig& config) {
  if (config.num_word_types < 2)
    throw std::invalid_argument("generate_synthetic_corpus: need at least 2 word types");
  if (config.instances_per_type < 2)
    throw std::invalid_argument("generate_synthetic_corpus: need at least 2 instances per type");
  if (config.min_len < 2 || config.max_len < config.min_len)
    throw std::invalid_argument("generate_synthetic_corpus: invalid length range");
  if (config.feat_dim == 0)
    throw std::invalid_argument("generate_synthetic_corpus: feature dim must be positive");

  Rng rng(config.seed);
  Dataset out;
  const std::size_t dim = config.feat_dim;

  for (std::size_t w = 0; w < config.num_word_types; ++w) {
    const std::size_t proto_len =
        config.min_len + static_cast<std::size_t>(rng.below(config.max_len - config.min_len + 1));
    // Anchor vectors roughly every 8 frames, linearly interpolated into a
    // smooth prototype trajectory.
    const std::size_t num_anchors = std::max<std::size_t>(2, proto_len / 8);
    Array anchors = Array::zeros({num_anchors, dim});
    for (double& v : anchors.data) v = rng.normal();

    Array proto = Array::zeros({proto_len, dim});
    for (std::size_t t = 0; t < proto_len; ++t) {
      const double p = proto_len == 1
                           ? 0.0
                           : static_cast<double>(t) * static_cast<double>(num_anchors - 1) /
                                 static_cast<double>(proto_len - 1);
      interp_row(anchors, p, proto.data.data() + t * dim);
    }

    const std::string label = padded("w", w);
    for (std::size_t inst = 0; inst < config.instances_per_type; ++inst) {
      Array frames;
      if (config.warp == 0.0) {
        frames = proto;  // exact copy, no resampling error
      } else {
        const double len_jitter = rng.uniform(-1.0, 1.0);
        const double gamma = std::exp(config.warp * rng.uniform(-1.0, 1.0));
        const auto jittered = static_cast<long>(std::lround(
            static_cast<double>(proto_len) * (1.0 + config.warp * len_jitter)));
        const std::size_t inst_len = static_cast<std::size_t>(std::max(2l, jittered));
        frames = Array::zeros({inst_len, dim});
        for (std::size_t s = 0; s < inst_len; ++s) {
          const double rel = inst_len == 1
                                 ? 0.0
                                 : static_cast<double>(s) / static_cast<double>(inst_len - 1);
          const double src = std::pow(rel, gamma) * static_cast<double>(proto_len - 1);
          interp_row(proto, src, frames.data.data() + s * dim);
        }
      }
      std::vector<double> offset(dim);
      for (double& v : offset) v = config.speaker_offset * rng.normal();
      for (std::size_t t = 0; t < frames.rows(); ++t)
        for (std::size_t d = 0; d < dim; ++d)
          frames.at(t, d) += offset[d] + config.noise * rng.normal();

      Segment seg;
      seg.id = label + "_" + padded("i", inst);
      seg.label = label;
      seg.frames = std::move(frames);
      out.add(std::move(seg));
    }
  }
  return out;
}

std::vector<Dataset> split_dataset(const Dataset& data, std::span<const double> fractions) {
  if (fractions.empty()) throw std::invalid_argument("split_dataset: no fractions");
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw std::invalid_argument("split_dataset: negative fraction");
    sum += f;
  }
  if (sum > 1.0 + 1e-9) throw std::invalid_argument("split_dataset: fractions exceed 1");

  std::vector<Dataset> splits(fractions.size());
  std::unordered_map<std::string, std::size_t> seen_per_label;
  std::unordered_map<std::string, std::size_t> label_total;
  for (const Segment& s : data.segments) ++label_total[s.label];

  for (const Segment& s : data.segments) {
    if (s.label == kUnknownLabel) {
      splits.back().add(s);
      continue;
    }
    const std::size_t m = label_total[s.label];
    const std::size_t pos = seen_per_label[s.label]++;
    // Cumulative rounded boundaries; whatever rounding leaves over lands in
    // the last split.
    std::size_t assigned = fractions.size() - 1;
    double cum = 0.0;
    for (std::size_t k = 0; k + 1 < fractions.size(); ++k) {
      cum += fractions[k];
      const auto boundary =
          static_cast<std::size_t>(std::lround(cum * static_cast<double>(m)));
      if (pos < boundary) {
        assigned = k;
        break;
      }
    }
    splits[assigned].add(s);
  }
  return splits;
}

}  // namespace awe
