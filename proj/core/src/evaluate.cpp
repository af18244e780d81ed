// SPDX-License-Identifier: Apache-2.0

#include "awe/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "awe/rng.hpp"

namespace awe::eval {

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine_distance: dimension mismatch " +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    std::cerr << "warning: cosine_distance on a zero-norm vector, returning 1\n";
    return 1.0;
  }
  // sqrt(na*nb) rather than sqrt(na)*sqrt(nb): sqrt(x*x) == x in IEEE
  // arithmetic, which keeps d(a,a) == 0 and d(a,-a) == 2 exact.
  const double d = 1.0 - dot / std::sqrt(na * nb);
  return std::min(2.0, std::max(0.0, d));
}

PRCurve same_different_ap(std::span<const EvalPairOutcome> outcomes) {
  std::size_t positives = 0;
  for (const auto& o : outcomes) {
    if (!std::isfinite(o.distance))
      throw std::invalid_argument("same_different_ap: non-finite distance for pair (" +
                                  o.id1 + "," + o.id2 + ")");
    positives += o.is_same_type ? 1 : 0;
  }
  if (positives == 0)
    throw std::invalid_argument("same_different_ap: no same-type pair, AP undefined");

  std::vector<std::size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return outcomes[i].distance < outcomes[j].distance;
  });

  PRCurve curve;
  const double total_pos = static_cast<double>(positives);
  double ap = 0.0;
  std::size_t pos_so_far = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const EvalPairOutcome& o = outcomes[order[rank]];
    if (o.is_same_type) {
      ++pos_so_far;
      ap += static_cast<double>(pos_so_far) / static_cast<double>(rank + 1);
    }
    // Emit one PR point per distinct threshold: at the last pair of a run of
    // equal distances.
    const bool last_of_run = rank + 1 == order.size() ||
                             outcomes[order[rank + 1]].distance != o.distance;
    if (last_of_run) {
      PRPoint p;
      p.threshold = o.distance;
      p.precision = static_cast<double>(pos_so_far) / static_cast<double>(rank + 1);
      p.recall = static_cast<double>(pos_so_far) / total_pos;
      curve.points.push_back(p);
    }
  }
  curve.average_precision = ap / total_pos;
  return curve;
}

Array embed(const rnn::EncoderParams& encoder, const Segment& segment) {
  return rnn::encode_values(encoder, segment.frames).mean;
}

namespace {

// All unordered pairs (i < j), optionally a seeded subsample without
// replacement. Deterministic given (n, max_pairs, seed).
std::vector<std::pair<std::size_t, std::size_t>> pair_indices(std::size_t n,
                                                              std::size_t max_pairs,
                                                              std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  all.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) all.emplace_back(i, j);
  if (max_pairs != 0 && all.size() > max_pairs) {
    Rng rng(seed);
    rng.shuffle(all);
    all.resize(max_pairs);
    std::sort(all.begin(), all.end());
  }
  return all;
}

}  // namespace

EvalReport evaluate_report(const Dataset& data, const DistanceFn& dist,
                           std::size_t max_pairs, std::uint64_t sample_seed) {
  if (data.size() < 2)
    throw std::invalid_argument("evaluate: need at least two segments");
  auto pairs = pair_indices(data.size(), max_pairs, sample_seed);
  std::vector<EvalPairOutcome> outcomes;
  outcomes.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    const Segment& a = data[i];
    const Segment& b = data[j];
    EvalPairOutcome o;
    o.id1 = a.id;
    o.id2 = b.id;
    o.distance = dist(a, b);
    o.is_same_type = a.label != kUnknownLabel && a.label == b.label;
    outcomes.push_back(std::move(o));
  }
  EvalReport report;
  report.curve = same_different_ap(outcomes);
  report.ap_percent = 100.0 * report.curve.average_precision;
  report.num_pairs = outcomes.size();
  for (const auto& o : outcomes) report.num_positives += o.is_same_type ? 1 : 0;
  return report;
}

double ap_percent_over_pairs(const Dataset& data, const DistanceFn& dist,
                             std::size_t max_pairs, std::uint64_t sample_seed,
                             PRCurve* curve_out) {
  EvalReport report = evaluate_report(data, dist, max_pairs, sample_seed);
  if (curve_out != nullptr) *curve_out = report.curve;
  return report.ap_percent;
}

EvalReport evaluate_model_report(const rnn::EncoderParams& encoder, const Dataset& test,
                                 std::size_t max_pairs, std::uint64_t sample_seed) {
  // Embed each segment once up front.
  std::vector<Array> embeddings;
  embeddings.reserve(test.size());
  for (const Segment& s : test.segments) embeddings.push_back(embed(encoder, s));
  return evaluate_report(
      test,
      [&](const Segment& a, const Segment& b) {
        const std::size_t i = test.index_of(a.id);
        const std::size_t j = test.index_of(b.id);
        return cosine_distance(embeddings[i].data, embeddings[j].data);
      },
      max_pairs, sample_seed);
}

double evaluate_model(const rnn::EncoderParams& encoder, const Dataset& test,
                      std::size_t max_pairs, std::uint64_t sample_seed) {
  return evaluate_model_report(encoder, test, max_pairs, sample_seed).ap_percent;
}

Array downsample_embedding(const Segment& segment, std::size_t n) {
  if (n == 0) throw std::invalid_argument("downsample_embedding: n must be positive");
  const std::size_t frames = segment.num_frames();
  const std::size_t dim = segment.feat_dim();
  std::vector<double> out;
  out.reserve(n * dim);
  for (std::size_t s = 0; s < n; ++s) {
    // Position in continuous frame index space [0, T-1].
    const double pos = n == 1 ? 0.0
                              : static_cast<double>(s) * static_cast<double>(frames - 1) /
                                    static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, frames - 1);
    const double frac = pos - static_cast<double>(lo);
    for (std::size_t d = 0; d < dim; ++d) {
      const double v = segment.frames.at(lo, d) +
                       frac * (segment.frames.at(hi, d) - segment.frames.at(lo, d));
      out.push_back(v);
    }
  }
  return Array(Shape{n * dim}, std::move(out));
}

double evaluate_downsampling(const Dataset& test, std::size_t n, std::size_t max_pairs,
                             std::uint64_t sample_seed) {
  std::vector<Array> embeddings;
  embeddings.reserve(test.size());
  for (const Segment& s : test.segments) embeddings.push_back(downsample_embedding(s, n));
  return ap_percent_over_pairs(
      test,
      [&](const Segment& a, const Segment& b) {
        return cosine_distance(embeddings[test.index_of(a.id)].data,
                               embeddings[test.index_of(b.id)].data);
      },
      max_pairs, sample_seed);
}

double dtw_cost(const Segment& a_seg, const Segment& b_seg) {
  const std::size_t n = a_seg.num_frames();
  const std::size_t m = b_seg.num_frames();
  if (a_seg.feat_dim() != b_seg.feat_dim())
    throw std::invalid_argument("dtw_cost: feature dims differ");
  const std::size_t dim = a_seg.feat_dim();

  auto frame = [dim](const Segment& s, std::size_t t) {
    return std::span<const double>(s.frames.data.data() + t * dim, dim);
  };

  // Accumulated (cost, cells-on-path); ties in cost prefer the shorter path
  // so the normalized value is well defined.
  std::vector<double> cost(n * m);
  std::vector<std::size_t> len(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = cosine_distance(frame(a_seg, i), frame(b_seg, j));
      const std::size_t idx = i * m + j;
      if (i == 0 && j == 0) {
        cost[idx] = d;
        len[idx] = 1;
        continue;
      }
      double best_cost = 0.0;
      std::size_t best_len = 0;
      bool have = false;
      auto consider = [&](std::size_t pi, std::size_t pj) {
        const std::size_t p = pi * m + pj;
        if (!have || cost[p] < best_cost ||
            (cost[p] == best_cost && len[p] < best_len)) {
          best_cost = cost[p];
          best_len = len[p];
          have = true;
        }
      };
      if (i > 0 && j > 0) consider(i - 1, j - 1);
      if (i > 0) consider(i - 1, j);
      if (j > 0) consider(i, j - 1);
      cost[idx] = best_cost + d;
      len[idx] = best_len + 1;
    }
  }
  const std::size_t last = (n - 1) * m + (m - 1);
  return cost[last] / static_cast<double>(len[last]);
}

double evaluate_dtw(const Dataset& test, std::size_t max_pairs, std::uint64_t sample_seed) {
  return ap_percent_over_pairs(
      test, [](const Segment& a, const Segment& b) { return dtw_cost(a, b); }, max_pairs,
      sample_seed);
}

}  // namespace awe::eval
