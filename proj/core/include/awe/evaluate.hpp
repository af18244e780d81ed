// SPDX-License-Identifier: Apache-2.0
//
// Same-different evaluation: embed segments, compare by cosine distance,
// sweep a threshold, report average precision. Also the two non-learned
// baselines (downsampled frames and DTW alignment cost).

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "awe/dataset.hpp"
#include "awe/gru.hpp"
#include "awe/segment.hpp"

namespace awe::eval {

// 1 - <a,b>/(|a||b|), in [0,2]. A zero-norm vector makes the distance
// undefined; it is pinned to 1 (maximally uninformative) and a warning is
// written to stderr.
double cosine_distance(std::span<const double> a, std::span<const double> b);

struct EvalPairOutcome {
  std::string id1, id2;
  double distance = 0.0;
  bool is_same_type = false;
};

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;      // one per distinct distance, ascending
  double average_precision = 0.0;   // in [0,1]
};

// Rank-based AP: sort by ascending distance (stable, so tied distances keep
// input order), average the precision at each positive's rank. Requires at
// least one same-type pair.
PRCurve same_different_ap(std::span<const EvalPairOutcome> outcomes);

// Posterior mean of the encoder; the embedding.
Array embed(const rnn::EncoderParams& encoder, const Segment& segment);

// Embeds every segment once, forms all unordered pairs (optionally a seeded
// subsample of max_pairs), and returns AP as a percentage.
double evaluate_model(const rnn::EncoderParams& encoder, const Dataset& test,
                      std::size_t max_pairs = 0, std::uint64_t sample_seed = 0);

struct EvalReport {
  double ap_percent = 0.0;
  std::size_t num_pairs = 0;
  std::size_t num_positives = 0;
  PRCurve curve;
};

using DistanceFn = std::function<double(const Segment&, const Segment&)>;

// AP over all unordered pairs with an arbitrary distance function; the
// learned and baseline evaluations all funnel through here.
EvalReport evaluate_report(const Dataset& data, const DistanceFn& dist,
                           std::size_t max_pairs = 0, std::uint64_t sample_seed = 0);

double ap_percent_over_pairs(const Dataset& data, const DistanceFn& dist,
                             std::size_t max_pairs = 0, std::uint64_t sample_seed = 0,
                             PRCurve* curve_out = nullptr);

// Precomputed embeddings for the learned models; exposed so the CLI can
// reuse them for the report and the PR dump.
EvalReport evaluate_model_report(const rnn::EncoderParams& encoder, const Dataset& test,
                                 std::size_t max_pairs = 0, std::uint64_t sample_seed = 0);

// n frames sampled at equally spaced continuous positions in [0, T-1] with
// linear interpolation, flattened time-major to an {n*D} vector.
Array downsample_embedding(const Segment& segment, std::size_t n = 10);

double evaluate_downsampling(const Dataset& test, std::size_t n = 10,
                             std::size_t max_pairs = 0, std::uint64_t sample_seed = 0);

// Dynamic time warping with per-cell cost cosine_distance(frame_i, frame_j),
// steps {(1,0),(0,1),(1,1)}, endpoints aligned; the minimum total cost is
// divided by the number of aligned cells on its path.
double dtw_cost(const Segment& a, const Segment& b);

double evaluate_dtw(const Dataset& test, std::size_t max_pairs = 0,
                    std::uint64_t sample_seed = 0);

}  // namespace awe::eval
