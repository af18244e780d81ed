// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference implementations. Everything here is written as plain
// scalar loops, independent of the tape-based code paths it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <vector>

#include "awe/array.hpp"
#include "awe/evaluate.hpp"
#include "awe/gru.hpp"
#include "awe/segment.hpp"

namespace oracle {

using awe::Array;
using awe::Segment;
using awe::Shape;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Textbook GRU step: r = s(Wr x + Ur h + br), u = s(Wu x + Uu h + bu),
// c = tanh(Wc x + Uc (r*h) + bc), h' = (1-u)*h + u*c.
inline std::vector<double> gru_step(const awe::rnn::GruCellParams& p,
                                    std::span<const double> x,
                                    std::span<const double> h) {
  const std::size_t in = p.input_dim, hd = p.hidden_dim;
  auto affine = [&](const Array& w, const Array& u, const Array& b, std::size_t j,
                    std::span<const double> gate_h) {
    double s = b.data[j];
    for (std::size_t i = 0; i < in; ++i) s += x[i] * w.data[i * hd + j];
    for (std::size_t i = 0; i < hd; ++i) s += gate_h[i] * u.data[i * hd + j];
    return s;
  };
  std::vector<double> r(hd), u(hd), rh(hd), out(hd);
  for (std::size_t j = 0; j < hd; ++j) r[j] = sigmoid(affine(p.w_r, p.u_r, p.b_r, j, h));
  for (std::size_t j = 0; j < hd; ++j) u[j] = sigmoid(affine(p.w_u, p.u_u, p.b_u, j, h));
  for (std::size_t j = 0; j < hd; ++j) rh[j] = r[j] * h[j];
  for (std::size_t j = 0; j < hd; ++j) {
    const double c = std::tanh(affine(p.w_c, p.u_c, p.b_c, j, rh));
    out[j] = (1.0 - u[j]) * h[j] + u[j] * c;
  }
  return out;
}

// Runs one direction over {T,in} frames; returns the state at every original
// time index plus the final state.
inline std::vector<std::vector<double>> gru_sequence(const awe::rnn::GruCellParams& p,
                                                     const Array& inputs, bool reverse) {
  const std::size_t steps = inputs.rows(), in = inputs.cols();
  std::vector<std::vector<double>> states(steps);
  std::vector<double> h(p.hidden_dim, 0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    std::span<const double> x(inputs.data.data() + t * in, in);
    h = gru_step(p, x, h);
    states[t] = h;
  }
  return states;
}

struct EncodedPosterior {
  std::vector<double> mean;
  std::vector<double> log_variance;
};

inline Array run_layers(const std::vector<awe::rnn::GruCellParams>& cells,
                        std::size_t num_layers, bool bidirectional, const Array& input,
                        std::vector<double>* final_f, std::vector<double>* final_b) {
  const std::size_t dirs = bidirectional ? 2 : 1;
  Array layer_in = input;
  Array outputs;
  for (std::size_t l = 0; l < num_layers; ++l) {
    auto fwd = gru_sequence(cells[l * dirs + 0], layer_in, false);
    const std::size_t steps = layer_in.rows();
    const std::size_t hd = cells[l * dirs].hidden_dim;
    if (bidirectional) {
      auto bwd = gru_sequence(cells[l * dirs + 1], layer_in, true);
      outputs = Array::zeros({steps, 2 * hd});
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t j = 0; j < hd; ++j) {
          outputs.at(t, j) = fwd[t][j];
          outputs.at(t, hd + j) = bwd[t][j];
        }
      }
      if (final_f != nullptr) *final_f = fwd[steps - 1];
      if (final_b != nullptr) *final_b = bwd[0];
    } else {
      outputs = Array::zeros({steps, hd});
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t j = 0; j < hd; ++j) outputs.at(t, j) = fwd[t][j];
      if (final_f != nullptr) *final_f = fwd[steps - 1];
    }
    layer_in = outputs;
  }
  return outputs;
}

inline EncodedPosterior encode(const awe::rnn::EncoderParams& p, const Array& frames) {
  std::vector<double> ff, fb;
  run_layers(p.cells, p.num_layers, true, frames, &ff, &fb);
  std::vector<double> cat(ff);
  cat.insert(cat.end(), fb.begin(), fb.end());
  const std::size_t out_dim = 2 * p.latent_dim;
  std::vector<double> proj(out_dim);
  for (std::size_t j = 0; j < out_dim; ++j) {
    double s = p.proj_b.data[j];
    for (std::size_t i = 0; i < cat.size(); ++i) s += cat[i] * p.proj_w.data[i * out_dim + j];
    proj[j] = s;
  }
  EncodedPosterior out;
  out.mean.assign(proj.begin(), proj.begin() + p.latent_dim);
  out.log_variance.assign(proj.begin() + p.latent_dim, proj.end());
  return out;
}

inline Array decode(const awe::rnn::DecoderParams& p, const std::vector<double>& z,
                    std::size_t num_frames) {
  Array input = Array::zeros({num_frames, p.latent_dim});
  for (std::size_t t = 0; t < num_frames; ++t)
    for (std::size_t j = 0; j < p.latent_dim; ++j) input.at(t, j) = z[j];
  Array outputs = run_layers(p.cells, p.num_layers, p.bidirectional, input, nullptr, nullptr);
  Array frames = Array::zeros({num_frames, p.output_dim});
  for (std::size_t t = 0; t < num_frames; ++t) {
    for (std::size_t j = 0; j < p.output_dim; ++j) {
      double s = p.out_b.data[j];
      for (std::size_t i = 0; i < outputs.cols(); ++i)
        s += outputs.at(t, i) * p.out_w.data[i * p.output_dim + j];
      frames.at(t, j) = s;
    }
  }
  return frames;
}

inline double gaussian_ll(const Array& x, const Array& x_hat, double sigma2) {
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.data[i] - x_hat.data[i];
    sse += d * d;
  }
  const double n = static_cast<double>(x.size());
  return -sse / (2.0 * sigma2) - 0.5 * n * std::log(2.0 * std::numbers::pi * sigma2);
}

// Threshold-sweep AP: sweep every distinct distance ascending; step
// interpolation of the PR curve.
inline double ap_threshold_sweep(std::span<const awe::eval::EvalPairOutcome> outcomes) {
  std::vector<double> thresholds;
  for (const auto& o : outcomes) thresholds.push_back(o.distance);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::size_t total_pos = 0;
  for (const auto& o : outcomes) total_pos += o.is_same_type ? 1 : 0;

  double ap = 0.0;
  double prev_recall = 0.0;
  for (double th : thresholds) {
    std::size_t accepted = 0, accepted_pos = 0;
    for (const auto& o : outcomes) {
      if (o.distance <= th) {
        ++accepted;
        accepted_pos += o.is_same_type ? 1 : 0;
      }
    }
    const double precision = static_cast<double>(accepted_pos) / static_cast<double>(accepted);
    const double recall = static_cast<double>(accepted_pos) / static_cast<double>(total_pos);
    ap += precision * (recall - prev_recall);
    prev_recall = recall;
  }
  return ap;
}

// Exhaustive DTW: enumerate every monotone path from (0,0) to (n-1,m-1) with
// steps {(1,0),(0,1),(1,1)}; pick the lexicographically minimal
// (total cost, path length) and normalize by the length.
inline void dtw_paths(const std::vector<std::vector<double>>& cell, std::size_t i,
                      std::size_t j, double cost, std::size_t len, double& best_cost,
                      std::size_t& best_len, bool& found) {
  cost += cell[i][j];
  len += 1;
  if (i + 1 == cell.size() && j + 1 == cell[0].size()) {
    if (!found || cost < best_cost || (cost == best_cost && len < best_len)) {
      best_cost = cost;
      best_len = len;
      found = true;
    }
    return;
  }
  if (i + 1 < cell.size() && j + 1 < cell[0].size())
    dtw_paths(cell, i + 1, j + 1, cost, len, best_cost, best_len, found);
  if (i + 1 < cell.size()) dtw_paths(cell, i + 1, j, cost, len, best_cost, best_len, found);
  if (j + 1 < cell[0].size()) dtw_paths(cell, i, j + 1, cost, len, best_cost, best_len, found);
}

inline double dtw_exhaustive(const Segment& a, const Segment& b) {
  const std::size_t n = a.num_frames(), m = b.num_frames(), d = a.feat_dim();
  std::vector<std::vector<double>> cell(n, std::vector<double>(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      cell[i][j] = awe::eval::cosine_distance(
          std::span<const double>(a.frames.data.data() + i * d, d),
          std::span<const double>(b.frames.data.data() + j * d, d));
  double best_cost = 0.0;
  std::size_t best_len = 0;
  bool found = false;
  dtw_paths(cell, 0, 0, 0.0, 0, best_cost, best_len, found);
  return best_cost / static_cast<double>(best_len);
}

// Monte-Carlo KL(q || N(0,I)) estimate with standard error, from mean and
// log-variance vectors.
struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

inline McEstimate kl_monte_carlo(std::span<const double> mean,
                                 std::span<const double> log_var, std::size_t samples,
                                 awe::Rng& rng) {
  // E_q[log q(z) - log p(z)] over z ~ q.
  double sum = 0.0, sumsq = 0.0;
  const std::size_t dim = mean.size();
  for (std::size_t s = 0; s < samples; ++s) {
    double term = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double sd = std::exp(0.5 * log_var[j]);
      const double eps = rng.normal();
      const double z = mean[j] + sd * eps;
      const double log_q = -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * log_var[j] -
                           0.5 * eps * eps;
      const double log_p = -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
      term += log_q - log_p;
    }
    sum += term;
    sumsq += term * term;
  }
  McEstimate e;
  const double n = static_cast<double>(samples);
  e.value = sum / n;
  const double var = std::max(0.0, sumsq / n - e.value * e.value);
  e.stderr_ = std::sqrt(var / n);
  return e;
}

}  // namespace oracle
