// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "awe/array.hpp"

namespace awe::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators, aligned by position with the parameter
// visit order.
struct AdamState {
  std::vector<Array> m;
  std::vector<Array> v;
  std::int64_t t = 0;

  bool empty() const { return m.empty(); }
  static AdamState like(std::span<const Array* const> params);
};

// One bias-corrected Adam update, in place:
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps).
// A non-finite gradient aborts with the offending parameter's name.
void adam_step(std::span<Array* const> params, std::span<const std::string> names,
               std::span<const Array> grads, AdamState& state, double lr,
               const AdamConfig& config = {});

// Global-norm gradient clipping; a non-positive max_norm disables it.
void clip_global_norm(std::span<Array> grads, double max_norm);

}  // namespace awe::train
