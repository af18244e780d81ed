// SPDX-License-Identifier: Apache-2.0

#include "awe/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace awe::train {

AdamState AdamState::like(std::span<const Array* const> params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Array* p : params) {
    s.m.push_back(Array::zeros(p->shape));
    s.v.push_back(Array::zeros(p->shape));
  }
  return s;
}

void adam_step(std::span<Array* const> params, std::span<const std::string> names,
               std::span<const Array> grads, AdamState& state, double lr,
               const AdamConfig& config) {
  if (params.size() != grads.size() || params.size() != names.size() ||
      params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Array& value = *params[p];
    const Array& g = grads[p];
    if (value.shape != g.shape)
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + names[p]);
    Array& m = state.m[p];
    Array& v = state.v[p];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double gi = g.data[i];
      if (!std::isfinite(gi))
        throw std::runtime_error("adam_step: non-finite gradient for parameter " +
                                 names[p]);
      m.data[i] = config.beta1 * m.data[i] + (1.0 - config.beta1) * gi;
      v.data[i] = config.beta2 * v.data[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m.data[i] / bc1;
      const double v_hat = v.data[i] / bc2;
      value.data[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

void clip_global_norm(std::span<Array> grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const Array& g : grads)
    for (double v : g.data) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double factor = max_norm / norm;
  for (Array& g : grads)
    for (double& v : g.data) v *= factor;
}

}  // namespace awe::train
