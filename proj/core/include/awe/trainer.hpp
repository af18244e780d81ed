// SPDX-License-Identifier: Apache-2.0
//
// The optimization loop: Adam over minibatches, per-step metrics, periodic
// validation AP, best-checkpoint retention, and exact resumability.
//
// One seeded stream drives everything random, in a pinned order:
//   1. parameter initialization (visit order, row-major);
//   2. per epoch: minibatch shuffle, then (siamese only) one negative draw
//      per pair in shuffled order;
//   3. per step: latent noise per batch item in batch order (K rows for a
//      VAE item; K rows for each side of a correspondence pair).
// Two runs with the same (seed, config, dataset) are bitwise identical, and
// results do not depend on the worker thread count: each item's gradient is
// computed on its own tape and reduced in batch order.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "awe/checkpoint.hpp"
#include "awe/dataset.hpp"
#include "awe/objectives.hpp"
#include "awe/pairs.hpp"

namespace awe::train {

enum class ModelKind { vae, cvae, mcvae, ae, cae, siamese };

std::string to_string(ModelKind kind);
ModelKind model_kind_from(const std::string& name);

struct TrainConfig {
  ModelKind kind = ModelKind::vae;
  double learning_rate = 0.001;
  std::size_t batch_size = 100;
  std::size_t max_epochs = 1;
  // Steps between validation AP evaluations; 0 evaluates once per epoch.
  std::size_t eval_every = 0;
  std::uint64_t seed = 0;
  obj::LossConfig loss;
  obj::AnnealSchedule anneal;

  std::size_t feat_dim = 39;
  std::size_t hidden_dim = 300;
  std::size_t latent_dim = 130;
  std::size_t num_layers = 2;
  bool decoder_bidirectional = true;

  double grad_clip = 5.0;     // global-norm clip; <= 0 disables
  std::size_t threads = 0;    // worker threads per batch; 0 = hardware
};

// Ordered key=value snapshot embedded in checkpoints.
std::vector<std::pair<std::string, std::string>> config_snapshot(const TrainConfig& config);

// Annealed-VAE pre-training: maximizes j_vae with KL weight anneal(t) where t
// is the optimizer step. With a validation set the checkpoint with the best
// validation AP is returned; otherwise the final state.
//
// `resume` continues an earlier run from an epoch boundary; it must carry
// optimizer and RNG state. Metrics lines go to `metrics` when non-null:
//   step <n> objective <v> kl <v> weight <v> val_ap <v|NA>
Checkpoint pretrain_vae(const TrainConfig& config, const Dataset& train,
                        const Dataset* val, std::ostream* metrics = nullptr,
                        const Checkpoint* resume = nullptr);

// Correspondence training (cvae, mcvae, cae or siamese) over same-type pairs,
// starting from `init` when given (architectures must match) or from fresh
// seeded parameters (the corr-train-only regime).
Checkpoint train_correspondence(const TrainConfig& config, const Dataset& data,
                                const PairList& pairs, const Dataset* val,
                                const Checkpoint* init = nullptr,
                                std::ostream* metrics = nullptr,
                                const Checkpoint* resume = nullptr);

// Best-AP retention: keeps the earliest snapshot of the maximum value.
class BestTracker {
 public:
  bool consider(double ap) {
    if (has_best_ && ap <= best_) return false;
    best_ = ap;
    has_best_ = true;
    return true;
  }
  bool has_best() const { return has_best_; }
  double best() const { return best_; }

 private:
  double best_ = 0.0;
  bool has_best_ = false;
};

}  // namespace awe::train
