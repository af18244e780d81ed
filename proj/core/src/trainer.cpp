// SPDX-License-Identifier: Apache-2.0

#include "awe/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "awe/evaluate.hpp"

namespace awe::train {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

// Runs fn(i) for i in [0, count) on up to `threads` workers over contiguous
// blocks. The first exception wins and is rethrown after the join.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const std::size_t per = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * per;
    const std::size_t end = std::min(count, begin + per);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct ItemResult {
  std::vector<Array> grads;  // parameter visit order
  double value = 0.0;
  double kl = 0.0;
};

struct ParamRefs {
  std::vector<std::string> names;
  std::vector<Array*> arrays;
};

ParamRefs collect_params(Model& model) {
  ParamRefs refs;
  visit_params(model, [&](const std::string& name, Array& a) {
    refs.names.push_back(name);
    refs.arrays.push_back(&a);
  });
  return refs;
}

Array noise_block(Rng& rng, std::size_t k, std::size_t latent) {
  Array block = Array::zeros({k, latent});
  for (double& v : block.data) v = rng.normal();
  return block;
}

// Leaf gradients in visit order (encoder leaves, then decoder leaves).
std::vector<Array> harvest(const rnn::EncoderT& enc, const rnn::DecoderT* dec) {
  std::vector<Array> grads;
  grads.reserve(enc.leaves.size() + (dec != nullptr ? dec->leaves.size() : 0));
  auto pull = [&](const ad::Tensor& leaf) {
    auto g = leaf.grad();
    grads.emplace_back(leaf.shape(), std::vector<double>(g.begin(), g.end()));
  };
  for (const auto& l : enc.leaves) pull(l);
  if (dec != nullptr)
    for (const auto& l : dec->leaves) pull(l);
  return grads;
}

struct RunState {
  Model model;
  AdamState opt;
  Rng rng;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
};

void require_same_architecture(const TrainConfig& config, const Model& other,
                               const char* what) {
  const auto& e = other.encoder;
  const auto& d = other.decoder;
  const bool ok = e.input_dim == config.feat_dim && e.hidden_dim == config.hidden_dim &&
                  e.latent_dim == config.latent_dim && e.num_layers == config.num_layers &&
                  d.bidirectional == config.decoder_bidirectional &&
                  d.hidden_dim == config.hidden_dim && d.latent_dim == config.latent_dim &&
                  d.output_dim == config.feat_dim && d.num_layers == config.num_layers;
  if (!ok)
    throw std::invalid_argument(std::string(what) +
                                ": checkpoint architecture does not match the configuration");
}

Checkpoint snapshot(const RunState& state, const TrainConfig& config, double best_ap) {
  Checkpoint c;
  c.model = state.model;
  c.config = config_snapshot(config);
  c.step = state.step;
  c.epoch = state.epoch;
  c.best_val_ap = best_ap;
  c.opt = state.opt;
  c.rng_state = state.rng.serialize();
  return c;
}

RunState initial_state(const TrainConfig& config, const Checkpoint* init,
                       const Checkpoint* resume, const char* what) {
  RunState state;
  state.rng = Rng(config.seed);
  if (resume != nullptr) {
    require_same_architecture(config, resume->model, what);
    if (resume->opt.empty() || resume->rng_state.empty())
      throw std::invalid_argument(std::string(what) +
                                  ": resume checkpoint lacks optimizer or RNG state");
    state.model = resume->model;
    state.opt = resume->opt;
    state.rng.restore(resume->rng_state);
    state.step = resume->step;
    state.epoch = resume->epoch;
    return state;
  }
  if (init != nullptr) {
    // A new run that starts at the given parameters: fresh optimizer, fresh
    // stream seeded from this run's config.
    require_same_architecture(config, init->model, what);
    state.model = init->model;
    return state;
  }
  state.model = make_model(config.feat_dim, config.hidden_dim, config.latent_dim,
                           config.num_layers, config.decoder_bidirectional);
  init_model(state.model, state.rng);
  return state;
}

using DrawFn = std::function<void(std::size_t slot, std::size_t item)>;
using EvalFn = std::function<ItemResult(std::size_t slot, std::size_t item)>;
using EpochFn = std::function<void(const std::vector<std::size_t>&)>;
using WeightFn = std::function<double(std::int64_t)>;

Checkpoint run_loop(const TrainConfig& config, const Dataset* val, std::ostream* metrics,
                    RunState& state, std::size_t item_count, bool maximize,
                    const DrawFn& draw, const EvalFn& eval, const EpochFn& epoch_begin,
                    const WeightFn& kl_weight_at) {
  ParamRefs refs = collect_params(state.model);
  if (state.opt.empty())
    state.opt = AdamState::like(
        std::span<const Array* const>(refs.arrays.data(), refs.arrays.size()));
  const std::size_t threads = config.threads > 0
                                  ? config.threads
                                  : std::max(1u, std::thread::hardware_concurrency());

  BestTracker best;
  Checkpoint best_checkpoint;
  std::int64_t last_evaluated_step = -1;

  auto validate = [&]() {
    const double ap = eval::evaluate_model(state.model.encoder, *val);
    if (best.consider(ap)) best_checkpoint = snapshot(state, config, ap);
    last_evaluated_step = state.step;
    return ap;
  };

  std::vector<std::size_t> order(item_count);
  const std::size_t batches_per_epoch =
      (item_count + config.batch_size - 1) / config.batch_size;

  for (; state.epoch < static_cast<std::int64_t>(config.max_epochs); ++state.epoch) {
    // Identity first: the epoch's order must be a pure function of the
    // stream state so that resuming reproduces it.
    for (std::size_t i = 0; i < item_count; ++i) order[i] = i;
    state.rng.shuffle(order);
    if (epoch_begin) epoch_begin(order);

    std::size_t batch_index = 0;
    for (std::size_t batch_start = 0; batch_start < item_count;
         batch_start += config.batch_size, ++batch_index) {
      const std::size_t batch_end = std::min(item_count, batch_start + config.batch_size);
      const std::size_t batch_n = batch_end - batch_start;

      // Sequential pre-draw in batch order keeps the stream layout fixed
      // regardless of threading.
      for (std::size_t s = 0; s < batch_n; ++s) draw(s, order[batch_start + s]);

      std::vector<ItemResult> results(batch_n);
      parallel_for(batch_n, threads,
                   [&](std::size_t s) { results[s] = eval(s, order[batch_start + s]); });

      // Ordered reduction.
      std::vector<Array> grad_sum;
      double value_sum = 0.0, kl_sum = 0.0;
      for (std::size_t s = 0; s < batch_n; ++s) {
        value_sum += results[s].value;
        kl_sum += results[s].kl;
        if (s == 0) {
          grad_sum = std::move(results[s].grads);
        } else {
          for (std::size_t p = 0; p < grad_sum.size(); ++p)
            for (std::size_t i = 0; i < grad_sum[p].size(); ++i)
              grad_sum[p].data[i] += results[s].grads[p].data[i];
        }
      }
      const double objective = value_sum / static_cast<double>(batch_n);
      const double kl_mean = kl_sum / static_cast<double>(batch_n);
      if (!std::isfinite(objective))
        throw std::runtime_error("training: objective is non-finite at step " +
                                 std::to_string(state.step));

      const double weight_used = kl_weight_at(state.step);
      const double sign = maximize ? -1.0 : 1.0;  // Adam minimizes
      for (auto& g : grad_sum)
        for (double& v : g.data) v *= sign / static_cast<double>(batch_n);
      clip_global_norm(std::span<Array>(grad_sum.data(), grad_sum.size()), config.grad_clip);
      adam_step(std::span<Array* const>(refs.arrays.data(), refs.arrays.size()),
                std::span<const std::string>(refs.names.data(), refs.names.size()),
                std::span<const Array>(grad_sum.data(), grad_sum.size()), state.opt,
                config.learning_rate);
      state.step += 1;

      // Validation is due on a fixed step cadence, or at each epoch's last
      // batch when no cadence is configured.
      std::optional<double> val_ap;
      if (val != nullptr) {
        const bool due = config.eval_every > 0
                             ? state.step % static_cast<std::int64_t>(config.eval_every) == 0
                             : batch_index + 1 == batches_per_epoch;
        if (due) val_ap = validate();
      }

      if (metrics != nullptr) {
        *metrics << "step " << state.step << " objective " << fmt(objective) << " kl "
                 << fmt(kl_mean) << " weight " << fmt(weight_used) << " val_ap "
                 << (val_ap ? fmt(*val_ap) : "NA") << '\n';
        metrics->flush();
      }
    }
  }
  // The final state competes too even when the cadence skipped it.
  if (val != nullptr && state.step > 0 && last_evaluated_step != state.step) validate();

  if (val != nullptr && best.has_best()) return best_checkpoint;
  return snapshot(state, config, -1.0);
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::vae: return "vae";
    case ModelKind::cvae: return "cvae";
    case ModelKind::mcvae: return "mcvae";
    case ModelKind::ae: return "ae";
    case ModelKind::cae: return "cae";
    case ModelKind::siamese: return "siamese";
  }
  return "?";
}

ModelKind model_kind_from(const std::string& name) {
  if (name == "vae") return ModelKind::vae;
  if (name == "cvae") return ModelKind::cvae;
  if (name == "mcvae") return ModelKind::mcvae;
  if (name == "ae") return ModelKind::ae;
  if (name == "cae") return ModelKind::cae;
  if (name == "siamese") return ModelKind::siamese;
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

std::vector<std::pair<std::string, std::string>> config_snapshot(const TrainConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("model", to_string(c.kind));
  out.emplace_back("learning_rate", fmt(c.learning_rate));
  out.emplace_back("batch_size", std::to_string(c.batch_size));
  out.emplace_back("max_epochs", std::to_string(c.max_epochs));
  out.emplace_back("eval_every", std::to_string(c.eval_every));
  out.emplace_back("seed", std::to_string(c.seed));
  out.emplace_back("sigma2", fmt(c.loss.sigma2));
  out.emplace_back("kl_weight", fmt(c.loss.kl_weight));
  out.emplace_back("K", std::to_string(c.loss.K));
  out.emplace_back("margin", fmt(c.loss.margin));
  out.emplace_back("anneal_k", fmt(c.anneal.k));
  out.emplace_back("anneal_s0", fmt(c.anneal.s0));
  out.emplace_back("feat_dim", std::to_string(c.feat_dim));
  out.emplace_back("hidden_dim", std::to_string(c.hidden_dim));
  out.emplace_back("latent_dim", std::to_string(c.latent_dim));
  out.emplace_back("num_layers", std::to_string(c.num_layers));
  out.emplace_back("decoder_bidirectional", c.decoder_bidirectional ? "true" : "false");
  out.emplace_back("grad_clip", fmt(c.grad_clip));
  out.emplace_back("threads", std::to_string(c.threads));
  return out;
}

Checkpoint pretrain_vae(const TrainConfig& config, const Dataset& train, const Dataset* val,
                        std::ostream* metrics, const Checkpoint* resume) {
  if (config.kind != ModelKind::vae)
    throw std::invalid_argument("pretrain_vae: config.kind must be vae");
  if (train.size() == 0) throw std::invalid_argument("pretrain_vae: empty training set");

  RunState state = initial_state(config, nullptr, resume, "pretrain_vae");
  std::vector<Array> noise(config.batch_size);

  auto draw = [&](std::size_t slot, std::size_t) {
    noise[slot] = noise_block(state.rng, config.loss.K, config.latent_dim);
  };
  auto kl_weight_at = [&](std::int64_t t) {
    return obj::anneal_weight(static_cast<double>(t), config.anneal);
  };
  auto eval_item = [&](std::size_t slot, std::size_t item) {
    ad::Tape tape;
    rnn::EncoderT enc = rnn::lift(tape, state.model.encoder, true);
    rnn::DecoderT dec = rnn::lift(tape, state.model.decoder, true);
    const double w = kl_weight_at(state.step);
    obj::TermParts parts =
        obj::vae_term(tape, enc, dec, train[item], config.loss.sigma2, w, noise[slot]);
    tape.backward(parts.term);
    ItemResult r;
    r.grads = harvest(enc, &dec);
    r.value = parts.term.item();
    r.kl = parts.kl_value;
    return r;
  };

  return run_loop(config, val, metrics, state, train.size(), /*maximize=*/true, draw,
                  eval_item, nullptr, kl_weight_at);
}

Checkpoint train_correspondence(const TrainConfig& config, const Dataset& data,
                                const PairList& pairs, const Dataset* val,
                                const Checkpoint* init, std::ostream* metrics,
                                const Checkpoint* resume) {
  const ModelKind kind = config.kind;
  if (kind == ModelKind::vae)
    throw std::invalid_argument("train_correspondence: use pretrain_vae for the vae kind");
  const bool pair_based = kind != ModelKind::ae;
  if (pair_based && pairs.items.empty())
    throw std::invalid_argument("train_correspondence: empty pair list");
  for (const auto& [a, b] : pairs.items)
    if (a >= data.size() || b >= data.size())
      throw std::invalid_argument("train_correspondence: pair index out of range");

  RunState state = initial_state(config, init, resume, "train_correspondence");
  const std::size_t item_count = pair_based ? pairs.items.size() : data.size();

  std::vector<std::pair<Array, Array>> pair_noise(config.batch_size);
  std::vector<std::size_t> negatives(kind == ModelKind::siamese ? item_count : 0);

  // Different-type candidate lists for negative sampling, built on demand.
  std::unordered_map<std::string, std::vector<std::size_t>> diff_candidates;
  auto candidates_for = [&](const std::string& label) -> const std::vector<std::size_t>& {
    auto it = diff_candidates.find(label);
    if (it != diff_candidates.end()) return it->second;
    std::vector<std::size_t> c;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data[i].label != label && data[i].label != kUnknownLabel) c.push_back(i);
    if (c.empty())
      throw std::invalid_argument(
          "train_correspondence: no different-type segment available for negatives");
    return diff_candidates.emplace(label, std::move(c)).first->second;
  };

  auto epoch_begin = [&](const std::vector<std::size_t>& order) {
    if (kind != ModelKind::siamese) return;
    for (std::size_t i : order) {
      const auto& anchor = data[pairs.items[i].first];
      const auto& cand = candidates_for(anchor.label);
      negatives[i] = cand[static_cast<std::size_t>(state.rng.below(cand.size()))];
    }
  };

  auto draw = [&](std::size_t slot, std::size_t) {
    if (kind == ModelKind::cvae || kind == ModelKind::mcvae) {
      pair_noise[slot].first = noise_block(state.rng, config.loss.K, config.latent_dim);
      pair_noise[slot].second = noise_block(state.rng, config.loss.K, config.latent_dim);
    }
  };

  auto kl_weight_at = [&](std::int64_t t) -> double {
    switch (kind) {
      case ModelKind::cvae:
        // Sigmoid ramp from 0 up to the configured cap.
        return config.loss.kl_weight *
               obj::anneal_weight(static_cast<double>(t), config.anneal);
      case ModelKind::mcvae:
        return config.loss.kl_weight;
      default:
        return 0.0;
    }
  };

  auto eval_item = [&](std::size_t slot, std::size_t item) {
    ad::Tape tape;
    rnn::EncoderT enc = rnn::lift(tape, state.model.encoder, true);
    ItemResult r;
    if (kind == ModelKind::siamese) {
      const auto& [a, s] = pairs.items[item];
      obj::Triplet t{&data[a], &data[s], &data[negatives[item]]};
      obj::TermParts parts = obj::triplet_term(tape, enc, t, config.loss.margin);
      tape.backward(parts.term);
      // The Siamese objective never touches the decoder; pad with zeros so
      // the reduction stays aligned with the parameter visit order.
      r.grads = harvest(enc, nullptr);
      rnn::visit_params(state.model.decoder, [&](const std::string&, Array& a2) {
        r.grads.push_back(Array::zeros(a2.shape));
      });
      r.value = parts.term.item();
      return r;
    }
    rnn::DecoderT dec = rnn::lift(tape, state.model.decoder, true);
    obj::TermParts parts;
    if (kind == ModelKind::ae) {
      parts = obj::ae_term(tape, enc, dec, data[item]);
    } else {
      const auto& [i1, i2] = pairs.items[item];
      obj::SegmentPair pr{&data[i1], &data[i2]};
      if (kind == ModelKind::cae) {
        parts = obj::cae_term(tape, enc, dec, pr);
      } else {
        const double w = kl_weight_at(state.step);
        parts = obj::correspondence_term(tape, enc, dec, pr, config.loss.sigma2, w,
                                         pair_noise[slot], kind == ModelKind::mcvae);
      }
    }
    tape.backward(parts.term);
    r.grads = harvest(enc, &dec);
    r.value = parts.term.item();
    r.kl = parts.kl_value;
    return r;
  };

  const bool maximize = kind == ModelKind::cvae || kind == ModelKind::mcvae;
  return run_loop(config, val, metrics, state, item_count, maximize, draw, eval_item,
                  epoch_begin, kl_weight_at);
}

}  // namespace awe::train
