// SPDX-License-Identifier: Apache-2.0
//
// The model container (encoder + decoder) and the checkpoint file format:
//
//   bytes 0..7   magic "AWECKPT1"
//   then         ASCII decimal <header byte count> '\n'
//   then         header text, one record per line:
//                  config <key> <value>
//                  meta step <n> | meta epoch <n> | meta best_val_ap <v|NA>
//                  meta adam_step <n>          (when optimizer state stored)
//                  rng <stream state tokens>   (when the RNG state is stored)
//                  param <name> <rank> <d0> .. <offset-into-payload>
//   then         payload: raw little-endian float64 arrays in param order
//
// Loading a file and saving it again reproduces it byte for byte.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "awe/gru.hpp"
#include "awe/optimizer.hpp"

namespace awe::train {

struct Model {
  rnn::EncoderParams encoder;
  rnn::DecoderParams decoder;
};

Model make_model(std::size_t feat_dim, std::size_t hidden_dim, std::size_t latent_dim,
                 std::size_t num_layers, bool decoder_bidirectional);
void init_model(Model& model, Rng& rng);
void visit_params(Model& model, const rnn::ParamVisitor& fn);

struct Checkpoint {
  Model model;
  // Ordered key/value snapshot of the run configuration; must include the
  // architecture keys (feat_dim, hidden_dim, latent_dim, num_layers,
  // decoder_bidirectional) so the loader can rebuild the model.
  std::vector<std::pair<std::string, std::string>> config;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double best_val_ap = -1.0;  // negative means "not evaluated"

  // Resumable extras; optional.
  AdamState opt;
  std::string rng_state;

  std::string config_value(const std::string& key) const;  // "" when absent
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace awe::train
