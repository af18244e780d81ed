// SPDX-License-Identifier: Apache-2.0
//
// GRU cells, the bidirectional recurrent encoder that outputs a diagonal
// Gaussian posterior over the latent embedding, and the decoder that receives
// the latent sample as its input at every output step.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "awe/array.hpp"
#include "awe/rng.hpp"
#include "awe/segment.hpp"
#include "awe/tensor.hpp"

namespace awe::rnn {

// Gate parameters. w_* act on the step input, u_* on the previous hidden
// state, b_* are biases; r = reset, u = update, c = candidate.
struct GruCellParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Array w_r, u_r, b_r;
  Array w_u, u_u, b_u;
  Array w_c, u_c, b_c;

  static GruCellParams sized(std::size_t input_dim, std::size_t hidden_dim);
};

struct EncoderParams {
  std::size_t input_dim = 39;
  std::size_t hidden_dim = 300;
  std::size_t latent_dim = 130;
  std::size_t num_layers = 2;
  std::vector<GruCellParams> cells;  // [layer * 2 + dir], dir 0 forward
  Array proj_w;                      // {2*hidden, 2*latent}
  Array proj_b;                      // {1, 2*latent}
};

struct DecoderParams {
  std::size_t latent_dim = 130;
  std::size_t hidden_dim = 300;
  std::size_t output_dim = 39;
  std::size_t num_layers = 2;
  bool bidirectional = true;
  std::vector<GruCellParams> cells;  // bidirectional: [layer*2+dir]; else [layer]
  Array out_w;                       // {2*hidden or hidden, output_dim}
  Array out_b;                       // {1, output_dim}
};

EncoderParams make_encoder(std::size_t input_dim, std::size_t hidden_dim,
                           std::size_t latent_dim, std::size_t num_layers = 2);
DecoderParams make_decoder(std::size_t latent_dim, std::size_t hidden_dim,
                           std::size_t output_dim, std::size_t num_layers = 2,
                           bool bidirectional = true);

// Weight matrices uniform in [-1/sqrt(hidden), +1/sqrt(hidden)], biases zero,
// filled row-major in visit_params order.
void init_params(EncoderParams& p, Rng& rng);
void init_params(DecoderParams& p, Rng& rng);

// Deterministic named traversal; the optimizer, checkpoints and gradient
// checks all rely on this order.
using ParamVisitor = std::function<void(const std::string&, Array&)>;
void visit_params(EncoderParams& p, const ParamVisitor& fn);
void visit_params(DecoderParams& p, const ParamVisitor& fn);

// Diagonal Gaussian posterior as plain values.
struct Posterior {
  Array mean;          // {latent}
  Array log_variance;  // {latent}
};

// ---- tape-side mirrors -----------------------------------------------------

struct GruCellT {
  ad::Tensor w_r, u_r, b_r, w_u, u_u, b_u, w_c, u_c, b_c;
};

struct EncoderT {
  const EncoderParams* dims = nullptr;
  std::vector<GruCellT> cells;
  ad::Tensor proj_w, proj_b;
  std::vector<ad::Tensor> leaves;  // visit_params order
};

struct DecoderT {
  const DecoderParams* dims = nullptr;
  std::vector<GruCellT> cells;
  ad::Tensor out_w, out_b;
  std::vector<ad::Tensor> leaves;
};

struct PosteriorT {
  ad::Tensor mean;          // {1, latent}
  ad::Tensor log_variance;  // {1, latent}
};

EncoderT lift(ad::Tape& tape, const EncoderParams& p, bool requires_grad);
DecoderT lift(ad::Tape& tape, const DecoderParams& p, bool requires_grad);

// Assembles the tape-side mirror from leaves that are already on a tape, in
// visit_params order starting at `cursor` (advanced past the consumed
// leaves). This is how gradient checks wire shared parameter leaves into the
// forward passes.
EncoderT encoder_from_leaves(const EncoderParams& dims, std::span<const ad::Tensor> leaves,
                             std::size_t& cursor);
DecoderT decoder_from_leaves(const DecoderParams& dims, std::span<const ad::Tensor> leaves,
                             std::size_t& cursor);

// One recurrence step: r/u gates, candidate, convex update.
ad::Tensor gru_cell_step(const GruCellT& cell, ad::Tensor x_t, ad::Tensor h_prev);

// Runs both directions of every layer over the frames and projects the
// concatenated final states of the last layer into (mean, log variance).
PosteriorT encode(ad::Tape& tape, const EncoderT& enc, const Array& frames);

// Reparameterized samples z_k = mean + exp(log_variance / 2) * noise_k; the
// noise rows ({K, latent}) are standard-normal draws supplied by the caller.
std::vector<ad::Tensor> sample_latent(const PosteriorT& posterior, const Array& noise);

// Decodes num_frames output frames, feeding z as the input at every step.
// Hidden states start at zero.
ad::Tensor decode(const DecoderT& dec, ad::Tensor z, std::size_t num_frames);

// Forward-only encode on a private tape.
Posterior encode_values(const EncoderParams& p, const Array& frames);

}  // namespace awe::rnn
