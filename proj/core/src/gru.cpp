// SPDX-License-Identifier: Apache-2.0

#include "awe/gru.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace awe::rnn {

namespace {

Array weight(std::size_t rows, std::size_t cols) { return Array::zeros({rows, cols}); }
Array bias(std::size_t cols) { return Array::zeros({1, cols}); }

void fill_uniform(Array& a, double bound, Rng& rng) {
  for (double& v : a.data) v = rng.uniform(-bound, bound);
}

void visit_cell(GruCellParams& c, const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w_r", c.w_r);
  fn(prefix + ".u_r", c.u_r);
  fn(prefix + ".b_r", c.b_r);
  fn(prefix + ".w_u", c.w_u);
  fn(prefix + ".u_u", c.u_u);
  fn(prefix + ".b_u", c.b_u);
  fn(prefix + ".w_c", c.w_c);
  fn(prefix + ".u_c", c.u_c);
  fn(prefix + ".b_c", c.b_c);
}

bool is_bias(const std::string& name) {
  auto pos = name.rfind('.');
  return pos != std::string::npos && name.compare(pos, 3, ".b_") == 0;
}

}  // namespace

GruCellParams GruCellParams::sized(std::size_t input_dim, std::size_t hidden_dim) {
  GruCellParams c;
  c.input_dim = input_dim;
  c.hidden_dim = hidden_dim;
  c.w_r = weight(input_dim, hidden_dim);
  c.u_r = weight(hidden_dim, hidden_dim);
  c.b_r = bias(hidden_dim);
  c.w_u = weight(input_dim, hidden_dim);
  c.u_u = weight(hidden_dim, hidden_dim);
  c.b_u = bias(hidden_dim);
  c.w_c = weight(input_dim, hidden_dim);
  c.u_c = weight(hidden_dim, hidden_dim);
  c.b_c = bias(hidden_dim);
  return c;
}

EncoderParams make_encoder(std::size_t input_dim, std::size_t hidden_dim,
                           std::size_t latent_dim, std::size_t num_layers) {
  if (num_layers == 0) throw std::invalid_argument("make_encoder: need at least one layer");
  EncoderParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.latent_dim = latent_dim;
  p.num_layers = num_layers;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t in = l == 0 ? input_dim : 2 * hidden_dim;
    p.cells.push_back(GruCellParams::sized(in, hidden_dim));
    p.cells.push_back(GruCellParams::sized(in, hidden_dim));
  }
  p.proj_w = weight(2 * hidden_dim, 2 * latent_dim);
  p.proj_b = bias(2 * latent_dim);
  return p;
}

DecoderParams make_decoder(std::size_t latent_dim, std::size_t hidden_dim,
                           std::size_t output_dim, std::size_t num_layers,
                           bool bidirectional) {
  if (num_layers == 0) throw std::invalid_argument("make_decoder: need at least one layer");
  DecoderParams p;
  p.latent_dim = latent_dim;
  p.hidden_dim = hidden_dim;
  p.output_dim = output_dim;
  p.num_layers = num_layers;
  p.bidirectional = bidirectional;
  const std::size_t dirs = bidirectional ? 2 : 1;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t in = l == 0 ? latent_dim : dirs * hidden_dim;
    for (std::size_t d = 0; d < dirs; ++d)
      p.cells.push_back(GruCellParams::sized(in, hidden_dim));
  }
  p.out_w = weight(dirs * hidden_dim, output_dim);
  p.out_b = bias(output_dim);
  return p;
}

void visit_params(EncoderParams& p, const ParamVisitor& fn) {
  for (std::size_t l = 0; l < p.num_layers; ++l) {
    visit_cell(p.cells[l * 2 + 0], "enc.l" + std::to_string(l) + ".f", fn);
    visit_cell(p.cells[l * 2 + 1], "enc.l" + std::to_string(l) + ".b", fn);
  }
  fn("enc.proj_w", p.proj_w);
  fn("enc.proj_b", p.proj_b);
}

void visit_params(DecoderParams& p, const ParamVisitor& fn) {
  const std::size_t dirs = p.bidirectional ? 2 : 1;
  for (std::size_t l = 0; l < p.num_layers; ++l) {
    visit_cell(p.cells[l * dirs + 0], "dec.l" + std::to_string(l) + ".f", fn);
    if (p.bidirectional)
      visit_cell(p.cells[l * dirs + 1], "dec.l" + std::to_string(l) + ".b", fn);
  }
  fn("dec.out_w", p.out_w);
  fn("dec.out_b", p.out_b);
}

void init_params(EncoderParams& p, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.hidden_dim));
  visit_params(p, [&](const std::string& name, Array& a) {
    if (!is_bias(name) && name.find("proj_b") == std::string::npos)
      fill_uniform(a, bound, rng);
  });
}

void init_params(DecoderParams& p, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.hidden_dim));
  visit_params(p, [&](const std::string& name, Array& a) {
    if (!is_bias(name) && name.find("out_b") == std::string::npos)
      fill_uniform(a, bound, rng);
  });
}

// ---------------------------------------------------------------------------
// Tape-side forward passes

namespace {

GruCellT lift_cell(ad::Tape& tape, const GruCellParams& c, bool rg,
                   std::vector<ad::Tensor>& leaves) {
  GruCellT t;
  auto up = [&](const Array& a) {
    ad::Tensor l = tape.leaf(a, rg);
    leaves.push_back(l);
    return l;
  };
  // Same field order as visit_cell.
  t.w_r = up(c.w_r);
  t.u_r = up(c.u_r);
  t.b_r = up(c.b_r);
  t.w_u = up(c.w_u);
  t.u_u = up(c.u_u);
  t.b_u = up(c.b_u);
  t.w_c = up(c.w_c);
  t.u_c = up(c.u_c);
  t.b_c = up(c.b_c);
  return t;
}

GruCellT cell_from_leaves(std::span<const ad::Tensor> leaves, std::size_t& cursor) {
  if (cursor + 9 > leaves.size())
    throw std::invalid_argument("cell_from_leaves: not enough leaves");
  GruCellT t;
  t.w_r = leaves[cursor++];
  t.u_r = leaves[cursor++];
  t.b_r = leaves[cursor++];
  t.w_u = leaves[cursor++];
  t.u_u = leaves[cursor++];
  t.b_u = leaves[cursor++];
  t.w_c = leaves[cursor++];
  t.u_c = leaves[cursor++];
  t.b_c = leaves[cursor++];
  return t;
}

struct DirectionOut {
  std::vector<ad::Tensor> states;  // state at each original time index, {1,H}
  ad::Tensor final_state;          // {1,H}
};

// Runs one direction over the whole input {T,in}. Input-to-hidden products
// for all steps are batched into three matmuls before the recurrence.
DirectionOut run_direction(ad::Tape& tape, const GruCellT& cell, ad::Tensor inputs,
                           bool reverse_dir) {
  const std::size_t steps = inputs.shape()[0];
  const std::size_t hidden = cell.u_r.shape()[0];
  ad::Tensor xr = ad::add(ad::matmul(inputs, cell.w_r), ad::broadcast_rows(cell.b_r, steps));
  ad::Tensor xu = ad::add(ad::matmul(inputs, cell.w_u), ad::broadcast_rows(cell.b_u, steps));
  ad::Tensor xc = ad::add(ad::matmul(inputs, cell.w_c), ad::broadcast_rows(cell.b_c, steps));

  std::vector<double> zero(hidden, 0.0);
  ad::Tensor h = tape.leaf(Shape{1, hidden}, zero, false);

  DirectionOut out;
  out.states.resize(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse_dir ? steps - 1 - s : s;
    ad::Tensor r = ad::sigmoid(ad::add(ad::slice(xr, 0, t, t + 1), ad::matmul(h, cell.u_r)));
    ad::Tensor u = ad::sigmoid(ad::add(ad::slice(xu, 0, t, t + 1), ad::matmul(h, cell.u_u)));
    ad::Tensor c = ad::tanh(ad::add(ad::slice(xc, 0, t, t + 1), ad::matmul(ad::mul(r, h), cell.u_c)));
    // h' = (1-u) h + u c, written as h + u (c - h).
    h = ad::add(h, ad::mul(u, ad::sub(c, h)));
    out.states[t] = h;
  }
  out.final_state = h;
  return out;
}

ad::Tensor stack_states(const std::vector<ad::Tensor>& states) {
  return ad::concat(std::span<const ad::Tensor>(states.data(), states.size()), 0);
}

}  // namespace

EncoderT lift(ad::Tape& tape, const EncoderParams& p, bool requires_grad) {
  EncoderT t;
  t.dims = &p;
  for (const auto& c : p.cells) t.cells.push_back(lift_cell(tape, c, requires_grad, t.leaves));
  t.proj_w = tape.leaf(p.proj_w, requires_grad);
  t.proj_b = tape.leaf(p.proj_b, requires_grad);
  t.leaves.push_back(t.proj_w);
  t.leaves.push_back(t.proj_b);
  return t;
}

DecoderT lift(ad::Tape& tape, const DecoderParams& p, bool requires_grad) {
  DecoderT t;
  t.dims = &p;
  for (const auto& c : p.cells) t.cells.push_back(lift_cell(tape, c, requires_grad, t.leaves));
  t.out_w = tape.leaf(p.out_w, requires_grad);
  t.out_b = tape.leaf(p.out_b, requires_grad);
  t.leaves.push_back(t.out_w);
  t.leaves.push_back(t.out_b);
  return t;
}

EncoderT encoder_from_leaves(const EncoderParams& dims, std::span<const ad::Tensor> leaves,
                             std::size_t& cursor) {
  EncoderT t;
  t.dims = &dims;
  for (std::size_t i = 0; i < dims.cells.size(); ++i)
    t.cells.push_back(cell_from_leaves(leaves, cursor));
  if (cursor + 2 > leaves.size())
    throw std::invalid_argument("encoder_from_leaves: not enough leaves");
  t.proj_w = leaves[cursor++];
  t.proj_b = leaves[cursor++];
  return t;
}

DecoderT decoder_from_leaves(const DecoderParams& dims, std::span<const ad::Tensor> leaves,
                             std::size_t& cursor) {
  DecoderT t;
  t.dims = &dims;
  for (std::size_t i = 0; i < dims.cells.size(); ++i)
    t.cells.push_back(cell_from_leaves(leaves, cursor));
  if (cursor + 2 > leaves.size())
    throw std::invalid_argument("decoder_from_leaves: not enough leaves");
  t.out_w = leaves[cursor++];
  t.out_b = leaves[cursor++];
  return t;
}

ad::Tensor gru_cell_step(const GruCellT& cell, ad::Tensor x_t, ad::Tensor h_prev) {
  ad::Tensor r = ad::sigmoid(
      ad::add(ad::add(ad::matmul(x_t, cell.w_r), cell.b_r), ad::matmul(h_prev, cell.u_r)));
  ad::Tensor u = ad::sigmoid(
      ad::add(ad::add(ad::matmul(x_t, cell.w_u), cell.b_u), ad::matmul(h_prev, cell.u_u)));
  ad::Tensor c = ad::tanh(ad::add(ad::add(ad::matmul(x_t, cell.w_c), cell.b_c),
                                  ad::matmul(ad::mul(r, h_prev), cell.u_c)));
  return ad::add(h_prev, ad::mul(u, ad::sub(c, h_prev)));
}

PosteriorT encode(ad::Tape& tape, const EncoderT& enc, const Array& frames) {
  const EncoderParams& dims = *enc.dims;
  if (frames.rank() != 2 || frames.rows() < 1)
    throw std::invalid_argument("encode: segment must be a non-empty {T,D} matrix");
  if (frames.cols() != dims.input_dim)
    throw std::invalid_argument("encode: feature dim " + std::to_string(frames.cols()) +
                                " does not match encoder input dim " +
                                std::to_string(dims.input_dim));

  ad::Tensor layer_input = tape.leaf(frames, false);
  ad::Tensor final_f, final_b;
  for (std::size_t l = 0; l < dims.num_layers; ++l) {
    DirectionOut fwd = run_direction(tape, enc.cells[l * 2 + 0], layer_input, false);
    DirectionOut bwd = run_direction(tape, enc.cells[l * 2 + 1], layer_input, true);
    final_f = fwd.final_state;
    final_b = bwd.final_state;
    if (l + 1 < dims.num_layers) {
      std::array<ad::Tensor, 2> both{stack_states(fwd.states), stack_states(bwd.states)};
      layer_input = ad::concat(both, 1);
    }
  }
  std::array<ad::Tensor, 2> finals{final_f, final_b};
  ad::Tensor proj = ad::add(ad::matmul(ad::concat(finals, 1), enc.proj_w), enc.proj_b);
  PosteriorT post;
  post.mean = ad::slice(proj, 1, 0, dims.latent_dim);
  post.log_variance = ad::slice(proj, 1, dims.latent_dim, 2 * dims.latent_dim);
  return post;
}

std::vector<ad::Tensor> sample_latent(const PosteriorT& posterior, const Array& noise) {
  ad::Tape& tape = *posterior.mean.tape();
  if (noise.rank() != 2 || noise.cols() != posterior.mean.shape()[1])
    throw std::invalid_argument("sample_latent: noise must be {K, latent}");
  const std::size_t k = noise.rows();
  if (k < 1) throw std::invalid_argument("sample_latent: need at least one draw");
  ad::Tensor eps = tape.leaf(noise, false);
  ad::Tensor sd = ad::exp(ad::scale(posterior.log_variance, 0.5));
  std::vector<ad::Tensor> zs;
  zs.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    zs.push_back(ad::add(posterior.mean, ad::mul(sd, ad::slice(eps, 0, i, i + 1))));
  return zs;
}

ad::Tensor decode(const DecoderT& dec, ad::Tensor z, std::size_t num_frames) {
  const DecoderParams& dims = *dec.dims;
  if (num_frames < 1) throw std::invalid_argument("decode: need at least one frame");
  ad::Tape& tape = *z.tape();
  const std::size_t dirs = dims.bidirectional ? 2 : 1;

  ad::Tensor layer_input = ad::broadcast_rows(z, num_frames);
  ad::Tensor last_outputs;
  for (std::size_t l = 0; l < dims.num_layers; ++l) {
    DirectionOut fwd = run_direction(tape, dec.cells[l * dirs + 0], layer_input, false);
    if (dims.bidirectional) {
      DirectionOut bwd = run_direction(tape, dec.cells[l * dirs + 1], layer_input, true);
      std::array<ad::Tensor, 2> both{stack_states(fwd.states), stack_states(bwd.states)};
      last_outputs = ad::concat(both, 1);
    } else {
      last_outputs = stack_states(fwd.states);
    }
    layer_input = last_outputs;
  }
  return ad::add(ad::matmul(last_outputs, dec.out_w), ad::broadcast_rows(dec.out_b, num_frames));
}

Posterior encode_values(const EncoderParams& p, const Array& frames) {
  ad::Tape tape;
  EncoderT enc = lift(tape, p, false);
  PosteriorT post = encode(tape, enc, frames);
  auto mv = post.mean.value();
  auto lv = post.log_variance.value();
  Posterior out;
  out.mean = Array(Shape{p.latent_dim}, std::vector<double>(mv.begin(), mv.end()));
  out.log_variance = Array(Shape{p.latent_dim}, std::vector<double>(lv.begin(), lv.end()));
  return out;
}

}  // namespace awe::rnn
