// SPDX-License-Identifier: Apache-2.0
//
// Training objectives. The VAE-family objectives (j_vae, j_cvae, j_mcvae) are
// quantities to MAXIMIZE; the reconstruction, correspondence and triplet
// losses are minimized. The trainer handles the sign.
//
// Latent noise is always an explicit argument, so every objective is a pure
// function of (parameters, data, noise) and can be replayed or checked with
// frozen draws.

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "awe/array.hpp"
#include "awe/gru.hpp"
#include "awe/segment.hpp"
#include "awe/tensor.hpp"

namespace awe::obj {

// Sigmoid schedule for the KL weight: 1 / (1 + exp(-k (t - s0))).
struct AnnealSchedule {
  double k = 0.02;
  double s0 = 1000.0;
};

double anneal_weight(double t, const AnnealSchedule& schedule);

struct LossConfig {
  double sigma2 = 0.01;     // spherical output variance
  double kl_weight = 0.001; // KL cap for correspondence objectives
  std::size_t K = 5;        // latent samples (10 for the noisy-pair regime)
  double margin = 0.4;      // triplet hinge margin
};

// Exact log density of x under a spherical Gaussian centred at x_hat,
// including the normalization constant:
//   -sum((x - x_hat)^2) / (2 sigma2) - (numel / 2) ln(2 pi sigma2)
ad::Tensor gaussian_log_likelihood(ad::Tensor x, ad::Tensor x_hat, double sigma2);

// KL(q || N(0, I)) for a diagonal Gaussian q, in closed form:
//   1/2 sum(mu^2 + exp(lv) - 1 - lv)
ad::Tensor kl_diag_gaussian_std_normal(const rnn::PosteriorT& posterior);

using SegmentBatch = std::span<const Segment* const>;
using SegmentPair = std::pair<const Segment*, const Segment*>;

// Mean over the batch of
//   (1/K) sum_k log p(x | z_k) - kl_weight_t * KL(q(Z|x) || p).
// noise[i] holds the K x latent draws for segment i.
ad::Tensor j_vae(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                 SegmentBatch batch, std::size_t num_samples, double sigma2,
                 double kl_weight_t, std::span<const Array> noise);

// Symmetric cross-reconstruction objective: samples from q(Z|x1) must
// reconstruct x2 at x2's length and vice versa (K-averaged), each side minus
// its weighted KL. noise[i] = {draws for x1, draws for x2}.
ad::Tensor j_cvae(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                  std::span<const SegmentPair> pairs, std::size_t num_samples,
                  double sigma2, double kl_weight,
                  std::span<const std::pair<Array, Array>> noise);

// As j_cvae but each direction keeps only its best sample:
// max_k log p(x2 | z1_k) and max_k log p(x1 | z2_k). The gradient flows only
// through the argmax sample of each direction.
ad::Tensor j_mcvae(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                   std::span<const SegmentPair> pairs, std::size_t num_samples,
                   double sigma2, double kl_weight,
                   std::span<const std::pair<Array, Array>> noise);

// Deterministic autoencoder: the posterior mean is used as the latent (no
// sampling); mean over the batch of sum((x - x_hat)^2).
ad::Tensor ae_loss(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                   SegmentBatch batch);

// Correspondence loss, both directions averaged:
//   mean over pairs of (||x2 - dec(enc(x1))||^2 + ||x1 - dec(enc(x2))||^2) / 2
ad::Tensor cae_loss(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                    std::span<const SegmentPair> pairs);

struct Triplet {
  const Segment* anchor;
  const Segment* same;
  const Segment* diff;
};

// Mean over triplets of max(0, margin + d_cos(a, d) - d_cos(a, s)) on the
// posterior-mean embeddings.
ad::Tensor triplet_loss(ad::Tape& tape, const rnn::EncoderT& enc,
                        std::span<const Triplet> triplets, double margin);

// ---- single-item terms (exposed for the trainer, which averages gradients
// across a batch itself) --------------------------------------------------

struct TermParts {
  ad::Tensor term;     // this item's contribution, same orientation as the batch op
  double kl_value = 0; // unweighted KL diagnostics (mean over sides for pairs)
};

// The sample count is the number of noise rows.
TermParts vae_term(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                   const Segment& x, double sigma2, double kl_weight_t,
                   const Array& noise);
TermParts correspondence_term(ad::Tape& tape, const rnn::EncoderT& enc,
                              const rnn::DecoderT& dec, const SegmentPair& pair,
                              double sigma2, double kl_weight,
                              const std::pair<Array, Array>& noise, bool maximal);
TermParts ae_term(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                  const Segment& x);
TermParts cae_term(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                   const SegmentPair& pair);
TermParts triplet_term(ad::Tape& tape, const rnn::EncoderT& enc, const Triplet& t,
                       double margin);

}  // namespace awe::obj
