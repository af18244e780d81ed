// SPDX-License-Identifier: Apache-2.0

#include "awe/objectives.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace awe::obj {

namespace {

ad::Tensor mean_of_terms(std::vector<ad::Tensor>& terms) {
  ad::Tensor stacked = ad::concat(std::span<const ad::Tensor>(terms.data(), terms.size()), 0);
  return ad::mean_all(stacked);
}

ad::Tensor reduce_samples(std::vector<ad::Tensor>& lls, bool maximal) {
  ad::Tensor stacked = ad::concat(std::span<const ad::Tensor>(lls.data(), lls.size()), 0);
  return maximal ? ad::max_all(stacked) : ad::mean_all(stacked);
}

// Cosine distance on the tape: 1 - <a,b> / (|a| |b|). Embeddings during
// training never hit an exactly-zero norm; the value-side cosine in the
// evaluation module is the one with the zero-norm guard.
ad::Tensor cosine_distance_t(ad::Tensor a, ad::Tensor b) {
  ad::Tensor dot = ad::sum_all(ad::mul(a, b));
  ad::Tensor na = ad::sqrt(ad::sum_all(ad::square(a)));
  ad::Tensor nb = ad::sqrt(ad::sum_all(ad::square(b)));
  return ad::add_scalar(ad::neg(ad::divide(dot, ad::mul(na, nb))), 1.0);
}

// Cross log-likelihood of one direction: reduce_k log p(target | z_src_k),
// decoded at the target's own length.
ad::Tensor cross_side(ad::Tape& tape, const rnn::DecoderT& dec,
                      const std::vector<ad::Tensor>& zs, const Segment& target,
                      double sigma2, bool maximal) {
  ad::Tensor target_leaf = tape.leaf(target.frames, false);
  std::vector<ad::Tensor> lls;
  lls.reserve(zs.size());
  for (const ad::Tensor& z : zs) {
    ad::Tensor x_hat = rnn::decode(dec, z, target.num_frames());
    lls.push_back(gaussian_log_likelihood(target_leaf, x_hat, sigma2));
  }
  return reduce_samples(lls, maximal);
}

ad::Tensor sum_squared_error(ad::Tensor target, ad::Tensor recon) {
  return ad::sum_all(ad::square(ad::sub(target, recon)));
}

}  // namespace

double anneal_weight(double t, const AnnealSchedule& schedule) {
  if (schedule.k <= 0.0) throw std::invalid_argument("anneal_weight: slope k must be > 0");
  if (schedule.s0 < 0.0) throw std::invalid_argument("anneal_weight: midpoint s0 must be >= 0");
  if (t < 0.0) throw std::invalid_argument("anneal_weight: step t must be >= 0");
  return 1.0 / (1.0 + std::exp(-schedule.k * (t - schedule.s0)));
}

ad::Tensor gaussian_log_likelihood(ad::Tensor x, ad::Tensor x_hat, double sigma2) {
  if (sigma2 <= 0.0)
    throw std::invalid_argument("gaussian_log_likelihood: sigma2 must be > 0");
  if (x.shape() != x_hat.shape())
    throw std::invalid_argument("gaussian_log_likelihood: shape mismatch " +
                                shape_str(x.shape()) + " vs " + shape_str(x_hat.shape()));
  const double n = static_cast<double>(x.size());
  const double norm_const = -0.5 * n * std::log(2.0 * std::numbers::pi * sigma2);
  ad::Tensor sse = sum_squared_error(x, x_hat);
  return ad::add_scalar(ad::scale(sse, -1.0 / (2.0 * sigma2)), norm_const);
}

ad::Tensor kl_diag_gaussian_std_normal(const rnn::PosteriorT& posterior) {
  ad::Tensor mu = posterior.mean;
  ad::Tensor lv = posterior.log_variance;
  const double dim = static_cast<double>(mu.size());
  ad::Tensor body = ad::sum_all(ad::add(ad::square(mu), ad::sub(ad::exp(lv), lv)));
  return ad::add_scalar(ad::scale(body, 0.5), -0.5 * dim);
}

// ---------------------------------------------------------------------------
// Per-item terms

TermParts vae_term(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                   const Segment& x, double sigma2, double kl_weight_t,
                   const Array& noise) {
  rnn::PosteriorT post = rnn::encode(tape, enc, x.frames);
  std::vector<ad::Tensor> zs = rnn::sample_latent(post, noise);
  ad::Tensor recon = cross_side(tape, dec, zs, x, sigma2, /*maximal=*/false);
  ad::Tensor kl = kl_diag_gaussian_std_normal(post);
  TermParts out;
  out.term = ad::sub(recon, ad::scale(kl, kl_weight_t));
  out.kl_value = kl.item();
  return out;
}

TermParts correspondence_term(ad::Tape& tape, const rnn::EncoderT& enc,
                              const rnn::DecoderT& dec, const SegmentPair& pair,
                              double sigma2, double kl_weight,
                              const std::pair<Array, Array>& noise, bool maximal) {
  const Segment& x1 = *pair.first;
  const Segment& x2 = *pair.second;
  rnn::PosteriorT q1 = rnn::encode(tape, enc, x1.frames);
  rnn::PosteriorT q2 = rnn::encode(tape, enc, x2.frames);
  std::vector<ad::Tensor> z1 = rnn::sample_latent(q1, noise.first);
  std::vector<ad::Tensor> z2 = rnn::sample_latent(q2, noise.second);
  ad::Tensor kl1 = kl_diag_gaussian_std_normal(q1);
  ad::Tensor kl2 = kl_diag_gaussian_std_normal(q2);

  // Grouped per reconstructed side so swapping (x1, x2) together with the
  // noise swaps the two addends and nothing else.
  ad::Tensor side1 = ad::sub(cross_side(tape, dec, z2, x1, sigma2, maximal),
                             ad::scale(kl1, kl_weight));
  ad::Tensor side2 = ad::sub(cross_side(tape, dec, z1, x2, sigma2, maximal),
                             ad::scale(kl2, kl_weight));
  TermParts out;
  out.term = ad::add(side1, side2);
  out.kl_value = 0.5 * (kl1.item() + kl2.item());
  return out;
}

TermParts ae_term(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                  const Segment& x) {
  rnn::PosteriorT post = rnn::encode(tape, enc, x.frames);
  ad::Tensor x_hat = rnn::decode(dec, post.mean, x.num_frames());
  TermParts out;
  out.term = sum_squared_error(tape.leaf(x.frames, false), x_hat);
  return out;
}

TermParts cae_term(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                   const SegmentPair& pair) {
  const Segment& x1 = *pair.first;
  const Segment& x2 = *pair.second;
  rnn::PosteriorT q1 = rnn::encode(tape, enc, x1.frames);
  rnn::PosteriorT q2 = rnn::encode(tape, enc, x2.frames);
  ad::Tensor hat_from_1 = rnn::decode(dec, q1.mean, x2.num_frames());
  ad::Tensor hat_from_2 = rnn::decode(dec, q2.mean, x1.num_frames());
  ad::Tensor e12 = sum_squared_error(tape.leaf(x2.frames, false), hat_from_1);
  ad::Tensor e21 = sum_squared_error(tape.leaf(x1.frames, false), hat_from_2);
  TermParts out;
  out.term = ad::scale(ad::add(e12, e21), 0.5);
  return out;
}

TermParts triplet_term(ad::Tape& tape, const rnn::EncoderT& enc, const Triplet& t,
                       double margin) {
  if (margin < 0.0) throw std::invalid_argument("triplet_term: margin must be >= 0");
  ad::Tensor ea = rnn::encode(tape, enc, t.anchor->frames).mean;
  ad::Tensor es = rnn::encode(tape, enc, t.same->frames).mean;
  ad::Tensor ed = rnn::encode(tape, enc, t.diff->frames).mean;
  ad::Tensor hinge_arg =
      ad::add_scalar(ad::sub(cosine_distance_t(ea, ed), cosine_distance_t(ea, es)), margin);
  // max(0, v) through the argmax primitive so tie handling matches the rest
  // of the library: at v == 0 the gradient goes to the constant.
  std::array<ad::Tensor, 2> parts{tape.constant(0.0), hinge_arg};
  TermParts out;
  out.term = ad::max_all(ad::concat(parts, 0));
  return out;
}

// ---------------------------------------------------------------------------
// Batch objectives

ad::Tensor j_vae(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                 SegmentBatch batch, std::size_t num_samples, double sigma2,
                 double kl_weight_t, std::span<const Array> noise) {
  if (batch.empty()) throw std::invalid_argument("j_vae: empty batch");
  if (noise.size() != batch.size())
    throw std::invalid_argument("j_vae: need one noise block per segment");
  std::vector<ad::Tensor> terms;
  terms.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (noise[i].rows() != num_samples)
      throw std::invalid_argument("j_vae: noise block has wrong sample count");
    terms.push_back(vae_term(tape, enc, dec, *batch[i], sigma2, kl_weight_t, noise[i]).term);
  }
  return mean_of_terms(terms);
}

namespace {

ad::Tensor correspondence_batch(ad::Tape& tape, const rnn::EncoderT& enc,
                                const rnn::DecoderT& dec,
                                std::span<const SegmentPair> pairs,
                                std::size_t num_samples, double sigma2, double kl_weight,
                                std::span<const std::pair<Array, Array>> noise,
                                bool maximal, const char* name) {
  if (pairs.empty()) throw std::invalid_argument(std::string(name) + ": empty pair list");
  if (noise.size() != pairs.size())
    throw std::invalid_argument(std::string(name) + ": need one noise pair per data pair");
  std::vector<ad::Tensor> terms;
  terms.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (noise[i].first.rows() != num_samples || noise[i].second.rows() != num_samples)
      throw std::invalid_argument(std::string(name) + ": noise block has wrong sample count");
    terms.push_back(
        correspondence_term(tape, enc, dec, pairs[i], sigma2, kl_weight, noise[i], maximal)
            .term);
  }
  return mean_of_terms(terms);
}

}  // namespace

ad::Tensor j_cvae(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                  std::span<const SegmentPair> pairs, std::size_t num_samples,
                  double sigma2, double kl_weight,
                  std::span<const std::pair<Array, Array>> noise) {
  return correspondence_batch(tape, enc, dec, pairs, num_samples, sigma2, kl_weight, noise,
                              /*maximal=*/false, "j_cvae");
}

ad::Tensor j_mcvae(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                   std::span<const SegmentPair> pairs, std::size_t num_samples,
                   double sigma2, double kl_weight,
                   std::span<const std::pair<Array, Array>> noise) {
  return correspondence_batch(tape, enc, dec, pairs, num_samples, sigma2, kl_weight, noise,
                              /*maximal=*/true, "j_mcvae");
}

ad::Tensor ae_loss(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                   SegmentBatch batch) {
  if (batch.empty()) throw std::invalid_argument("ae_loss: empty batch");
  std::vector<ad::Tensor> terms;
  terms.reserve(batch.size());
  for (const Segment* s : batch) terms.push_back(ae_term(tape, enc, dec, *s).term);
  return mean_of_terms(terms);
}

ad::Tensor cae_loss(ad::Tape& tape, const rnn::EncoderT& enc, const rnn::DecoderT& dec,
                    std::span<const SegmentPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("cae_loss: empty pair list");
  std::vector<ad::Tensor> terms;
  terms.reserve(pairs.size());
  for (const SegmentPair& p : pairs) terms.push_back(cae_term(tape, enc, dec, p).term);
  return mean_of_terms(terms);
}

ad::Tensor triplet_loss(ad::Tape& tape, const rnn::EncoderT& enc,
                        std::span<const Triplet> triplets, double margin) {
  if (triplets.empty()) throw std::invalid_argument("triplet_loss: empty batch");
  std::vector<ad::Tensor> terms;
  terms.reserve(triplets.size());
  for (const Triplet& t : triplets) terms.push_back(triplet_term(tape, enc, t, margin).term);
  return mean_of_terms(terms);
}

}  // namespace awe::obj
