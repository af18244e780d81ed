// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "awe/grad_check.hpp"
#include "awe/gru.hpp"
#include "oracles.hpp"

using namespace awe;
using ad::Tape;
using ad::Tensor;

namespace {

Array random_array(Shape shape, Rng& rng, double scale = 1.0) {
  Array a = Array::zeros(std::move(shape));
  for (double& v : a.data) v = scale * rng.uniform(-1.0, 1.0);
  return a;
}

rnn::GruCellParams random_cell(std::size_t in, std::size_t hidden, Rng& rng) {
  auto c = rnn::GruCellParams::sized(in, hidden);
  for (Array* a : {&c.w_r, &c.u_r, &c.b_r, &c.w_u, &c.u_u, &c.b_u, &c.w_c, &c.u_c, &c.b_c})
    for (double& v : a->data) v = rng.uniform(-0.8, 0.8);
  return c;
}

Array random_frames(std::size_t t, std::size_t d, Rng& rng) {
  return random_array({t, d}, rng);
}

// Swaps the forward/backward roles of an encoder's parameters so that
// encode(swapped, x) equals encode(original, reverse(x)). Layers above the
// first also need their input-weight row blocks swapped (their input is the
// [fwd, bwd] concatenation), as does the projection.
rnn::EncoderParams direction_swapped(const rnn::EncoderParams& p) {
  rnn::EncoderParams q = p;
  for (std::size_t l = 0; l < p.num_layers; ++l)
    std::swap(q.cells[l * 2 + 0], q.cells[l * 2 + 1]);
  auto swap_row_blocks = [](Array& w, std::size_t half) {
    for (std::size_t i = 0; i < half; ++i)
      for (std::size_t j = 0; j < w.cols(); ++j) std::swap(w.at(i, j), w.at(half + i, j));
  };
  const std::size_t h = p.hidden_dim;
  for (std::size_t l = 1; l < p.num_layers; ++l) {
    for (std::size_t dir = 0; dir < 2; ++dir) {
      auto& cell = q.cells[l * 2 + dir];
      swap_row_blocks(cell.w_r, h);
      swap_row_blocks(cell.w_u, h);
      swap_row_blocks(cell.w_c, h);
    }
  }
  swap_row_blocks(q.proj_w, h);
  return q;
}

Array reversed_frames(const Array& frames) {
  Array out = Array::zeros(frames.shape);
  const std::size_t t = frames.rows(), d = frames.cols();
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = frames.at(t - 1 - i, j);
  return out;
}

}  // namespace

TEST_CASE("gru cell step") {
  Rng rng(5);
  SUBCASE("all-zero parameters give a zero next state") {
    Tape tape;
    auto ct = rnn::lift(tape, rnn::make_encoder(3, 4, 2, 1), false).cells[0];
    Tensor x = tape.leaf(random_frames(1, 3, rng));
    Tensor h = tape.leaf(Array::zeros({1, 4}));
    Tensor out = rnn::gru_cell_step(ct, x, h);
    for (double v : out.value()) CHECK(v == 0.0);
  }
  SUBCASE("a large negative update bias freezes the state") {
    auto c = random_cell(3, 4, rng);
    for (double& v : c.b_u.data) v = -40.0;
    rnn::EncoderParams host = rnn::make_encoder(3, 4, 2, 1);
    host.cells[0] = c;
    Tape tape;
    auto enc = rnn::lift(tape, host, false);
    Array h_prev = random_frames(1, 4, rng);
    Tensor out = rnn::gru_cell_step(enc.cells[0], tape.leaf(random_frames(1, 3, rng)),
                                    tape.leaf(h_prev));
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(out.value()[j] == doctest::Approx(h_prev.data[j]).epsilon(1e-10));
  }
  SUBCASE("matches the scalar oracle") {
    for (int trial = 0; trial < 5; ++trial) {
      auto c = random_cell(6, 5, rng);
      Array x = random_frames(1, 6, rng);
      Array h = random_frames(1, 5, rng);
      rnn::EncoderParams host = rnn::make_encoder(6, 5, 2, 1);
      host.cells[0] = c;
      Tape tape;
      auto enc = rnn::lift(tape, host, false);
      Tensor out = rnn::gru_cell_step(enc.cells[0], tape.leaf(x), tape.leaf(h));
      auto expect = oracle::gru_step(c, std::span<const double>(x.data),
                                     std::span<const double>(h.data));
      for (std::size_t j = 0; j < 5; ++j)
        CHECK(out.value()[j] == doctest::Approx(expect[j]).epsilon(1e-12));
    }
  }
  SUBCASE("dimension mismatch is rejected") {
    Tape tape;
    auto enc = rnn::lift(tape, rnn::make_encoder(3, 4, 2, 1), false);
    Tensor bad_x = tape.leaf(random_frames(1, 5, rng));
    Tensor h = tape.leaf(Array::zeros({1, 4}));
    CHECK_THROWS_AS(rnn::gru_cell_step(enc.cells[0], bad_x, h), std::invalid_argument);
  }
}

TEST_CASE("encoder") {
  Rng rng(17);
  SUBCASE("zero weights produce the zero posterior") {
    auto p = rnn::make_encoder(4, 6, 3, 2);
    Tape tape;
    auto post = rnn::encode(tape, rnn::lift(tape, p, false), random_frames(5, 4, rng));
    for (double v : post.mean.value()) CHECK(v == 0.0);
    for (double v : post.log_variance.value()) CHECK(v == 0.0);
  }
  SUBCASE("single-frame segments are valid") {
    auto p = rnn::make_encoder(4, 6, 3, 2);
    Rng init(3);
    rnn::init_params(p, init);
    auto post = rnn::encode_values(p, random_frames(1, 4, rng));
    CHECK(post.mean.size() == 3);
    for (double v : post.mean.data) CHECK(std::isfinite(v));
  }
  SUBCASE("posterior dimension is half the projection output") {
    auto p = rnn::make_encoder(4, 6, 3, 2);
    CHECK(p.proj_w.cols() == 2 * p.latent_dim);
    auto post = rnn::encode_values(p, random_frames(7, 4, rng));
    CHECK(post.mean.size() == p.latent_dim);
    CHECK(post.log_variance.size() == p.latent_dim);
  }
  SUBCASE("matches the scalar oracle") {
    auto p = rnn::make_encoder(5, 7, 3, 2);
    Rng init(11);
    rnn::init_params(p, init);
    Array frames = random_frames(9, 5, rng);
    auto fast = rnn::encode_values(p, frames);
    auto slow = oracle::encode(p, frames);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(fast.mean.data[j] == doctest::Approx(slow.mean[j]).epsilon(1e-10));
      CHECK(fast.log_variance.data[j] ==
            doctest::Approx(slow.log_variance[j]).epsilon(1e-10));
    }
  }
  SUBCASE("reversing the input swaps the direction roles") {
    auto p = rnn::make_encoder(4, 5, 3, 2);
    Rng init(23);
    rnn::init_params(p, init);
    Array frames = random_frames(6, 4, rng);
    auto a = rnn::encode_values(p, reversed_frames(frames));
    auto b = rnn::encode_values(direction_swapped(p), frames);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(a.mean.data[j] == doctest::Approx(b.mean.data[j]).epsilon(1e-12));
      CHECK(a.log_variance.data[j] ==
            doctest::Approx(b.log_variance.data[j]).epsilon(1e-12));
    }
  }
  SUBCASE("wrong feature dimension is rejected") {
    auto p = rnn::make_encoder(4, 5, 3, 2);
    Tape tape;
    auto enc = rnn::lift(tape, p, false);
    CHECK_THROWS_AS(rnn::encode(tape, enc, random_frames(5, 7, rng)),
                    std::invalid_argument);
  }
}

TEST_CASE("latent sampling") {
  Rng rng(29);
  auto p = rnn::make_encoder(4, 5, 3, 2);
  Rng init(2);
  rnn::init_params(p, init);
  Array frames = random_frames(5, 4, rng);

  SUBCASE("zero noise returns the mean") {
    Tape tape;
    auto post = rnn::encode(tape, rnn::lift(tape, p, false), frames);
    auto zs = rnn::sample_latent(post, Array::zeros({2, 3}));
    REQUIRE(zs.size() == 2);
    for (const auto& z : zs)
      for (std::size_t j = 0; j < 3; ++j) CHECK(z.value()[j] == post.mean.value()[j]);
  }
  SUBCASE("standard posterior passes noise through") {
    Tape tape;
    rnn::PosteriorT post{tape.leaf(Array::zeros({1, 3})), tape.leaf(Array::zeros({1, 3}))};
    Array noise = random_frames(4, 3, rng);
    auto zs = rnn::sample_latent(post, noise);
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t j = 0; j < 3; ++j) CHECK(zs[k].value()[j] == noise.at(k, j));
  }
  SUBCASE("gradient of the sample sum w.r.t. the mean is K") {
    const std::size_t k = 5;
    Tape tape;
    rnn::PosteriorT post{tape.leaf(random_frames(1, 3, rng), true),
                         tape.leaf(random_frames(1, 3, rng), true)};
    auto zs = rnn::sample_latent(post, random_frames(k, 3, rng));
    std::vector<Tensor> sums;
    for (auto& z : zs) sums.push_back(ad::sum_all(z));
    tape.backward(ad::sum_all(ad::concat(sums, 0)));
    for (double g : post.mean.grad()) CHECK(g == doctest::Approx(double(k)).epsilon(1e-14));
  }
}

TEST_CASE("decoder") {
  Rng rng(31);
  SUBCASE("zero weights decode to zero frames") {
    auto p = rnn::make_decoder(3, 5, 4, 2, true);
    Tape tape;
    auto dec = rnn::lift(tape, p, false);
    Tensor out = rnn::decode(dec, tape.leaf(random_frames(1, 3, rng)), 6);
    for (double v : out.value()) CHECK(v == 0.0);
  }
  SUBCASE("output shape follows the requested length") {
    auto p = rnn::make_decoder(3, 5, 4, 2, true);
    Rng init(7);
    rnn::init_params(p, init);
    for (std::size_t t : {std::size_t{1}, std::size_t{7}, std::size_t{50}}) {
      Tape tape;
      auto dec = rnn::lift(tape, p, false);
      Tensor out = rnn::decode(dec, tape.leaf(random_frames(1, 3, rng)), t);
      CHECK(out.shape() == Shape{t, 4});
    }
  }
  SUBCASE("unidirectional variant works too") {
    auto p = rnn::make_decoder(3, 5, 4, 2, false);
    Rng init(7);
    rnn::init_params(p, init);
    Tape tape;
    auto dec = rnn::lift(tape, p, false);
    Tensor out = rnn::decode(dec, tape.leaf(random_frames(1, 3, rng)), 5);
    CHECK(out.shape() == Shape{5, 4});
  }
  SUBCASE("identical inputs decode bitwise identically") {
    auto p = rnn::make_decoder(3, 5, 4, 2, true);
    Rng init(13);
    rnn::init_params(p, init);
    Array z = random_frames(1, 3, rng);
    auto render = [&]() {
      Tape tape;
      auto dec = rnn::lift(tape, p, false);
      Tensor out = rnn::decode(dec, tape.leaf(z), 8);
      auto v = out.value();
      return std::vector<double>(v.begin(), v.end());
    };
    auto a = render();
    auto b = render();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  SUBCASE("matches the scalar oracle") {
    auto p = rnn::make_decoder(3, 6, 4, 2, true);
    Rng init(19);
    rnn::init_params(p, init);
    Array z = random_frames(1, 3, rng);
    Tape tape;
    auto dec = rnn::lift(tape, p, false);
    Tensor out = rnn::decode(dec, tape.leaf(z), 7);
    Array expect = oracle::decode(p, std::vector<double>(z.data), 7);
    for (std::size_t i = 0; i < expect.size(); ++i)
      CHECK(out.value()[i] == doctest::Approx(expect.data[i]).epsilon(1e-10));
  }
}

TEST_CASE("encode-decode round trip is differentiable end to end") {
  // Toy configuration: hidden 8, latent 4, D 4, T <= 6.
  auto model_enc = rnn::make_encoder(4, 8, 4, 2);
  auto model_dec = rnn::make_decoder(4, 8, 4, 2, true);
  Rng init(41);
  rnn::init_params(model_enc, init);
  rnn::init_params(model_dec, init);
  Rng rng(43);
  Array frames = random_frames(5, 4, rng);

  std::vector<ad::FdcParam> params;
  rnn::visit_params(model_enc,
                    [&](const std::string& n, Array& a) { params.push_back({n, &a}); });
  rnn::visit_params(model_dec,
                    [&](const std::string& n, Array& a) { params.push_back({n, &a}); });

  auto build = [&](Tape& tape, const std::vector<Tensor>& leaves) {
    std::size_t cursor = 0;
    auto enc = rnn::encoder_from_leaves(model_enc, leaves, cursor);
    auto dec = rnn::decoder_from_leaves(model_dec, leaves, cursor);
    auto post = rnn::encode(tape, enc, frames);
    Tensor recon = rnn::decode(dec, post.mean, frames.rows());
    return ad::sum_all(ad::square(ad::sub(tape.leaf(frames), recon)));
  };
  auto report = ad::finite_difference_check(params, build, 1e-5, 1e-4);
  INFO("max error ", report.max_error, " at ", report.worst);
  CHECK(report.failure.empty());
  CHECK(report.pass);
}

TEST_CASE("initialization draws weights uniformly and zeroes biases") {
  auto p = rnn::make_encoder(4, 9, 3, 2);
  Rng rng(3);
  rnn::init_params(p, rng);
  const double bound = 1.0 / std::sqrt(9.0);
  bool any_nonzero = false;
  rnn::visit_params(p, [&](const std::string& name, Array& a) {
    const bool is_bias = name.find(".b_") != std::string::npos ||
                         name.find("proj_b") != std::string::npos;
    for (double v : a.data) {
      if (is_bias) {
        CHECK(v == 0.0);
      } else {
        CHECK(std::fabs(v) <= bound);
        any_nonzero = any_nonzero || v != 0.0;
      }
    }
  });
  CHECK(any_nonzero);
}
