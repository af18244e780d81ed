// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "awe/grad_check.hpp"
#include "awe/rng.hpp"
#include "awe/tensor.hpp"

using namespace awe;
using ad::Tape;
using ad::Tensor;

namespace {

Array random_array(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Array a = Array::zeros(std::move(shape));
  for (double& v : a.data) v = rng.uniform(lo, hi);
  return a;
}

}  // namespace

TEST_CASE("primitive forward values") {
  Tape tape;
  SUBCASE("sigmoid at zero") {
    Tensor x = tape.leaf(Shape{1}, std::vector<double>{0.0});
    CHECK(ad::sigmoid(x).item() == 0.5);
  }
  SUBCASE("matmul identity") {
    Rng rng(1);
    Array a = random_array({3, 3}, rng);
    Array eye = Array::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    Tensor r = ad::matmul(tape.leaf(eye), tape.leaf(a));
    for (std::size_t i = 0; i < 9; ++i) CHECK(r.value()[i] == a.data[i]);
  }
  SUBCASE("sum") {
    Tensor x = tape.leaf(Shape{3}, std::vector<double>{1, 2, 3});
    CHECK(ad::sum_all(x).item() == 6.0);
  }
  SUBCASE("mean and max") {
    Tensor x = tape.leaf(Shape{4}, std::vector<double>{1, 5, 2, 5});
    CHECK(ad::mean_all(x).item() == doctest::Approx(3.25));
    CHECK(ad::max_all(x).item() == 5.0);
  }
}

TEST_CASE("backward basics") {
  SUBCASE("sum of squares") {
    Tape tape;
    Tensor x = tape.leaf(Shape{2}, std::vector<double>{1, 2}, true);
    tape.backward(ad::sum_all(ad::square(x)));
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 4.0);
  }
  SUBCASE("accumulation across uses") {
    Tape tape;
    Tensor x = tape.leaf(Shape{3}, std::vector<double>{1, 2, 3}, true);
    tape.backward(ad::sum_all(ad::add(x, x)));
    for (double g : x.grad()) CHECK(g == 2.0);
  }
  SUBCASE("max tie goes to the first index") {
    Tape tape;
    Tensor x = tape.leaf(Shape{3}, std::vector<double>{3, 3, 1}, true);
    tape.backward(ad::max_all(x));
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[2] == 0.0);
  }
  SUBCASE("scalar root required") {
    Tape tape;
    Tensor x = tape.leaf(Shape{2}, std::vector<double>{1, 2}, true);
    CHECK_THROWS_AS(tape.backward(ad::square(x)), std::invalid_argument);
  }
  SUBCASE("one backward per tape") {
    Tape tape;
    Tensor x = tape.leaf(Shape{1}, std::vector<double>{1}, true);
    Tensor r = ad::square(x);
    tape.backward(r);
    CHECK_THROWS_AS(tape.backward(r), std::logic_error);
  }
}

TEST_CASE("shape errors carry the operation and both shapes") {
  Tape tape;
  Tensor a = tape.leaf(Shape{2, 3}, std::vector<double>(6, 1.0));
  Tensor b = tape.leaf(Shape{3, 2}, std::vector<double>(6, 1.0));
  CHECK_THROWS_WITH_AS(ad::add(a, b), "add: shape mismatch [2,3] vs [3,2]",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(ad::matmul(a, a),
                       "matmul: inner dimensions disagree [2,3] vs [2,3]",
                       std::invalid_argument);
  CHECK_THROWS_AS(ad::slice(a, 0, 1, 5), std::invalid_argument);
  CHECK_THROWS_AS(ad::concat(std::vector<Tensor>{a, b}, 0), std::invalid_argument);
}

TEST_CASE("finite differences validate every primitive") {
  Rng rng(7);
  const double eps = 1e-5, tol = 1e-4;

  auto check = [&](const char* what, std::vector<ad::FdcParam> params,
                   const ad::FdcBuild& build) {
    auto report = ad::finite_difference_check(params, build, eps, tol);
    INFO(std::string(what), ": max error ", report.max_error, " at ", report.worst);
    CHECK(report.failure.empty());
    CHECK(report.pass);
  };

  Array a = random_array({2, 3}, rng);
  Array b = random_array({2, 3}, rng);
  Array c = random_array({3, 4}, rng);
  Array v = random_array({1, 4}, rng);

  SUBCASE("elementwise and reductions") {
    check("add/mul/tanh/sigmoid/mean", {{"a", &a}, {"b", &b}},
          [](Tape&, const std::vector<Tensor>& p) {
            return ad::mean_all(ad::mul(ad::sigmoid(p[0]), ad::tanh(ad::add(p[0], p[1]))));
          });
    check("sub/div/exp/square", {{"a", &a}, {"b", &b}},
          [](Tape&, const std::vector<Tensor>& p) {
            // denominator kept away from zero
            Tensor denom = ad::add_scalar(ad::exp(p[1]), 1.5);
            return ad::sum_all(ad::divide(ad::square(ad::sub(p[0], p[1])), denom));
          });
    check("log/sqrt on shifted-positive values", {{"a", &a}},
          [](Tape&, const std::vector<Tensor>& p) {
            Tensor pos = ad::add_scalar(ad::square(p[0]), 0.5);
            return ad::sum_all(ad::add(ad::log(pos), ad::sqrt(pos)));
          });
  }
  SUBCASE("matmul broadcast axis-sums") {
    check("matmul/broadcast_rows/sum_axis", {{"a", &a}, {"c", &c}, {"v", &v}},
          [](Tape&, const std::vector<Tensor>& p) {
            Tensor prod = ad::matmul(p[0], p[1]);                  // {2,4}
            Tensor shifted = ad::add(prod, ad::broadcast_rows(p[2], 2));
            Tensor cols = ad::sum_axis(shifted, 0);                // {4}
            Tensor rows = ad::sum_axis(ad::square(shifted), 1);    // {2}
            return ad::add(ad::sum_all(cols), ad::scale(ad::sum_all(rows), 0.25));
          });
  }
  SUBCASE("slice concat max") {
    check("slice/concat/max_all", {{"a", &a}, {"b", &b}},
          [](Tape&, const std::vector<Tensor>& p) {
            Tensor top = ad::slice(p[0], 0, 0, 1);      // {1,3}
            Tensor right = ad::slice(p[1], 1, 1, 3);    // {2,2}
            // The +50 keeps the argmax far from any probe-induced tie; a
            // central difference across a max kink would be meaningless.
            std::vector<Tensor> parts{ad::sum_all(top),
                                      ad::add_scalar(ad::sum_all(right), 50.0),
                                      ad::mean_all(ad::mul(p[0], p[1]))};
            Tensor stacked = ad::concat(parts, 0);      // {3}
            return ad::add(ad::max_all(stacked), ad::scale(ad::sum_all(stacked), 0.125));
          });
  }
}

TEST_CASE("fd checker on analytic cases") {
  SUBCASE("sum of squares is tight") {
    Rng rng(3);
    Array x = random_array({5}, rng);
    auto report = ad::finite_difference_check(
        {{"x", &x}},
        [](Tape&, const std::vector<Tensor>& p) { return ad::sum_all(ad::square(p[0])); },
        1e-5, 1e-4);
    CHECK(report.pass);
    CHECK(report.max_error < 1e-6);
  }
  SUBCASE("constant objective passes with zero gradients") {
    Rng rng(4);
    Array x = random_array({4}, rng);
    auto report = ad::finite_difference_check(
        {{"x", &x}},
        [](Tape& t2, const std::vector<Tensor>&) { return t2.constant(3.5); }, 1e-5, 1e-4);
    CHECK(report.pass);
    CHECK(report.max_error == 0.0);
  }
  SUBCASE("eps must be positive") {
    Array x = Array::zeros({1});
    CHECK_THROWS_AS(ad::finite_difference_check(
                        {{"x", &x}},
                        [](Tape&, const std::vector<Tensor>& p) { return ad::sum_all(p[0]); },
                        0.0, 1e-4),
                    std::invalid_argument);
  }
}

TEST_CASE("backward is deterministic and linear") {
  Rng rng(11);
  Array a = random_array({4, 4}, rng);
  Array b = random_array({4, 4}, rng);

  auto grads_of = [&](const std::function<Tensor(Tape&, Tensor, Tensor)>& f) {
    Tape tape;
    Tensor ta = tape.leaf(a, true);
    Tensor tb = tape.leaf(b, true);
    tape.backward(f(tape, ta, tb));
    auto ga = ta.grad();
    auto gb = tb.grad();
    std::vector<double> out(ga.begin(), ga.end());
    out.insert(out.end(), gb.begin(), gb.end());
    return out;
  };

  auto f1 = [](Tape&, Tensor x, Tensor y) { return ad::sum_all(ad::mul(x, ad::sigmoid(y))); };
  auto f2 = [](Tape&, Tensor x, Tensor y) { return ad::mean_all(ad::matmul(x, y)); };

  SUBCASE("identical tapes produce bitwise-identical gradients") {
    auto g1 = grads_of(f1);
    auto g2 = grads_of(f1);
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
  }
  SUBCASE("gradient of a sum of losses is the sum of gradients") {
    auto sum_f = [&](Tape& t, Tensor x, Tensor y) { return ad::add(f1(t, x, y), f2(t, x, y)); };
    auto g_sum = grads_of(sum_f);
    auto g1 = grads_of(f1);
    auto g2 = grads_of(f2);
    for (std::size_t i = 0; i < g_sum.size(); ++i)
      CHECK(g_sum[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
  }
}
