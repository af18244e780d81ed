// SPDX-License-Identifier: Apache-2.0

#include "awe/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace awe::ad {

namespace {

double evaluate(const std::vector<FdcParam>& params, const FdcBuild& f) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.leaf(*p.value, false));
  Tensor root = f(tape, leaves);
  return root.item();
}

}  // namespace

FdcReport finite_difference_check(const std::vector<FdcParam>& params,
                                  const FdcBuild& f, double eps, double tol) {
  if (eps <= 0.0) throw std::invalid_argument("finite_difference_check: eps must be > 0");
  FdcReport report;

  // Tape gradients.
  std::vector<Array> ad_grads;
  {
    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.leaf(*p.value, true));
    Tensor root = f(tape, leaves);
    const double f0 = root.item();
    if (!std::isfinite(f0)) {
      report.failure = "objective is non-finite at the base point";
      return report;
    }
    tape.backward(root);
    for (const Tensor& l : leaves) {
      auto g = l.grad();
      ad_grads.emplace_back(l.shape(), std::vector<double>(g.begin(), g.end()));
    }
  }

  for (std::size_t p = 0; p < params.size(); ++p) {
    Array& value = *params[p].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value.data[i];
      value.data[i] = saved + eps;
      const double f_plus = evaluate(params, f);
      value.data[i] = saved - eps;
      const double f_minus = evaluate(params, f);
      value.data[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        report.failure = "objective is non-finite at probe " + params[p].name + "[" +
                         std::to_string(i) + "]";
        return report;
      }
      const double fd = (f_plus - f_minus) / (2.0 * eps);
      const double ad = ad_grads[p].data[i];
      const double mag = std::max(std::fabs(ad), std::fabs(fd));
      const double err = mag < eps ? std::fabs(ad - fd) : std::fabs(ad - fd) / mag;
      ++report.coords_checked;
      if (err > report.max_error) {
        report.max_error = err;
        report.worst = params[p].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  report.pass = report.max_error <= tol;
  return report;
}

}  // namespace awe::ad
