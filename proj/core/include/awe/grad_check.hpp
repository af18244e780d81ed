// SPDX-License-Identifier: Apache-2.0
//
// Central-difference gradient verification. The builder callback constructs
// the scalar under test on a fresh tape from the supplied parameter leaves,
// so the check stays independent of how callers normally wire their losses.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "awe/array.hpp"
#include "awe/tensor.hpp"

namespace awe::ad {

struct FdcParam {
  std::string name;
  Array* value = nullptr;
};

// Builds the scalar objective from leaves that correspond 1:1 (by position)
// to the FdcParam list.
using FdcBuild = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

struct FdcReport {
  bool pass = false;
  // Max over coordinates of |ad - fd| / max(|ad|, |fd|); plain |ad - fd|
  // where both magnitudes fall below eps.
  double max_error = 0.0;
  std::string worst;    // "name[i]" of the worst coordinate
  std::string failure;  // non-empty when a probe produced a non-finite value
  std::size_t coords_checked = 0;
};

FdcReport finite_difference_check(const std::vector<FdcParam>& params,
                                  const FdcBuild& f, double eps, double tol);

}  // namespace awe::ad
