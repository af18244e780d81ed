// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major array of 64-bit floats. Everything numeric that lives
// outside a tape (dataset frames, model parameters, checkpoints) is an Array;
// tape tensors share the same layout.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace awe {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape);

struct Array {
  Shape shape;
  std::vector<double> data;

  Array() = default;
  Array(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != data.size())
      throw std::invalid_argument("Array: " + shape_str(shape) + " does not hold " +
                                  std::to_string(data.size()) + " values");
  }

  static Array zeros(Shape s) {
    std::vector<double> d(numel(s), 0.0);
    return Array(std::move(s), std::move(d));
  }
  static Array full(Shape s, double v) {
    std::vector<double> d(numel(s), v);
    return Array(std::move(s), std::move(d));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  // 2-d accessors; rows()/cols() require rank 2.
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }
  double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }
};

}  // namespace awe
