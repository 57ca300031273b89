#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ptmf/tensor.hpp"

namespace ptmf {

/// T x D frame-level feature sequence, row-major. Stored as f64 in memory;
/// the on-disk form narrows to f32.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t t, std::size_t d, double fill = 0.0)
      : rows(t), cols(d), values(t * d, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  // T >= 1, D >= 1, size consistent, all values finite.
  void validate() const;

  Tensor to_tensor() const;
  static FeatureMatrix from_tensor(const Tensor& t);

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

}  // namespace ptmf
