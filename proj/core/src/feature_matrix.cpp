#include "ptmf/feature_matrix.hpp"

#include <cmath>

#include "ptmf/errors.hpp"

namespace ptmf {

void FeatureMatrix::validate() const {
  if (rows == 0 || cols == 0) {
    throw ValidationError("feature matrix must be at least 1x1, got " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  if (values.size() != rows * cols) throw ValidationError("feature matrix size mismatch");
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("feature matrix holds a non-finite value");
  }
}

Tensor FeatureMatrix::to_tensor() const { return Tensor::from({rows, cols}, values); }

FeatureMatrix FeatureMatrix::from_tensor(const Tensor& t) {
  if (t.rank() != 2) throw DimensionError("feature matrix needs a rank-2 tensor");
  FeatureMatrix m(t.dim(0), t.dim(1));
  std::copy(t.data().begin(), t.data().end(), m.values.begin());
  return m;
}

}  // namespace ptmf
