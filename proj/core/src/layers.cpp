#include "ptmf/layers.hpp"

#include <cmath>

#include "ptmf/errors.hpp"

namespace ptmf::nn {

Linear::Linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
               Rng& rng, bool with_bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = store.create(prefix + ".weight", Tensor::uniform({in, out}, -bound, bound, rng));
  if (with_bias) bias = store.create(prefix + ".bias", Tensor::uniform({1, out}, -bound, bound, rng));
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& prefix, std::size_t dim) {
  gain = store.create(prefix + ".gain", Tensor::full({dim}, 1.0));
  bias = store.create(prefix + ".bias", Tensor::zeros({dim}));
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 std::vector<Tensor>* weights) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != k.dim(1) ||
      k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: incompatible q/k/v shapes " + shape_str(q.shape()) + ", " +
                         shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  if (heads == 0 || q.dim(1) % heads != 0 || v.dim(1) % heads != 0) {
    throw DimensionError("attention: width " + std::to_string(q.dim(1)) +
                         " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t dk = q.dim(1) / heads;
  const std::size_t dv = v.dim(1) / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));
  if (heads == 1) {
    Tensor w = softmax(scale(matmul(q, transpose(k)), inv_scale), 1);
    if (weights) weights->push_back(w);
    return matmul(w, v);
  }
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice(q, 1, h * dk, (h + 1) * dk);
    Tensor kh = slice(k, 1, h * dk, (h + 1) * dk);
    Tensor vh = slice(v, 1, h * dv, (h + 1) * dv);
    Tensor w = softmax(scale(matmul(qh, transpose(kh)), inv_scale), 1);
    if (weights) weights->push_back(w);
    outs.push_back(matmul(w, vh));
  }
  return concat(outs, 1);
}

}  // namespace ptmf::nn
