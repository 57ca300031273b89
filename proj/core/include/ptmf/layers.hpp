#pragma once

#include <string>
#include <vector>

#include "ptmf/params.hpp"
#include "ptmf/tensor.hpp"

namespace ptmf::nn {

/// y = x W + b with W: in x out, b: 1 x out. Uniform(+-1/sqrt(in)) init.
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
         bool with_bias = true);

  Tensor operator()(const Tensor& x) const;
  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& prefix, std::size_t dim);

  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias, eps); }
};

/// Scaled dot-product attention over rows. `q`: Nq x d, `k`,`v`: Nk x d, with
/// d split evenly over `heads`. Each head's Nq x Nk weight matrix is appended
/// to `weights` when it is non-null.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 std::vector<Tensor>* weights = nullptr);

}  // namespace ptmf::nn
