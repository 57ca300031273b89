#pragma once

#include <string>

#include "ptmf/params.hpp"
#include "ptmf/tensor.hpp"

namespace ptmf::nn {

/// Unidirectional single-layer LSTM. Gate matrices follow the H x D / H x H
/// convention; biases are 1 x H rows. Parameters are registered as
/// "<prefix>.W_i" ... "<prefix>.b_g".
struct Lstm {
  Tensor W_i, W_f, W_o, W_g;
  Tensor U_i, U_f, U_o, U_g;
  Tensor b_i, b_f, b_o, b_g;

  Lstm() = default;
  // Weights uniform in +-1/sqrt(H); forget bias 1.0, other biases 0.
  Lstm(ParamStore& store, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
       Rng& rng);

  std::size_t input_dim() const { return W_i.dim(1); }
  std::size_t hidden_dim() const { return W_i.dim(0); }

  /// x: T x D -> all hidden states T x H, starting from h0 = c0 = 0.
  Tensor encode(const Tensor& x) const;
};

/// Attentive statistics pooling: frame-level T x H to a 1 x 2H utterance
/// vector [weighted mean, weighted std].
struct Asp {
  Tensor W;  // A x H
  Tensor b;  // 1 x A
  Tensor v;  // A x 1
  double eps = 1e-5;

  Asp() = default;
  Asp(ParamStore& store, const std::string& prefix, std::size_t input_dim, std::size_t attention_dim,
      double eps, Rng& rng);

  /// `weights`, when given, receives the T x 1 attention distribution.
  Tensor pool(const Tensor& h, Tensor* weights = nullptr) const;
};

}  // namespace ptmf::nn
