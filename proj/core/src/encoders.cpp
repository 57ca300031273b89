#include "ptmf/encoders.hpp"

#include <cmath>
#include <vector>

#include "ptmf/errors.hpp"

namespace ptmf::nn {

Lstm::Lstm(ParamStore& store, const std::string& prefix, std::size_t input_dim,
           std::size_t hidden_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  auto mat = [&](const char* name, std::size_t cols) {
    return store.create(prefix + "." + name, Tensor::uniform({hidden_dim, cols}, -bound, bound, rng));
  };
  W_i = mat("W_i", input_dim);
  W_f = mat("W_f", input_dim);
  W_o = mat("W_o", input_dim);
  W_g = mat("W_g", input_dim);
  U_i = mat("U_i", hidden_dim);
  U_f = mat("U_f", hidden_dim);
  U_o = mat("U_o", hidden_dim);
  U_g = mat("U_g", hidden_dim);
  b_i = store.create(prefix + ".b_i", Tensor::zeros({1, hidden_dim}));
  b_f = store.create(prefix + ".b_f", Tensor::full({1, hidden_dim}, 1.0));
  b_o = store.create(prefix + ".b_o", Tensor::zeros({1, hidden_dim}));
  b_g = store.create(prefix + ".b_g", Tensor::zeros({1, hidden_dim}));
}

Tensor Lstm::encode(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != input_dim()) {
    throw DimensionError("lstm: input " + shape_str(x.shape()) + " does not match input_dim " +
                         std::to_string(input_dim()));
  }
  const std::size_t steps = x.dim(0);
  const std::size_t h = hidden_dim();

  // Gate blocks laid side by side in the order i, f, o, g.
  const Tensor w_all = concat({transpose(W_i), transpose(W_f), transpose(W_o), transpose(W_g)}, 1);
  const Tensor u_all = concat({transpose(U_i), transpose(U_f), transpose(U_o), transpose(U_g)}, 1);
  const Tensor b_all = concat({b_i, b_f, b_o, b_g}, 1);
  const Tensor input_part = add(matmul(x, w_all), b_all);

  Tensor hidden = Tensor::zeros({1, h});
  Tensor cell = Tensor::zeros({1, h});
  std::vector<Tensor> outputs;
  outputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor pre = add(slice(input_part, 0, t, t + 1), matmul(hidden, u_all));
    const Tensor gates = sigmoid(slice(pre, 1, 0, 3 * h));
    const Tensor i = slice(gates, 1, 0, h);
    const Tensor f = slice(gates, 1, h, 2 * h);
    const Tensor o = slice(gates, 1, 2 * h, 3 * h);
    const Tensor g = tanh(slice(pre, 1, 3 * h, 4 * h));
    cell = add(mul(f, cell), mul(i, g));
    hidden = mul(o, tanh(cell));
    outputs.push_back(hidden);
  }
  return concat(outputs, 0);
}

Asp::Asp(ParamStore& store, const std::string& prefix, std::size_t input_dim,
         std::size_t attention_dim, double eps_, Rng& rng)
    : eps(eps_) {
  if (!(eps > 0.0)) throw ValidationError("asp: eps must be positive");
  const double bw = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bv = 1.0 / std::sqrt(static_cast<double>(attention_dim));
  W = store.create(prefix + ".W", Tensor::uniform({attention_dim, input_dim}, -bw, bw, rng));
  b = store.create(prefix + ".b", Tensor::zeros({1, attention_dim}));
  v = store.create(prefix + ".v", Tensor::uniform({attention_dim, 1}, -bv, bv, rng));
}

Tensor Asp::pool(const Tensor& h, Tensor* weights) const {
  if (h.rank() != 2 || h.dim(1) != W.dim(1)) {
    throw DimensionError("asp: input " + shape_str(h.shape()) + " does not match width " +
                         std::to_string(W.dim(1)));
  }
  const Tensor scores = matmul(tanh(add(matmul(h, transpose(W)), b)), v);  // T x 1
  const Tensor alpha = softmax(scores, 0);
  if (weights) *weights = alpha;
  const Tensor mu = sum_axis(mul(h, alpha), 0);
  const Tensor second = sum_axis(mul(square(h), alpha), 0);
  const Tensor var = relu(sub(second, square(mu)));
  const Tensor sd = sqrt(add_scalar(var, eps));
  return concat({mu, sd}, 1);
}

}  // namespace ptmf::nn
