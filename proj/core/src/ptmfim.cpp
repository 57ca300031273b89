#include "ptmf/ptmfim.hpp"

#include <cmath>

#include "ptmf/errors.hpp"

namespace ptmf::nn {

Ptmfim::Ptmfim(ParamStore& store, const std::string& prefix, std::size_t personality_dim,
               std::size_t d_model, std::size_t d_h, std::size_t n_p_, std::size_t heads_,
               bool personality_queries_, Rng& rng)
    : personality_in(store, prefix + ".personality_in", personality_dim, n_p_ * d_h, rng),
      multimodal_in(store, prefix + ".multimodal_in", d_model, d_h, rng),
      q_b(store, prefix + ".bca.q", d_h, d_h, rng, false),
      k_b(store, prefix + ".bca.k", d_h, d_h, rng, false),
      v_b(store, prefix + ".bca.v", d_h, d_h, rng, false),
      q_t(store, prefix + ".tia.q", d_h, d_h, rng, false),
      k_t(store, prefix + ".tia.k", d_h, d_h, rng, false),
      v_t(store, prefix + ".tia.v", d_h, d_h, rng, false),
      n_p(n_p_),
      heads(heads_),
      personality_queries(personality_queries_) {
  if (n_p == 0) throw ValidationError("ptmfim: n_p must be positive");
  if (d_h % heads != 0) throw ValidationError("ptmfim: d_h must be divisible by heads");
  const double bound = 1.0 / std::sqrt(static_cast<double>(2 * d_h));
  gate_w = store.create(prefix + ".gate.weight", Tensor::uniform({2 * d_h, d_h}, -bound, bound, rng));
  gate_b = store.create(prefix + ".gate.bias", Tensor::zeros({1, d_h}));
}

Tensor Ptmfim::personality_tokens(const Tensor& embedding) const {
  if (embedding.rank() != 2 || embedding.dim(0) != 1 || embedding.dim(1) != personality_in.in_dim()) {
    throw DimensionError("ptmfim: personality embedding " + shape_str(embedding.shape()) +
                         " does not match 1x" + std::to_string(personality_in.in_dim()));
  }
  return reshape(personality_in(embedding), {n_p, d_h()});
}

Tensor Ptmfim::multimodal_tokens(const FusedRepresentation& fused) const {
  return multimodal_in(concat({fused.audio_token, fused.visual_token}, 0));
}

Tensor Ptmfim::binary_correlation(const Tensor& p_tok, const Tensor& m_tok,
                                  std::vector<Tensor>* attn) const {
  if (p_tok.dim(1) != d_h() || m_tok.dim(1) != d_h()) {
    throw DimensionError("ptmfim: token widths " + shape_str(p_tok.shape()) + ", " +
                         shape_str(m_tok.shape()) + " do not match d_h " + std::to_string(d_h()));
  }
  if (personality_queries) return attention(q_b(p_tok), k_b(m_tok), v_b(m_tok), heads, attn);
  return attention(q_b(m_tok), k_b(p_tok), v_b(p_tok), heads, attn);
}

Tensor Ptmfim::triple_interaction(const Tensor& p_tok, const Tensor& bca,
                                  std::vector<Tensor>* attn) const {
  if (p_tok.dim(1) != d_h() || bca.dim(1) != d_h()) {
    throw DimensionError("ptmfim: token widths " + shape_str(p_tok.shape()) + ", " +
                         shape_str(bca.shape()) + " do not match d_h " + std::to_string(d_h()));
  }
  return attention(q_t(p_tok), k_t(bca), v_t(bca), heads, attn);
}

PtmfimOutput Ptmfim::gate_regulator(const Tensor& bca, const Tensor& tia, const Tensor& p_pooled) const {
  const Tensor b_mean = mean_axis(bca, 0);
  const Tensor t_mean = mean_axis(tia, 0);
  PtmfimOutput out;
  out.bca = bca;
  out.tia = tia;
  out.p_pooled = p_pooled;
  out.gate = sigmoid(add(matmul(concat({b_mean, t_mean}, 1), gate_w), gate_b));
  out.out = add(mul(out.gate, t_mean), p_pooled);
  return out;
}

PtmfimOutput Ptmfim::forward(const Tensor& personality_embedding, const FusedRepresentation& fused) const {
  const Tensor p_tok = personality_tokens(personality_embedding);
  const Tensor m_tok = multimodal_tokens(fused);
  std::vector<Tensor> attn;
  const Tensor bca = binary_correlation(p_tok, m_tok, &attn);
  const Tensor tia = triple_interaction(p_tok, bca, &attn);
  PtmfimOutput out = gate_regulator(bca, tia, mean_axis(p_tok, 0));
  out.p_tokens = p_tok;
  out.m_tokens = m_tok;
  out.attention = std::move(attn);
  return out;
}

}  // namespace ptmf::nn
