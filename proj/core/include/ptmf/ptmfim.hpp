#pragma once

#include <string>
#include <vector>

#include "ptmf/fusion.hpp"
#include "ptmf/layers.hpp"
#include "ptmf/params.hpp"
#include "ptmf/tensor.hpp"

namespace ptmf::nn {

struct PtmfimOutput {
  Tensor out;          // 1 x d_h, classifier input
  Tensor gate;         // 1 x d_h, each in (0, 1)
  Tensor bca;          // B: binary correlation attention output
  Tensor tia;          // triple interaction attention output
  Tensor p_tokens;     // n_p x d_h
  Tensor m_tokens;     // 2 x d_h
  Tensor p_pooled;     // 1 x d_h
  std::vector<Tensor> attention;  // BCA weights then TIA weights, one per head
};

/// Personality traits and multimodal feature interaction: binary correlation
/// attention (personality queries over the audio/visual tokens), triple
/// interaction attention (personality queries over the BCA output), and a
/// sigmoid gate on the TIA output with a personality residual.
struct Ptmfim {
  Linear personality_in;  // d_p -> n_p * d_h
  Linear multimodal_in;   // d_model -> d_h
  Linear q_b, k_b, v_b;   // bias-free d_h x d_h
  Linear q_t, k_t, v_t;
  Tensor gate_w;  // 2 d_h x d_h
  Tensor gate_b;  // 1 x d_h
  std::size_t n_p = 4;
  std::size_t heads = 1;
  // false swaps BCA roles: multimodal tokens query the personality tokens.
  bool personality_queries = true;

  Ptmfim() = default;
  Ptmfim(ParamStore& store, const std::string& prefix, std::size_t personality_dim,
         std::size_t d_model, std::size_t d_h, std::size_t n_p, std::size_t heads,
         bool personality_queries, Rng& rng);

  std::size_t d_h() const { return q_b.in_dim(); }

  /// 1 x d_p embedding -> n_p x d_h tokens.
  Tensor personality_tokens(const Tensor& embedding) const;
  /// audio/visual tokens (1 x d_model each) -> 2 x d_h.
  Tensor multimodal_tokens(const FusedRepresentation& fused) const;

  Tensor binary_correlation(const Tensor& p_tok, const Tensor& m_tok,
                            std::vector<Tensor>* attention = nullptr) const;
  Tensor triple_interaction(const Tensor& p_tok, const Tensor& bca,
                            std::vector<Tensor>* attention = nullptr) const;
  /// Fills out/gate from the two attention outputs and the pooled personality.
  PtmfimOutput gate_regulator(const Tensor& bca, const Tensor& tia, const Tensor& p_pooled) const;

  PtmfimOutput forward(const Tensor& personality_embedding, const FusedRepresentation& fused) const;
};

}  // namespace ptmf::nn
