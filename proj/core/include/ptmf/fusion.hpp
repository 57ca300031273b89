#pragma once

#include <span>
#include <string>
#include <vector>

#include "ptmf/feature_matrix.hpp"
#include "ptmf/layers.hpp"
#include "ptmf/params.hpp"
#include "ptmf/tensor.hpp"

namespace ptmf::nn {

/// Nearest-frame resampling of a T_src x D sequence to `frames` rows.
FeatureMatrix resample_nearest(const FeatureMatrix& m, std::size_t frames);
/// Resamples every stream of a bundle to the bundle's minimum frame count.
std::vector<FeatureMatrix> align_streams(std::span<const FeatureMatrix> streams);

/// Audio co-attention: each stream goes through ReLU(Dropout(Linear(x)));
/// the LLD and MFCC outputs, projected by P, weight the Wav2Vec output
/// element-wise, and the result is concatenated with the LLD and MFCC outputs.
struct CoAttention {
  Linear lld;
  Linear mfcc;
  Linear wav2vec;
  Tensor P;  // (d_lld' + d_mfcc') x d_w2v'; absent when built unweighted
  double dropout_rate = 0.0;
  bool sigmoid_weights = false;

  CoAttention() = default;
  CoAttention(ParamStore& store, const std::string& prefix, std::size_t lld_in, std::size_t mfcc_in,
              std::size_t w2v_in, std::size_t lld_out, std::size_t mfcc_out, std::size_t w2v_out,
              double dropout, bool sigmoid_weights, Rng& rng, bool weighted = true);

  std::size_t output_dim() const { return wav2vec.out_dim() + lld.out_dim() + mfcc.out_dim(); }

  /// All inputs T x (.) with equal T; output T x (d_w2v' + d_lld' + d_mfcc').
  Tensor fuse(const Tensor& lld_seq, const Tensor& mfcc_seq, const Tensor& w2v_seq, bool training,
              Rng& rng) const;
  /// Same transforms, no element-wise weighting: concat(w2v', lld', mfcc').
  Tensor concat_only(const Tensor& lld_seq, const Tensor& mfcc_seq, const Tensor& w2v_seq,
                     bool training, Rng& rng) const;

  Tensor transform(const Linear& layer, const Tensor& x, bool training, Rng& rng) const;
};

/// Frame-wise concatenation in the order (openface, resnet, densenet).
Tensor visual_concat(const Tensor& openface, const Tensor& resnet, const Tensor& densenet);

struct FusedRepresentation {
  Tensor f_star;        // 1 x 2*d_model: [audio_token, visual_token]
  Tensor audio_token;   // 1 x d_model
  Tensor visual_token;  // 1 x d_model
};

/// Pre-norm transformer encoder layer over a short token sequence.
struct EncoderLayer {
  LayerNorm ln_attn;
  Linear q, k, v, o;
  LayerNorm ln_ffn;
  Linear ffn_in, ffn_out;
  std::size_t heads = 1;

  EncoderLayer() = default;
  EncoderLayer(ParamStore& store, const std::string& prefix, std::size_t d_model, std::size_t heads,
               std::size_t ffn_dim, Rng& rng);

  Tensor forward(const Tensor& x, double dropout, bool training, Rng& rng,
                 std::vector<Tensor>* attention = nullptr) const;
};

/// Projects the two utterance vectors to d_model, adds modality embeddings,
/// and runs the 2-token sequence through the encoder stack.
struct TransformerFusion {
  Linear audio_in;
  Linear visual_in;
  Tensor m_a;  // 1 x d_model
  Tensor m_v;  // 1 x d_model
  std::vector<EncoderLayer> layers;
  double dropout_rate = 0.0;

  TransformerFusion() = default;
  TransformerFusion(ParamStore& store, const std::string& prefix, std::size_t audio_dim,
                    std::size_t visual_dim, std::size_t d_model, std::size_t n_layers,
                    std::size_t heads, std::size_t ffn_dim, double dropout, Rng& rng);

  std::size_t d_model() const { return audio_in.out_dim(); }

  FusedRepresentation fuse(const Tensor& u_a, const Tensor& u_v, bool training, Rng& rng,
                           std::vector<Tensor>* attention = nullptr) const;
};

}  // namespace ptmf::nn
