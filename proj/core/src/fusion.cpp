#include "ptmf/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "ptmf/errors.hpp"

namespace ptmf::nn {

FeatureMatrix resample_nearest(const FeatureMatrix& m, std::size_t frames) {
  if (frames == 0 || m.rows == 0) throw ValidationError("resample_nearest: empty sequence");
  FeatureMatrix out(frames, m.cols);
  for (std::size_t i = 0; i < frames; ++i) {
    // Centre of output frame i mapped onto the source timeline.
    const double pos = (static_cast<double>(i) + 0.5) * static_cast<double>(m.rows) /
                       static_cast<double>(frames);
    const std::size_t src = std::min(m.rows - 1, static_cast<std::size_t>(pos));
    std::copy(m.row(src).begin(), m.row(src).end(), out.row(i).begin());
  }
  return out;
}

std::vector<FeatureMatrix> align_streams(std::span<const FeatureMatrix> streams) {
  std::size_t frames = SIZE_MAX;
  for (const auto& s : streams) frames = std::min(frames, s.rows);
  std::vector<FeatureMatrix> out;
  out.reserve(streams.size());
  for (const auto& s : streams) out.push_back(s.rows == frames ? s : resample_nearest(s, frames));
  return out;
}

// ---- co-attention ---------------------------------------------------------

CoAttention::CoAttention(ParamStore& store, const std::string& prefix, std::size_t lld_in,
                         std::size_t mfcc_in, std::size_t w2v_in, std::size_t lld_out,
                         std::size_t mfcc_out, std::size_t w2v_out, double dropout,
                         bool sigmoid_weights_, Rng& rng, bool weighted)
    : lld(store, prefix + ".lld", lld_in, lld_out, rng),
      mfcc(store, prefix + ".mfcc", mfcc_in, mfcc_out, rng),
      wav2vec(store, prefix + ".wav2vec", w2v_in, w2v_out, rng),
      dropout_rate(dropout),
      sigmoid_weights(sigmoid_weights_) {
  if (!weighted) return;
  const double bound = 1.0 / std::sqrt(static_cast<double>(lld_out + mfcc_out));
  P = store.create(prefix + ".P", Tensor::uniform({lld_out + mfcc_out, w2v_out}, -bound, bound, rng));
}

Tensor CoAttention::transform(const Linear& layer, const Tensor& x, bool training, Rng& rng) const {
  return relu(dropout(layer(x), dropout_rate, training, rng));
}

namespace {

void require_equal_frames(const Tensor& a, const Tensor& b, const Tensor& c, const char* names) {
  if (a.dim(0) != b.dim(0) || a.dim(0) != c.dim(0)) {
    throw DimensionError(std::string("frame-count mismatch between ") + names + ": " +
                         std::to_string(a.dim(0)) + ", " + std::to_string(b.dim(0)) + ", " +
                         std::to_string(c.dim(0)));
  }
}

}  // namespace

Tensor CoAttention::fuse(const Tensor& lld_seq, const Tensor& mfcc_seq, const Tensor& w2v_seq,
                         bool training, Rng& rng) const {
  require_equal_frames(lld_seq, mfcc_seq, w2v_seq, "lld, mfcc, wav2vec");
  if (!P.defined()) throw ValidationError("co-attention built without a weighting projection");
  const Tensor l = transform(lld, lld_seq, training, rng);
  const Tensor m = transform(mfcc, mfcc_seq, training, rng);
  const Tensor w = transform(wav2vec, w2v_seq, training, rng);
  Tensor gate = matmul(concat({l, m}, 1), P);
  if (sigmoid_weights) gate = sigmoid(gate);
  return concat({mul(gate, w), l, m}, 1);
}

Tensor CoAttention::concat_only(const Tensor& lld_seq, const Tensor& mfcc_seq,
                                const Tensor& w2v_seq, bool training, Rng& rng) const {
  require_equal_frames(lld_seq, mfcc_seq, w2v_seq, "lld, mfcc, wav2vec");
  const Tensor l = transform(lld, lld_seq, training, rng);
  const Tensor m = transform(mfcc, mfcc_seq, training, rng);
  const Tensor w = transform(wav2vec, w2v_seq, training, rng);
  return concat({w, l, m}, 1);
}

Tensor visual_concat(const Tensor& openface, const Tensor& resnet, const Tensor& densenet) {
  require_equal_frames(openface, resnet, densenet, "openface, resnet, densenet");
  return concat({openface, resnet, densenet}, 1);
}

// ---- transformer ----------------------------------------------------------

EncoderLayer::EncoderLayer(ParamStore& store, const std::string& prefix, std::size_t d_model,
                           std::size_t heads_, std::size_t ffn_dim, Rng& rng)
    : ln_attn(store, prefix + ".ln_attn", d_model),
      q(store, prefix + ".q", d_model, d_model, rng),
      k(store, prefix + ".k", d_model, d_model, rng, false),  // a key bias cannot change softmax weights
      v(store, prefix + ".v", d_model, d_model, rng),
      o(store, prefix + ".o", d_model, d_model, rng),
      ln_ffn(store, prefix + ".ln_ffn", d_model),
      ffn_in(store, prefix + ".ffn_in", d_model, ffn_dim, rng),
      ffn_out(store, prefix + ".ffn_out", ffn_dim, d_model, rng),
      heads(heads_) {}

Tensor EncoderLayer::forward(const Tensor& x, double dropout_rate, bool training, Rng& rng,
                             std::vector<Tensor>* attn) const {
  const Tensor n1 = ln_attn(x);
  const Tensor mixed = attention(q(n1), k(n1), v(n1), heads, attn);
  const Tensor h = add(x, dropout(o(mixed), dropout_rate, training, rng));
  const Tensor n2 = ln_ffn(h);
  const Tensor inner = dropout(relu(ffn_in(n2)), dropout_rate, training, rng);
  return add(h, dropout(ffn_out(inner), dropout_rate, training, rng));
}

TransformerFusion::TransformerFusion(ParamStore& store, const std::string& prefix,
                                     std::size_t audio_dim, std::size_t visual_dim,
                                     std::size_t d_model, std::size_t n_layers, std::size_t heads,
                                     std::size_t ffn_dim, double dropout, Rng& rng)
    : audio_in(store, prefix + ".in_audio", audio_dim, d_model, rng),
      visual_in(store, prefix + ".in_visual", visual_dim, d_model, rng),
      dropout_rate(dropout) {
  if (d_model % heads != 0) throw ValidationError("transformer: d_model must be divisible by n_heads");
  m_a = store.create(prefix + ".m_a", Tensor::normal({1, d_model}, 0.0, 0.1, rng));
  m_v = store.create(prefix + ".m_v", Tensor::normal({1, d_model}, 0.0, 0.1, rng));
  for (std::size_t l = 0; l < n_layers; ++l) {
    layers.emplace_back(store, prefix + ".layer" + std::to_string(l), d_model, heads, ffn_dim, rng);
  }
}

FusedRepresentation TransformerFusion::fuse(const Tensor& u_a, const Tensor& u_v, bool training,
                                            Rng& rng, std::vector<Tensor>* attn) const {
  Tensor tokens = concat({add(audio_in(u_a), m_a), add(visual_in(u_v), m_v)}, 0);
  for (const auto& layer : layers) tokens = layer.forward(tokens, dropout_rate, training, rng, attn);
  FusedRepresentation out;
  out.audio_token = slice(tokens, 0, 0, 1);
  out.visual_token = slice(tokens, 0, 1, 2);
  out.f_star = reshape(tokens, {1, 2 * d_model()});
  return out;
}

}  // namespace ptmf::nn
