#include "ptmf/model.hpp"

#include <algorithm>
#include <array>

#include "ptmf/errors.hpp"

namespace ptmf {

namespace {

void require_width(const FeatureMatrix& m, std::size_t expected, const std::string& what,
                   const std::string& id) {
  if (m.cols != expected) {
    throw DimensionError("sample " + id + ": " + what + " has " + std::to_string(m.cols) +
                         " columns but the model expects " + std::to_string(expected));
  }
}

std::vector<FeatureMatrix> load_bundle(const io::SampleRecord& record,
                                       const std::map<std::string, std::filesystem::path>& paths,
                                       std::span<const std::string_view> names,
                                       const ModelConfig& cfg) {
  std::vector<FeatureMatrix> out;
  out.reserve(names.size());
  for (auto name : names) {
    const auto it = paths.find(std::string(name));
    if (it == paths.end()) {
      throw ValidationError("sample " + record.id + ": missing stream " + std::string(name));
    }
    FeatureMatrix m = io::read_feature_file(it->second);
    require_width(m, cfg.dims.get(name), std::string(name), record.id);
    out.push_back(std::move(m));
  }
  return nn::align_streams(out);
}

}  // namespace

SampleTensors load_sample(const io::SampleRecord& record, const ModelConfig& cfg) {
  SampleTensors s;
  s.id = record.id;
  s.labels = record.labels;

  const auto audio = load_bundle(record, record.audio_paths, io::kAudioStreams, cfg);
  s.lld = audio[0].to_tensor();
  s.mfcc = audio[1].to_tensor();
  s.wav2vec = audio[2].to_tensor();
  const auto visual = load_bundle(record, record.visual_paths, io::kVisualStreams, cfg);
  s.openface = visual[0].to_tensor();
  s.resnet = visual[1].to_tensor();
  s.densenet = visual[2].to_tensor();

  FeatureMatrix p;
  if (record.personality_embedding_path) {
    const FeatureMatrix raw = io::read_feature_file(*record.personality_embedding_path);
    require_width(raw, cfg.personality_dim, "personality embedding", record.id);
    // Token-level embeddings are mean-pooled to one row.
    p = FeatureMatrix(1, raw.cols);
    for (std::size_t r = 0; r < raw.rows; ++r) {
      for (std::size_t c = 0; c < raw.cols; ++c) p(0, c) += raw(r, c);
    }
    for (auto& v : p.values) v /= static_cast<double>(raw.rows);
  } else {
    p = FeatureMatrix(1, cfg.personality_dim);
    p.values = io::profile_embedding(record.personality, cfg.personality_dim);
  }
  s.personality = p.to_tensor();
  return s;
}

std::vector<SampleTensors> load_samples(std::span<const io::SampleRecord> records,
                                        const ModelConfig& cfg) {
  std::vector<SampleTensors> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(load_sample(r, cfg));
  return out;
}

namespace nn {

ClassifierHead::ClassifierHead(ParamStore& store, const std::string& prefix, std::size_t in,
                               std::size_t hidden, std::size_t n_classes, double dropout, Rng& rng)
    : fc1(store, prefix + ".fc1", in, hidden, rng),
      fc2(store, prefix + ".fc2", hidden, n_classes, rng),
      dropout_rate(dropout) {}

Tensor ClassifierHead::logits(const Tensor& x, bool training, Rng& rng) const {
  return fc2(dropout(relu(fc1(x)), dropout_rate, training, rng));
}

Tensor ClassifierHead::classify(const Tensor& x, bool training, Rng& rng) const {
  return softmax(logits(x, training, rng), 1);
}

}  // namespace nn

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<double> mask(n * c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw ValidationError("cross_entropy: label " + std::to_string(labels[i]) +
                            " outside [0, " + std::to_string(c) + ")");
    }
    mask[i * c + static_cast<std::size_t>(labels[i])] = -1.0 / static_cast<double>(n);
  }
  return sum(mul(log_softmax(logits, 1), Tensor::from({n, c}, std::move(mask))));
}

DepressionNet::DepressionNet(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  const auto& d = cfg_.dims;
  const auto& ab = cfg_.ablation;

  // Audio branch.
  std::size_t audio_width = 0;
  lstm_w2v_ = nn::Lstm(store_, "enc.wav2vec.lstm", d.wav2vec, cfg_.audio_hidden, rng);
  if (ab.multi_audio) {
    lstm_lld_.emplace(store_, "enc.lld.lstm", d.lld, cfg_.audio_hidden, rng);
    lstm_mfcc_.emplace(store_, "enc.mfcc.lstm", d.mfcc, cfg_.audio_hidden, rng);
    coatt_.emplace(store_, "fuse.coatt", cfg_.audio_hidden, cfg_.audio_hidden, cfg_.audio_hidden,
                   cfg_.lld_proj, cfg_.mfcc_proj, cfg_.wav2vec_proj, cfg_.dropout,
                   cfg_.coatt_sigmoid, rng, ab.co_att);
    audio_width = coatt_->output_dim();
  } else {
    w2v_only_.emplace(store_, "fuse.coatt.wav2vec", cfg_.audio_hidden, cfg_.wav2vec_proj, rng);
    audio_width = cfg_.wav2vec_proj;
  }
  audio_asp_ = nn::Asp(store_, "enc.audio.asp", audio_width, cfg_.asp_dim, cfg_.asp_eps, rng);

  // Visual branch: frame-wise concatenation feeds one LSTM.
  const std::size_t visual_in = ab.multi_visual ? d.openface + d.resnet + d.densenet : d.openface;
  lstm_visual_ = nn::Lstm(store_, "enc.visual.lstm", visual_in, cfg_.visual_hidden, rng);
  visual_asp_ = nn::Asp(store_, "enc.visual.asp", cfg_.visual_hidden, cfg_.asp_dim, cfg_.asp_eps, rng);

  transformer_ = nn::TransformerFusion(store_, "fuse.tx", 2 * audio_width,
                                       2 * cfg_.visual_hidden, cfg_.d_model, cfg_.n_layers,
                                       cfg_.n_heads, cfg_.ffn_dim, cfg_.dropout, rng);

  std::size_t head_in = 0;
  if (ab.ptmfim) {
    ptmfim_.emplace(store_, "ptmfim", cfg_.personality_dim, cfg_.d_model, cfg_.d_h, cfg_.n_p,
                    cfg_.ptmfim_heads, cfg_.bca_personality_queries, rng);
    head_in = cfg_.d_h + (cfg_.classifier_concat_fused ? 2 * cfg_.d_model : 0);
  } else {
    head_in = cfg_.personality_dim + 2 * cfg_.d_model;
  }
  head_ = nn::ClassifierHead(store_, "head", head_in, cfg_.d_h, cfg_.n_classes(), cfg_.dropout, rng);
}

const nn::Lstm* DepressionNet::lstm(std::string_view stream) const {
  if (stream == "wav2vec") return &lstm_w2v_;
  if (stream == "visual") return &lstm_visual_;
  if (stream == "lld") return lstm_lld_ ? &*lstm_lld_ : nullptr;
  if (stream == "mfcc") return lstm_mfcc_ ? &*lstm_mfcc_ : nullptr;
  return nullptr;
}

Tensor DepressionNet::logits(const SampleTensors& s, bool training, Rng& rng, Trace* trace) const {
  const auto& ab = cfg_.ablation;

  Tensor audio_seq;
  const Tensor h_w2v = lstm_w2v_.encode(s.wav2vec);
  if (ab.multi_audio) {
    const Tensor h_lld = lstm_lld_->encode(s.lld);
    const Tensor h_mfcc = lstm_mfcc_->encode(s.mfcc);
    audio_seq = ab.co_att ? coatt_->fuse(h_lld, h_mfcc, h_w2v, training, rng)
                          : coatt_->concat_only(h_lld, h_mfcc, h_w2v, training, rng);
  } else {
    audio_seq = relu(dropout((*w2v_only_)(h_w2v), cfg_.dropout, training, rng));
  }

  const Tensor visual_in =
      ab.multi_visual ? nn::visual_concat(s.openface, s.resnet, s.densenet) : s.openface;
  const Tensor visual_seq = lstm_visual_.encode(visual_in);

  Tensor aw, vw;
  const Tensor u_a = audio_asp_.pool(audio_seq, trace ? &aw : nullptr);
  const Tensor u_v = visual_asp_.pool(visual_seq, trace ? &vw : nullptr);

  std::vector<Tensor> fusion_attn;
  nn::FusedRepresentation fused = transformer_.fuse(u_a, u_v, training, rng, trace ? &fusion_attn : nullptr);

  Tensor head_in;
  std::optional<nn::PtmfimOutput> pt;
  if (ptmfim_) {
    pt = ptmfim_->forward(s.personality, fused);
    head_in = cfg_.classifier_concat_fused ? concat({pt->out, fused.f_star}, 1) : pt->out;
  } else {
    if (s.personality.rank() != 2 || s.personality.dim(1) != cfg_.personality_dim) {
      throw DimensionError("personality embedding " + shape_str(s.personality.shape()) +
                           " does not match 1x" + std::to_string(cfg_.personality_dim));
    }
    head_in = concat({s.personality, fused.f_star}, 1);
  }
  Tensor out = head_.logits(head_in, training, rng);

  if (trace) {
    trace->audio_sequence = audio_seq;
    trace->visual_sequence = visual_seq;
    trace->audio_weights = aw;
    trace->visual_weights = vw;
    trace->u_a = u_a;
    trace->u_v = u_v;
    trace->fused = std::move(fused);
    trace->ptmfim = std::move(pt);
    trace->fusion_attention = std::move(fusion_attn);
    trace->classifier_input = head_in;
  }
  return out;
}

int DepressionNet::predict(const SampleTensors& sample) const {
  NoGradGuard guard;
  Rng unused(0);
  const Tensor l = logits(sample, false, unused);
  const auto v = l.data();
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace ptmf
