#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptmf/config.hpp"
#include "ptmf/data_io.hpp"
#include "ptmf/encoders.hpp"
#include "ptmf/fusion.hpp"
#include "ptmf/layers.hpp"
#include "ptmf/params.hpp"
#include "ptmf/ptmfim.hpp"

namespace ptmf {

/// One subject's aligned network inputs.
struct SampleTensors {
  std::string id;
  Tensor lld, mfcc, wav2vec;          // common T_a
  Tensor openface, resnet, densenet;  // common T_v
  Tensor personality;                 // 1 x d_p
  io::TaskLabels labels;
};

/// Reads a record's feature files, aligns each bundle, and checks every
/// width against `cfg` (DimensionError naming both sides on mismatch).
SampleTensors load_sample(const io::SampleRecord& record, const ModelConfig& cfg);
std::vector<SampleTensors> load_samples(std::span<const io::SampleRecord> records,
                                        const ModelConfig& cfg);

namespace nn {

/// Two-layer MLP: Linear(in, hidden) -> ReLU -> Dropout -> Linear(hidden, n_classes).
struct ClassifierHead {
  Linear fc1;
  Linear fc2;
  double dropout_rate = 0.0;

  ClassifierHead() = default;
  ClassifierHead(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden,
                 std::size_t n_classes, double dropout, Rng& rng);

  Tensor logits(const Tensor& x, bool training, Rng& rng) const;
  /// Softmax probabilities, 1 x n_classes.
  Tensor classify(const Tensor& x, bool training, Rng& rng) const;
};

}  // namespace nn

/// Mean negative log-likelihood of `labels` under row-wise log-softmax of
/// `logits` (N x C).
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Full network. Submodules are built only when the ablation flags enable them.
class DepressionNet {
 public:
  explicit DepressionNet(const ModelConfig& cfg);

  struct Trace {
    Tensor audio_sequence;  // frame-level input to audio ASP
    Tensor visual_sequence;
    Tensor audio_weights;   // ASP attention, T x 1
    Tensor visual_weights;
    Tensor u_a, u_v;
    nn::FusedRepresentation fused;
    std::optional<nn::PtmfimOutput> ptmfim;
    std::vector<Tensor> fusion_attention;
    Tensor classifier_input;
  };

  /// 1 x n_classes logits.
  Tensor logits(const SampleTensors& sample, bool training, Rng& rng, Trace* trace = nullptr) const;
  /// argmax class under inference mode.
  int predict(const SampleTensors& sample) const;

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const ModelConfig& config() const { return cfg_; }

  const nn::Lstm* lstm(std::string_view stream) const;
  const nn::Asp& audio_asp() const { return audio_asp_; }
  const nn::Asp& visual_asp() const { return visual_asp_; }
  const std::optional<nn::CoAttention>& coattention() const { return coatt_; }
  const nn::TransformerFusion& transformer() const { return transformer_; }
  const std::optional<nn::Ptmfim>& ptmfim() const { return ptmfim_; }
  const nn::ClassifierHead& head() const { return head_; }

 private:
  ModelConfig cfg_;
  ParamStore store_;
  std::optional<nn::Lstm> lstm_lld_, lstm_mfcc_;
  nn::Lstm lstm_w2v_;
  nn::Lstm lstm_visual_;
  std::optional<nn::CoAttention> coatt_;
  std::optional<nn::Linear> w2v_only_;
  nn::Asp audio_asp_;
  nn::Asp visual_asp_;
  nn::TransformerFusion transformer_;
  std::optional<nn::Ptmfim> ptmfim_;
  nn::ClassifierHead head_;
};

}  // namespace ptmf
