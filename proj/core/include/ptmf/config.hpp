#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ptmf/data_io.hpp"

namespace ptmf {

struct AblationFlags {
  bool multi_audio = true;   // false: Wav2Vec stream only
  bool co_att = true;        // false: plain concatenation of transformed audio streams
  bool multi_visual = true;  // false: OpenFace stream only
  bool ptmfim = true;        // false: personality embedding concatenated with f*

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

/// Every dimension, switch and hyperparameter of one run. The key names of
/// to_kv()/set() are the field names below and double as config-file keys.
struct ModelConfig {
  io::StreamDims dims;
  std::size_t personality_dim = 64;

  std::size_t audio_hidden = 16;
  std::size_t visual_hidden = 16;
  std::size_t lld_proj = 8;
  std::size_t mfcc_proj = 8;
  std::size_t wav2vec_proj = 16;
  bool coatt_sigmoid = false;
  std::size_t asp_dim = 16;
  double asp_eps = 1e-5;

  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t ffn_dim = 128;

  std::size_t d_h = 64;
  std::size_t n_p = 4;
  std::size_t ptmfim_heads = 1;
  bool bca_personality_queries = true;
  bool classifier_concat_fused = false;

  io::Task task = io::Task::kBinary;
  double dropout = 0.1;
  AblationFlags ablation;
  std::uint64_t seed = 0;

  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  double val_fraction = 0.2;

  std::size_t n_classes() const { return io::num_classes(task); }

  void validate() const;

  std::vector<std::pair<std::string, std::string>> to_kv() const;
  // Throws ValidationError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);

  std::string to_text() const;  // "key = value" lines
};

/// Flat "key = value" document; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_kv_file(const std::filesystem::path& path);
void apply_kv_file(ModelConfig& cfg, const std::filesystem::path& path);
void write_config_file(const ModelConfig& cfg, const std::filesystem::path& path);

}  // namespace ptmf
