#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "ptmf/config.hpp"
#include "ptmf/tensor.hpp"
#include "oracles.hpp"

namespace fixture {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "ptmf") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

// Small network that still exercises every submodule.
inline ptmf::ModelConfig tiny_config(std::uint64_t seed = 0) {
  ptmf::ModelConfig cfg;
  cfg.dims = {2, 4, 6, 3, 4, 4};
  cfg.personality_dim = 8;
  cfg.audio_hidden = 6;
  cfg.visual_hidden = 6;
  cfg.lld_proj = 3;
  cfg.mfcc_proj = 3;
  cfg.wav2vec_proj = 4;
  cfg.asp_dim = 4;
  cfg.d_model = 8;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.ffn_dim = 16;
  cfg.d_h = 8;
  cfg.n_p = 2;
  cfg.seed = seed;
  return cfg;
}

inline ptmf::Tensor random_tensor(ptmf::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0, bool requires_grad = false) {
  return ptmf::Tensor::uniform(std::move(shape), lo, hi, rng, requires_grad);
}

inline oracle::Mat to_mat(const ptmf::Tensor& t) {
  oracle::Mat m = oracle::zeros(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.at(i, j);
  return m;
}

inline std::vector<double> to_vec(const ptmf::Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

}  // namespace fixture
