#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "ptmf/feature_matrix.hpp"

namespace ptmf::dsp {

struct Waveform {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  int sample_rate = 16000;

  void validate() const;
};

enum class Window { kHamming, kHann, kRectangular };

struct FrameConfig {
  std::size_t frame_len = 400;  // 25 ms at 16 kHz
  std::size_t hop_len = 160;    // 10 ms at 16 kHz
  Window window = Window::kHamming;

  void validate() const;
  static FrameConfig from_ms(double frame_ms, double hop_ms, int sample_rate,
                             Window window = Window::kHamming);
};

struct MelConfig {
  std::size_t n_fft = 512;
  std::size_t n_mels = 26;
  std::size_t n_mfcc = 13;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 selects sample_rate / 2
  double log_floor = 1e-10;

  double resolved_fmax(int sample_rate) const { return fmax > 0.0 ? fmax : sample_rate / 2.0; }
  void validate(const FrameConfig& frames, int sample_rate) const;
};

inline constexpr double kPreEmphasis = 0.97;

std::vector<double> window_coefficients(Window window, std::size_t n);
std::vector<double> pre_emphasis(std::span<const double> samples, double coef = kPreEmphasis);

// Radix-2 in-place FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& x);
// |X_k| for k = 0..n_fft/2 of the zero-padded frame.
std::vector<double> magnitude_spectrum(std::span<const double> frame, std::size_t n_fft);

double hz_to_mel(double hz);  // HTK: 2595 log10(1 + f/700)
double mel_to_hz(double mel);
// n_mels x (n_fft/2 + 1) triangular filters on the HTK mel scale.
FeatureMatrix mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate, double fmin,
                             double fmax);
// Orthonormal DCT-II, row k = basis function k.
FeatureMatrix dct2_matrix(std::size_t n);

FeatureMatrix frame_signal(const Waveform& w, const FrameConfig& cfg);
FeatureMatrix short_term_energy(const FeatureMatrix& frames);
FeatureMatrix zero_crossing_rate(const FeatureMatrix& frames);
FeatureMatrix mfcc(const Waveform& w, const FrameConfig& fcfg, const MelConfig& mcfg);
// Column 0 energy on windowed frames, column 1 ZCR on raw frames.
FeatureMatrix extract_lld_bundle(const Waveform& w, const FrameConfig& fcfg);

// 16-bit PCM mono RIFF/WAVE.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace ptmf::dsp
