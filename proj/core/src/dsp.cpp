#include "ptmf/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "ptmf/errors.hpp"

namespace ptmf::dsp {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

void Waveform::validate() const {
  if (samples.empty()) throw ValidationError("waveform is empty");
  if (sample_rate < 8000) {
    throw ValidationError("sample rate " + std::to_string(sample_rate) + " Hz is below 8000 Hz");
  }
}

void FrameConfig::validate() const {
  if (frame_len == 0 || hop_len == 0 || hop_len > frame_len) {
    throw ValidationError("frame config requires 0 < hop_len <= frame_len (got frame " +
                          std::to_string(frame_len) + ", hop " + std::to_string(hop_len) + ")");
  }
}

FrameConfig FrameConfig::from_ms(double frame_ms, double hop_ms, int sample_rate, Window window) {
  FrameConfig cfg;
  cfg.frame_len = static_cast<std::size_t>(std::lround(frame_ms * sample_rate / 1000.0));
  cfg.hop_len = static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0));
  cfg.window = window;
  cfg.validate();
  return cfg;
}

void MelConfig::validate(const FrameConfig& frames, int sample_rate) const {
  if (!is_power_of_two(n_fft) || n_fft < frames.frame_len) {
    throw ValidationError("n_fft " + std::to_string(n_fft) +
                          " must be a power of two >= frame_len " +
                          std::to_string(frames.frame_len));
  }
  if (n_mels == 0 || n_mfcc == 0 || n_mfcc > n_mels) {
    throw ValidationError("mel config requires 0 < n_mfcc <= n_mels");
  }
  const double top = resolved_fmax(sample_rate);
  if (!(fmin >= 0.0 && fmin < top && top <= sample_rate / 2.0)) {
    throw ValidationError("mel config requires 0 <= fmin < fmax <= sample_rate/2");
  }
  if (!(log_floor > 0.0)) throw ValidationError("log_floor must be positive");
}

std::vector<double> window_coefficients(Window window, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (window == Window::kRectangular || n == 1) return w;
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
    w[i] = window == Window::kHamming ? 0.54 - 0.46 * c : 0.5 - 0.5 * c;
  }
  return w;
}

std::vector<double> pre_emphasis(std::span<const double> samples, double coef) {
  std::vector<double> out(samples.size());
  if (samples.empty()) return out;
  out[0] = samples[0];
  for (std::size_t i = 1; i < samples.size(); ++i) out[i] = samples[i] - coef * samples[i - 1];
  return out;
}

void fft_inplace(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) throw ValidationError("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, angle * static_cast<double>(k));
        const std::complex<double> u = x[start + k];
        const std::complex<double> v = x[start + k + len / 2] * w;
        x[start + k] = u + v;
        x[start + k + len / 2] = u - v;
      }
    }
  }
}

std::vector<double> magnitude_spectrum(std::span<const double> frame, std::size_t n_fft) {
  if (frame.size() > n_fft) throw ValidationError("frame longer than n_fft");
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
  fft_inplace(buf);
  std::vector<double> mag(n_fft / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(buf[k]);
  return mag;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

FeatureMatrix mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate, double fmin,
                             double fmax) {
  const std::size_t n_bins = n_fft / 2 + 1;
  const double mlo = hz_to_mel(fmin);
  const double mhi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  FeatureMatrix fb(n_mels, n_bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      const double rising = (f - lo) / (center - lo);
      const double falling = (hi - f) / (hi - center);
      fb(m, k) = std::max(0.0, std::min(rising, falling));
    }
  }
  return fb;
}

FeatureMatrix dct2_matrix(std::size_t n) {
  FeatureMatrix m(n, n);
  const double nd = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / nd) : std::sqrt(2.0 / nd);
    for (std::size_t i = 0; i < n; ++i) {
      m(k, i) = s * std::cos(std::numbers::pi * static_cast<double>(k) *
                             (2.0 * static_cast<double>(i) + 1.0) / (2.0 * nd));
    }
  }
  return m;
}

FeatureMatrix frame_signal(const Waveform& w, const FrameConfig& cfg) {
  w.validate();
  cfg.validate();
  if (w.samples.size() < cfg.frame_len) {
    throw ValidationError("signal of " + std::to_string(w.samples.size()) +
                          " samples is shorter than one frame (" + std::to_string(cfg.frame_len) + ")");
  }
  const std::size_t t = 1 + (w.samples.size() - cfg.frame_len) / cfg.hop_len;
  const auto win = window_coefficients(cfg.window, cfg.frame_len);
  FeatureMatrix frames(t, cfg.frame_len);
  for (std::size_t f = 0; f < t; ++f) {
    const double* src = w.samples.data() + f * cfg.hop_len;
    auto dst = frames.row(f);
    for (std::size_t i = 0; i < cfg.frame_len; ++i) dst[i] = src[i] * win[i];
  }
  return frames;
}

FeatureMatrix short_term_energy(const FeatureMatrix& frames) {
  FeatureMatrix out(frames.rows, 1);
  for (std::size_t f = 0; f < frames.rows; ++f) {
    double acc = 0.0;
    for (double v : frames.row(f)) acc += v * v;
    out(f, 0) = acc / static_cast<double>(frames.cols);
  }
  return out;
}

FeatureMatrix zero_crossing_rate(const FeatureMatrix& frames) {
  FeatureMatrix out(frames.rows, 1);
  if (frames.cols < 2) return out;
  for (std::size_t f = 0; f < frames.rows; ++f) {
    const auto r = frames.row(f);
    std::size_t crossings = 0;
    for (std::size_t i = 1; i < r.size(); ++i) crossings += (r[i] >= 0.0) != (r[i - 1] >= 0.0);
    out(f, 0) = static_cast<double>(crossings) / static_cast<double>(frames.cols - 1);
  }
  return out;
}

FeatureMatrix mfcc(const Waveform& w, const FrameConfig& fcfg, const MelConfig& mcfg) {
  w.validate();
  fcfg.validate();
  mcfg.validate(fcfg, w.sample_rate);
  Waveform emphasized{pre_emphasis(w.samples), w.sample_rate};
  const FeatureMatrix frames = frame_signal(emphasized, fcfg);
  const FeatureMatrix fb =
      mel_filterbank(mcfg.n_mels, mcfg.n_fft, w.sample_rate, mcfg.fmin, mcfg.resolved_fmax(w.sample_rate));
  const FeatureMatrix dct = dct2_matrix(mcfg.n_mels);

  FeatureMatrix out(frames.rows, mcfg.n_mfcc);
  std::vector<double> log_mel(mcfg.n_mels);
  for (std::size_t f = 0; f < frames.rows; ++f) {
    const auto mag = magnitude_spectrum(frames.row(f), mcfg.n_fft);
    for (std::size_t m = 0; m < mcfg.n_mels; ++m) {
      double e = 0.0;
      const auto weights = fb.row(m);
      for (std::size_t k = 0; k < mag.size(); ++k) e += weights[k] * mag[k];
      log_mel[m] = std::log(std::max(e, mcfg.log_floor));
    }
    for (std::size_t c = 0; c < mcfg.n_mfcc; ++c) {
      const auto basis = dct.row(c);
      double acc = 0.0;
      for (std::size_t m = 0; m < mcfg.n_mels; ++m) acc += basis[m] * log_mel[m];
      out(f, c) = acc;
    }
  }
  return out;
}

FeatureMatrix extract_lld_bundle(const Waveform& w, const FrameConfig& fcfg) {
  const FeatureMatrix energy = short_term_energy(frame_signal(w, fcfg));
  FrameConfig raw = fcfg;
  raw.window = Window::kRectangular;
  const FeatureMatrix zcr = zero_crossing_rate(frame_signal(w, raw));
  FeatureMatrix out(energy.rows, 2);
  for (std::size_t t = 0; t < energy.rows; ++t) {
    out(t, 0) = energy(t, 0);
    out(t, 1) = zcr(t, 0);
  }
  return out;
}

// ---- WAV ------------------------------------------------------------------

namespace {

template <typename T>
T read_le(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw FormatError("wav " + path.string() + ": truncated");
  }
  return v;
}

template <typename T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open wav file: " + path.string());
  char tag[4];
  if (!is.read(tag, 4) || std::memcmp(tag, "RIFF", 4) != 0) {
    throw FormatError("wav " + path.string() + ": missing RIFF header");
  }
  read_le<std::uint32_t>(is, path);
  if (!is.read(tag, 4) || std::memcmp(tag, "WAVE", 4) != 0) {
    throw FormatError("wav " + path.string() + ": not a WAVE file");
  }
  Waveform w;
  bool have_fmt = false;
  while (is.read(tag, 4)) {
    const auto size = read_le<std::uint32_t>(is, path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const auto format = read_le<std::uint16_t>(is, path);
      const auto channels = read_le<std::uint16_t>(is, path);
      w.sample_rate = static_cast<int>(read_le<std::uint32_t>(is, path));
      read_le<std::uint32_t>(is, path);  // byte rate
      read_le<std::uint16_t>(is, path);  // block align
      const auto bits = read_le<std::uint16_t>(is, path);
      if (format != 1 || channels != 1 || bits != 16) {
        throw FormatError("wav " + path.string() + ": only 16-bit PCM mono is supported");
      }
      is.ignore(static_cast<std::streamsize>(size - 16 + (size & 1)));
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("wav " + path.string() + ": data chunk before fmt chunk");
      const std::size_t n = size / 2;
      w.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        w.samples[i] = static_cast<double>(read_le<std::int16_t>(is, path)) / 32768.0;
      }
      w.validate();
      return w;
    } else {
      is.ignore(static_cast<std::streamsize>(size + (size & 1)));
    }
  }
  throw FormatError("wav " + path.string() + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open wav file for writing: " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  os.write("RIFF", 4);
  write_le<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_le<std::uint32_t>(os, 16);
  write_le<std::uint16_t>(os, 1);
  write_le<std::uint16_t>(os, 1);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate) * 2);
  write_le<std::uint16_t>(os, 2);
  write_le<std::uint16_t>(os, 16);
  os.write("data", 4);
  write_le<std::uint32_t>(os, data_bytes);
  for (double s : w.samples) {
    const double clamped = std::clamp(s, -1.0, 32767.0 / 32768.0);
    write_le<std::int16_t>(os, static_cast<std::int16_t>(std::lround(clamped * 32768.0)));
  }
  if (!os) throw IoError("failed writing wav file: " + path.string());
}

}  // namespace ptmf::dsp
