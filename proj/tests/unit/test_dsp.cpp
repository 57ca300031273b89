#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ptmf/dsp.hpp"
#include "ptmf/errors.hpp"

using namespace ptmf;
using namespace ptmf::dsp;

namespace {

constexpr double kPi = std::numbers::pi;

Waveform sine(double freq, double amp, std::size_t n, int sr = 16000) {
  Waveform w;
  w.sample_rate = sr;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2 * kPi * freq * i / sr);
  return w;
}

Waveform noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Waveform w;
  w.samples.resize(n);
  for (auto& s : w.samples) s = d(rng);
  return w;
}

FrameConfig rect(std::size_t len, std::size_t hop) { return {len, hop, Window::kRectangular}; }

}  // namespace

TEST(Dsp, FrameCount) {
  EXPECT_EQ(frame_signal(noise(400, 1), {400, 160}).rows, 1u);
  EXPECT_EQ(frame_signal(noise(720, 1), {400, 160}).rows, 3u);
  EXPECT_THROW(frame_signal(noise(399, 1), {400, 160}), ValidationError);
  EXPECT_THROW(FrameConfig({400, 401}).validate(), ValidationError);
}

TEST(Dsp, RectangularFramesAreRawSlices) {
  const Waveform w = noise(1000, 2);
  const FeatureMatrix f = frame_signal(w, rect(300, 120));
  for (std::size_t t = 0; t < f.rows; ++t)
    for (std::size_t i = 0; i < 300; ++i) ASSERT_EQ(f(t, i), w.samples[t * 120 + i]);
}

TEST(Dsp, WindowShapes) {
  const auto hamming = window_coefficients(Window::kHamming, 5);
  EXPECT_NEAR(hamming.front(), 0.08, 1e-15);
  EXPECT_NEAR(hamming[2], 1.0, 1e-15);
  EXPECT_NEAR(hamming.back(), 0.08, 1e-15);
  const auto hann = window_coefficients(Window::kHann, 5);
  EXPECT_NEAR(hann.front(), 0.0, 1e-15);
  EXPECT_NEAR(hann[2], 1.0, 1e-15);
}

TEST(Dsp, PreEmphasisPassesFirstSample) {
  const std::vector<double> x = {0.5, 1.0, -1.0};
  const auto y = pre_emphasis(x);
  EXPECT_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], 1.0 - 0.97 * 0.5);
  EXPECT_DOUBLE_EQ(y[2], -1.0 - 0.97);
}

TEST(Dsp, FftMatchesNaiveDft) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  for (std::size_t n : {1u, 2u, 8u, 64u, 512u}) {
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {d(rng), d(rng)};
    auto X = x;
    fft_inplace(X);
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> ref = 0.0;
      for (std::size_t j = 0; j < n; ++j) ref += x[j] * std::polar(1.0, -2 * kPi * double(k * j % n) / n);
      EXPECT_NEAR(std::abs(X[k] - ref), 0.0, 1e-9 * std::sqrt(double(n))) << n << " " << k;
    }
  }
  std::vector<std::complex<double>> bad(6);
  EXPECT_THROW(fft_inplace(bad), ValidationError);
}

TEST(Dsp, DctIsOrthonormal) {
  for (std::size_t n : {4u, 13u, 26u}) {
    const FeatureMatrix m = dct2_matrix(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += m(k, i) * m(k, j);
        EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-10);
      }
  }
}

TEST(Dsp, FilterbankRowsNonNegativeContiguous) {
  const FeatureMatrix fb = mel_filterbank(26, 512, 16000, 0.0, 8000.0);
  ASSERT_EQ(fb.rows, 26u);
  ASSERT_EQ(fb.cols, 257u);
  for (std::size_t m = 0; m < fb.rows; ++m) {
    std::size_t first = fb.cols, last = 0, nonzero = 0;
    for (std::size_t k = 0; k < fb.cols; ++k) {
      ASSERT_GE(fb(m, k), 0.0);
      ASSERT_LE(fb(m, k), 1.0);
      if (fb(m, k) > 0) {
        first = std::min(first, k);
        last = k;
        ++nonzero;
      }
    }
    ASSERT_GT(nonzero, 0u) << "empty filter " << m;
    EXPECT_EQ(nonzero, last - first + 1) << "filter " << m << " has a gap";
  }
}

TEST(Dsp, EnergyAndZcrAnalyticCases) {
  const FeatureMatrix silent(3, 400, 0.0);
  for (double v : short_term_energy(silent).values) EXPECT_EQ(v, 0.0);
  for (double v : zero_crossing_rate(silent).values) EXPECT_EQ(v, 0.0);

  const FeatureMatrix ones(1, 400, 1.0);
  EXPECT_DOUBLE_EQ(short_term_energy(ones)(0, 0), 1.0);

  FeatureMatrix alt(1, 400);
  for (std::size_t i = 0; i < 400; ++i) alt(0, i) = i % 2 ? -1.0 : 1.0;
  EXPECT_DOUBLE_EQ(zero_crossing_rate(alt)(0, 0), 1.0);

  const FeatureMatrix s = frame_signal(sine(440, 0.5, 16000), rect(16000, 16000));
  EXPECT_NEAR(short_term_energy(s)(0, 0), 0.125, 0.125 * 0.01);
}

TEST(Dsp, ZcrMatchesSignChangeCount) {
  const Waveform w = sine(100, 0.8, 400);
  const FeatureMatrix f = frame_signal(w, rect(400, 400));
  int changes = 0;
  for (std::size_t i = 1; i < 400; ++i) changes += (w.samples[i] >= 0) != (w.samples[i - 1] >= 0);
  EXPECT_DOUBLE_EQ(zero_crossing_rate(f)(0, 0), changes / 399.0);
}

TEST(Dsp, ScalingMultipliesEnergyAndKeepsZcr) {
  Waveform w = noise(2000, 4);
  const FeatureMatrix a = extract_lld_bundle(w, {400, 160});
  const double s = 0.25;  // power of two keeps the products exact
  for (auto& x : w.samples) x *= s;
  const FeatureMatrix b = extract_lld_bundle(w, {400, 160});
  for (std::size_t t = 0; t < a.rows; ++t) {
    EXPECT_EQ(b(t, 0), a(t, 0) * s * s);
    EXPECT_EQ(b(t, 1), a(t, 1));
  }
}

TEST(Dsp, LldBundleColumnsMatchSingleFeatures) {
  const Waveform w = noise(3000, 5);
  const FrameConfig cfg{400, 160, Window::kHamming};
  const FeatureMatrix bundle = extract_lld_bundle(w, cfg);
  const FeatureMatrix e = short_term_energy(frame_signal(w, cfg));
  const FeatureMatrix z = zero_crossing_rate(frame_signal(w, rect(400, 160)));
  ASSERT_EQ(bundle.rows, frame_signal(w, cfg).rows);
  for (std::size_t t = 0; t < bundle.rows; ++t) {
    EXPECT_EQ(bundle(t, 0), e(t, 0));
    EXPECT_EQ(bundle(t, 1), z(t, 0));
  }
  const Waveform silence{std::vector<double>(1600, 0.0), 16000};
  for (double v : extract_lld_bundle(silence, cfg).values) EXPECT_EQ(v, 0.0);
}

TEST(Dsp, SilenceMfccIsConstantDct) {
  const Waveform w{std::vector<double>(4000, 0.0), 16000};
  const MelConfig mel;
  const FeatureMatrix m = mfcc(w, {}, mel);
  ASSERT_EQ(m.cols, 13u);
  for (std::size_t t = 0; t < m.rows; ++t) {
    EXPECT_NEAR(m(t, 0), std::log(1e-10) * std::sqrt(26.0), 1e-9);
    for (std::size_t c = 1; c < m.cols; ++c) EXPECT_NEAR(m(t, c), 0.0, 1e-9);
  }
}

TEST(Dsp, SinePeaksInContainingFilter) {
  const Waveform w = sine(1000, 0.5, 400);
  const auto frames = frame_signal(Waveform{pre_emphasis(w.samples), 16000}, {});
  const auto mag = magnitude_spectrum(frames.row(0), 512);
  const FeatureMatrix fb = mel_filterbank(26, 512, 16000, 0, 8000);
  std::size_t best = 0;
  double best_e = -1, best_w = -1;
  std::size_t containing = 0;
  const std::size_t bin_1k = static_cast<std::size_t>(std::lround(1000.0 * 512 / 16000));
  for (std::size_t m = 0; m < 26; ++m) {
    double e = 0;
    for (std::size_t k = 0; k < mag.size(); ++k) e += fb(m, k) * mag[k];
    if (e > best_e) best_e = e, best = m;
    if (fb(m, bin_1k) > best_w) best_w = fb(m, bin_1k), containing = m;
  }
  EXPECT_EQ(best, containing);
}

TEST(Dsp, MfccMatchesReferencePipeline) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Waveform w = noise(8000, 100 + seed);
    const FeatureMatrix got = mfcc(w, {}, {});
    const oracle::Mat want = oracle::mfcc(w.samples, {});
    ASSERT_EQ(got.rows, want.size());
    for (std::size_t t = 0; t < got.rows; ++t)
      for (std::size_t c = 0; c < got.cols; ++c) ASSERT_NEAR(got(t, c), want[t][c], 1e-5);
  }
}

TEST(Dsp, MfccIgnoresTrailingSamplesShortOfAFrame) {
  Waveform w = noise(720, 6);  // exactly 3 frames
  const FeatureMatrix a = mfcc(w, {}, {});
  w.samples.resize(720 + 159, 0.3);
  const FeatureMatrix b = mfcc(w, {}, {});
  EXPECT_EQ(a, b);
}

TEST(Dsp, ConfigValidation) {
  const Waveform w = noise(1000, 7);
  MelConfig bad;
  bad.n_fft = 300;
  EXPECT_THROW(mfcc(w, {}, bad), ValidationError);
  bad = {};
  bad.n_mfcc = 30;
  EXPECT_THROW(mfcc(w, {}, bad), ValidationError);
  bad = {};
  bad.fmax = 9000;
  EXPECT_THROW(mfcc(w, {}, bad), ValidationError);
  Waveform slow = w;
  slow.sample_rate = 4000;
  EXPECT_THROW(slow.validate(), ValidationError);
  EXPECT_THROW(Waveform{}.validate(), ValidationError);
}

TEST(Dsp, WavRoundTrip) {
  fixture::TempDir dir;
  Waveform w = noise(1234, 8);
  for (auto& s : w.samples) s = std::round(s * 32767.0) / 32767.0;
  write_wav(dir / "a.wav", w);
  const Waveform r = read_wav(dir / "a.wav");
  EXPECT_EQ(r.sample_rate, 16000);
  ASSERT_EQ(r.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) EXPECT_NEAR(r.samples[i], w.samples[i], 1.0 / 32767.0);
  write_wav(dir / "b.wav", r);
  EXPECT_EQ(read_wav(dir / "b.wav").samples, r.samples);
  EXPECT_THROW(read_wav(dir / "missing.wav"), IoError);
  std::ofstream(dir / "junk.wav") << "not a riff file";
  EXPECT_THROW(read_wav(dir / "junk.wav"), IoError);
}
