#pragma once

// Second implementations used as test oracles. Everything here is written
// with plain loops over std::vector and shares no code with ptmf_core
// beyond the public data types.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat out = zeros(a.size(), b.empty() ? 0 : b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline Mat transpose(const Mat& a) {
  Mat out = zeros(a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) out[j][i] = a[i][j];
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Single-head scaled dot-product attention, explicit softmax per row.
inline Mat attention(const Mat& q, const Mat& k, const Mat& v, Mat* weights = nullptr) {
  const double d = static_cast<double>(q[0].size());
  Mat w = zeros(q.size(), k.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    double mx = -1e300;
    for (std::size_t j = 0; j < k.size(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < q[0].size(); ++c) s += q[i][c] * k[j][c];
      w[i][j] = s / std::sqrt(d);
      mx = std::max(mx, w[i][j]);
    }
    double z = 0.0;
    for (auto& x : w[i]) z += (x = std::exp(x - mx));
    for (auto& x : w[i]) x /= z;
  }
  if (weights) *weights = w;
  return matmul(w, v);
}

// Attentive statistics pooling. W: A x H, b: A, v: A.
inline std::vector<double> asp(const Mat& h, const Mat& W, const std::vector<double>& b,
                               const std::vector<double>& v, double eps,
                               std::vector<double>* alpha_out = nullptr) {
  const std::size_t T = h.size(), H = h[0].size(), A = W.size();
  std::vector<double> e(T);
  for (std::size_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      double z = b[a];
      for (std::size_t j = 0; j < H; ++j) z += W[a][j] * h[t][j];
      s += v[a] * std::tanh(z);
    }
    e[t] = s;
  }
  const double mx = *std::max_element(e.begin(), e.end());
  double zsum = 0.0;
  std::vector<double> alpha(T);
  for (std::size_t t = 0; t < T; ++t) zsum += (alpha[t] = std::exp(e[t] - mx));
  for (auto& a : alpha) a /= zsum;
  std::vector<double> out(2 * H, 0.0);
  for (std::size_t j = 0; j < H; ++j) {
    double mu = 0.0, sq = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      mu += alpha[t] * h[t][j];
      sq += alpha[t] * h[t][j] * h[t][j];
    }
    out[j] = mu;
    out[H + j] = std::sqrt(std::max(sq - mu * mu, 0.0) + eps);
  }
  if (alpha_out) *alpha_out = alpha;
  return out;
}

// One LSTM step with H x D / H x H matrices, gates i f o g.
struct LstmWeights {
  Mat W[4], U[4];
  std::vector<double> b[4];
};

inline Mat lstm(const Mat& x, const LstmWeights& p) {
  const std::size_t H = p.W[0].size();
  std::vector<double> h(H, 0.0), c(H, 0.0);
  Mat out;
  for (const auto& xt : x) {
    Mat pre = zeros(4, H);
    for (int g = 0; g < 4; ++g) {
      for (std::size_t r = 0; r < H; ++r) {
        double s = p.b[g][r];
        for (std::size_t j = 0; j < xt.size(); ++j) s += p.W[g][r][j] * xt[j];
        for (std::size_t j = 0; j < H; ++j) s += p.U[g][r][j] * h[j];
        pre[g][r] = s;
      }
    }
    for (std::size_t r = 0; r < H; ++r) {
      const double i = sigmoid(pre[0][r]), f = sigmoid(pre[1][r]), o = sigmoid(pre[2][r]);
      const double g = std::tanh(pre[3][r]);
      c[r] = f * c[r] + i * g;
      h[r] = o * std::tanh(c[r]);
    }
    out.push_back(h);
  }
  return out;
}

// ---- metrics --------------------------------------------------------------

struct Metrics {
  double acc_w, acc_u, f1_w, f1_u;
};

inline Metrics metrics(const std::vector<int>& truth, const std::vector<int>& pred, int n_classes) {
  Metrics m{};
  int correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i];
  m.acc_w = static_cast<double>(correct) / static_cast<double>(truth.size());

  double recall_sum = 0.0, f1_sum = 0.0, f1_weighted = 0.0;
  int present = 0;
  for (int c = 0; c < n_classes; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == c && pred[i] == c) ++tp;
      if (truth[i] != c && pred[i] == c) ++fp;
      if (truth[i] == c && pred[i] != c) ++fn;
    }
    const int support = tp + fn;
    if (support == 0) continue;
    ++present;
    const double recall = static_cast<double>(tp) / support;
    const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    const double f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    recall_sum += recall;
    f1_sum += f1;
    f1_weighted += f1 * support;
  }
  m.acc_u = recall_sum / present;
  m.f1_u = f1_sum / present;
  m.f1_w = f1_weighted / static_cast<double>(truth.size());
  return m;
}

// ---- MFCC -------------------------------------------------------------------
// Textbook pipeline: naive O(N^2) DFT, HTK mel triangles built from
// explicit edge frequencies, DCT-II from the cosine sum.

struct MfccParams {
  int sample_rate = 16000;
  std::size_t frame_len = 400;
  std::size_t hop = 160;
  std::size_t n_fft = 512;
  std::size_t n_mels = 26;
  std::size_t n_mfcc = 13;
  double fmin = 0.0;
  double fmax = 8000.0;
  double floor = 1e-10;
  double preemph = 0.97;
};

inline Mat mfcc(const std::vector<double>& signal, const MfccParams& p) {
  std::vector<double> y(signal.size());
  for (std::size_t n = 0; n < signal.size(); ++n) {
    y[n] = n == 0 ? signal[0] : signal[n] - p.preemph * signal[n - 1];
  }
  const std::size_t frames = 1 + (y.size() - p.frame_len) / p.hop;
  const double pi = std::numbers::pi;

  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::vector<double> edge(p.n_mels + 2);
  for (std::size_t i = 0; i < edge.size(); ++i) {
    edge[i] = hz(mel(p.fmin) + (mel(p.fmax) - mel(p.fmin)) * static_cast<double>(i) /
                                   static_cast<double>(p.n_mels + 1));
  }

  Mat out;
  const std::size_t bins = p.n_fft / 2 + 1;
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<double> x(p.n_fft, 0.0);
    for (std::size_t n = 0; n < p.frame_len; ++n) {
      const double w = 0.54 - 0.46 * std::cos(2.0 * pi * static_cast<double>(n) /
                                              static_cast<double>(p.frame_len - 1));
      x[n] = y[t * p.hop + n] * w;
    }
    std::vector<double> mag(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t n = 0; n < p.n_fft; ++n) {
        const double ang = -2.0 * pi * static_cast<double>(k * n % p.n_fft) / static_cast<double>(p.n_fft);
        acc += x[n] * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      mag[k] = std::abs(acc);
    }
    std::vector<double> logmel(p.n_mels);
    for (std::size_t m = 0; m < p.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * p.sample_rate / static_cast<double>(p.n_fft);
        double w = 0.0;
        if (f > edge[m] && f <= edge[m + 1]) w = (f - edge[m]) / (edge[m + 1] - edge[m]);
        else if (f > edge[m + 1] && f < edge[m + 2]) w = (edge[m + 2] - f) / (edge[m + 2] - edge[m + 1]);
        e += w * mag[k];
      }
      logmel[m] = std::log(std::max(e, p.floor));
    }
    std::vector<double> cep(p.n_mfcc);
    const double N = static_cast<double>(p.n_mels);
    for (std::size_t c = 0; c < p.n_mfcc; ++c) {
      double s = 0.0;
      for (std::size_t m = 0; m < p.n_mels; ++m) {
        s += logmel[m] * std::cos(pi * static_cast<double>(c) * (static_cast<double>(m) + 0.5) / N);
      }
      cep[c] = s * (c == 0 ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N));
    }
    out.push_back(cep);
  }
  return out;
}

}  // namespace oracle
