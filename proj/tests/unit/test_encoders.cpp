#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ptmf/encoders.hpp"
#include "ptmf/errors.hpp"

using namespace ptmf;
using namespace ptmf::nn;

namespace {

void fill(Tensor& t, double v) { std::fill(t.mutable_data().begin(), t.mutable_data().end(), v); }

void set(Tensor& t, std::initializer_list<double> values) {
  ASSERT_EQ(values.size(), t.numel());
  std::copy(values.begin(), values.end(), t.mutable_data().begin());
}

oracle::LstmWeights weights_of(const Lstm& l) {
  oracle::LstmWeights w;
  const Tensor* W[] = {&l.W_i, &l.W_f, &l.W_o, &l.W_g};
  const Tensor* U[] = {&l.U_i, &l.U_f, &l.U_o, &l.U_g};
  const Tensor* b[] = {&l.b_i, &l.b_f, &l.b_o, &l.b_g};
  for (int g = 0; g < 4; ++g) {
    w.W[g] = fixture::to_mat(*W[g]);
    w.U[g] = fixture::to_mat(*U[g]);
    w.b[g] = fixture::to_vec(*b[g]);
  }
  return w;
}

}  // namespace

TEST(Lstm, ShapesAndInit) {
  ParamStore store;
  Rng rng(1);
  Lstm l(store, "enc.lld.lstm", 3, 5, rng);
  EXPECT_EQ(l.W_i.shape(), (Shape{5, 3}));
  EXPECT_EQ(l.U_g.shape(), (Shape{5, 5}));
  EXPECT_EQ(store.size(), 12u);
  for (double v : l.b_f.data()) EXPECT_EQ(v, 1.0);
  for (double v : l.b_i.data()) EXPECT_EQ(v, 0.0);
  for (double v : l.W_o.data()) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(5.0));
  EXPECT_NE(store.find("enc.lld.lstm.b_f"), nullptr);
}

TEST(Lstm, ZeroFixedPoint) {
  ParamStore store;
  Rng rng(2);
  Lstm l(store, "l", 3, 4, rng);
  for (auto& p : store.params()) fill(p.tensor, 0.0);
  const Tensor h = l.encode(Tensor::zeros({6, 3}));
  for (double v : h.data()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, HandEvaluatedCell) {
  ParamStore store;
  Rng rng(3);
  Lstm l(store, "l", 2, 2, rng);
  set(l.W_i, {0.1, 0.2, -0.3, 0.4});
  set(l.W_f, {0.5, -0.1, 0.2, 0.3});
  set(l.W_o, {-0.2, 0.6, 0.1, -0.4});
  set(l.W_g, {0.7, 0.1, -0.5, 0.2});
  set(l.b_i, {0.05, -0.05});
  set(l.b_f, {1.0, 1.0});
  set(l.b_o, {0.0, 0.1});
  set(l.b_g, {-0.1, 0.0});
  const double x0 = 0.8, x1 = -0.6;
  const Tensor h = l.encode(Tensor::from({1, 2}, {x0, x1}));
  // h_prev = c_prev = 0, so U does not enter and f does not matter.
  auto sig = [](double z) { return 1 / (1 + std::exp(-z)); };
  const double i0 = sig(0.1 * x0 + 0.2 * x1 + 0.05), i1 = sig(-0.3 * x0 + 0.4 * x1 - 0.05);
  const double o0 = sig(-0.2 * x0 + 0.6 * x1), o1 = sig(0.1 * x0 - 0.4 * x1 + 0.1);
  const double g0 = std::tanh(0.7 * x0 + 0.1 * x1 - 0.1), g1 = std::tanh(-0.5 * x0 + 0.2 * x1);
  EXPECT_NEAR(h.at(0, 0), o0 * std::tanh(i0 * g0), 1e-15);
  EXPECT_NEAR(h.at(0, 1), o1 * std::tanh(i1 * g1), 1e-15);
}

TEST(Lstm, MatchesLoopOracleAndStaysBounded) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ParamStore store;
    Rng rng(seed);
    Lstm l(store, "l", 3, 4, rng);
    for (auto& p : store.params()) {
      for (double& v : p.tensor.mutable_data()) v = std::uniform_real_distribution<double>(-3, 3)(rng);
    }
    const Tensor x = fixture::random_tensor({7, 3}, rng, -5, 5);
    const Tensor h = l.encode(x);
    const oracle::Mat want = oracle::lstm(fixture::to_mat(x), weights_of(l));
    for (std::size_t t = 0; t < 7; ++t)
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_NEAR(h.at(t, j), want[t][j], 1e-13);
        EXPECT_LT(std::abs(h.at(t, j)), 1.0);
      }
  }
}

TEST(Lstm, DimensionMismatch) {
  ParamStore store;
  Rng rng(4);
  Lstm l(store, "l", 3, 4, rng);
  EXPECT_THROW(l.encode(Tensor::zeros({5, 2})), DimensionError);
}

TEST(Lstm, Gradcheck) {
  ParamStore store;
  Rng rng(5);
  Lstm l(store, "l", 3, 4, rng);
  const Tensor x = fixture::random_tensor({5, 3}, rng);
  const Tensor r = fixture::random_tensor({5, 4}, rng);
  const auto report = grad_check([&] { return sum(mul(l.encode(x), r)); }, store.params());
  EXPECT_TRUE(report.passed()) << report.max_rel_error();
}

TEST(Asp, MatchesLoopOracle) {
  ParamStore store;
  Rng rng(6);
  Asp asp(store, "a", 4, 3, 1e-5, rng);
  for (double& v : asp.b.mutable_data()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  const Tensor h = fixture::random_tensor({7, 4}, rng, -2, 2);
  Tensor w;
  const Tensor out = asp.pool(h, &w);
  std::vector<double> alpha;
  const auto want = oracle::asp(fixture::to_mat(h), fixture::to_mat(asp.W), fixture::to_vec(asp.b),
                                fixture::to_vec(asp.v), 1e-5, &alpha);
  ASSERT_EQ(out.shape(), (Shape{1, 8}));
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(out[j], want[j], 1e-13);
  for (std::size_t t = 0; t < 7; ++t) EXPECT_NEAR(w[t], alpha[t], 1e-14);
}

TEST(Asp, ConstantSequenceAndSingleFrame) {
  ParamStore store;
  Rng rng(7);
  const double eps = 1e-5;
  Asp asp(store, "a", 3, 4, eps, rng);
  const Tensor constant = Tensor::from({5, 3}, {0.3, -1.2, 2.0, 0.3, -1.2, 2.0, 0.3, -1.2, 2.0,
                                                0.3, -1.2, 2.0, 0.3, -1.2, 2.0});
  const Tensor a = asp.pool(constant);
  const double u[] = {0.3, -1.2, 2.0};
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(a[j], u[j], 1e-15);
    EXPECT_NEAR(a[3 + j], std::sqrt(eps), 1e-12);
  }
  const Tensor one = Tensor::from({1, 3}, {0.7, 0.1, -0.4});
  const Tensor b = asp.pool(one);
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(b[j], one[j]);
    EXPECT_EQ(b[3 + j], std::sqrt(eps));
  }
}

TEST(Asp, WeightsStochasticMeanInHullStdFloored) {
  ParamStore store;
  Rng rng(8);
  const double eps = 1e-5;
  Asp asp(store, "a", 4, 5, eps, rng);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = 1 + trial % 13;
    const Tensor h = fixture::random_tensor({T, 4}, rng, -3, 3);
    Tensor w;
    const Tensor out = asp.pool(h, &w);
    double total = 0;
    for (double a : w.data()) {
      EXPECT_GT(a, 0.0);
      total += a;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    for (std::size_t j = 0; j < 4; ++j) {
      double lo = 1e9, hi = -1e9;
      for (std::size_t t = 0; t < T; ++t) lo = std::min(lo, h.at(t, j)), hi = std::max(hi, h.at(t, j));
      EXPECT_GE(out[j], lo - 1e-12);
      EXPECT_LE(out[j], hi + 1e-12);
      EXPECT_GE(out[4 + j], std::sqrt(eps));
    }
  }
}

TEST(Asp, EqualScoresMakePoolingPermutationInvariant) {
  ParamStore store;
  Rng rng(9);
  Asp asp(store, "a", 3, 2, 1e-5, rng);
  fill(asp.v, 0.0);  // every score 0, uniform weights
  const Tensor h = fixture::random_tensor({4, 3}, rng);
  const Tensor perm = concat({slice(h, 0, 2, 4), slice(h, 0, 0, 2)}, 0);
  const Tensor a = asp.pool(h), b = asp.pool(perm);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(a[j], b[j], 1e-15);
}

TEST(Asp, Gradcheck) {
  ParamStore store;
  Rng rng(10);
  Asp asp(store, "a", 4, 3, 1e-5, rng);
  const Tensor h = fixture::random_tensor({6, 4}, rng);
  const Tensor r = fixture::random_tensor({1, 8}, rng);
  const auto report = grad_check([&] { return sum(mul(asp.pool(h), r)); }, store.params());
  EXPECT_TRUE(report.passed()) << report.max_rel_error();
}

TEST(Asp, RejectsBadEpsAndWidth) {
  ParamStore store;
  Rng rng(11);
  EXPECT_THROW(Asp(store, "a", 4, 3, 0.0, rng), ValidationError);
  Asp asp(store, "b", 4, 3, 1e-5, rng);
  EXPECT_THROW(asp.pool(Tensor::zeros({3, 5})), DimensionError);
}
