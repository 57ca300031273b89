#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ptmf/errors.hpp"
#include "ptmf/metrics.hpp"
#include "ptmf/train.hpp"

using namespace ptmf;

TEST(Metrics, WorkedExample) {
  const std::vector<int> truth = {0, 0, 0, 1}, pred = {0, 0, 0, 0};
  const MetricsReport m = compute_metrics(truth, pred, 2);
  EXPECT_EQ(m.acc_weighted, 0.75);
  EXPECT_EQ(m.acc_unweighted, 0.5);
  EXPECT_EQ(m.acc_task, 0.625);
  EXPECT_NEAR(m.f1_unweighted, 3.0 / 7.0, 1e-15);
  EXPECT_NEAR(m.f1_weighted, 9.0 / 14.0, 1e-15);
  EXPECT_NEAR(m.f1_task, 0.535714285714, 1e-12);
  EXPECT_EQ(m.confusion, (std::vector<std::vector<std::size_t>>{{3, 0}, {1, 0}}));
  EXPECT_EQ(m.total(), 4u);
}

TEST(Metrics, MatchesLoopOracleOnRandomSets) {
  std::mt19937_64 rng(11);
  for (int n : {2, 3, 5}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t len = 1 + rng() % 40;
      std::vector<int> truth(len), pred(len);
      for (auto& v : truth) v = static_cast<int>(rng() % static_cast<unsigned>(n));
      for (auto& v : pred) v = static_cast<int>(rng() % static_cast<unsigned>(n));
      const auto got = compute_metrics(truth, pred, static_cast<std::size_t>(n));
      const auto want = oracle::metrics(truth, pred, n);
      ASSERT_NEAR(got.acc_weighted, want.acc_w, 1e-12);
      ASSERT_NEAR(got.acc_unweighted, want.acc_u, 1e-12);
      ASSERT_NEAR(got.f1_weighted, want.f1_w, 1e-12);
      ASSERT_NEAR(got.f1_unweighted, want.f1_u, 1e-12);
      // Task scores are plain means with no extra rounding.
      ASSERT_EQ(got.acc_task, (got.acc_weighted + got.acc_unweighted) / 2);
      ASSERT_EQ(got.f1_task, (got.f1_weighted + got.f1_unweighted) / 2);
    }
  }
}

TEST(Metrics, BalancedTruthMakesAccuraciesEqual) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> truth, pred;
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 7; ++k) truth.push_back(c);
    for (std::size_t i = 0; i < truth.size(); ++i) pred.push_back(static_cast<int>(rng() % 3));
    const auto m = compute_metrics(truth, pred, 3);
    EXPECT_NEAR(m.acc_weighted, m.acc_unweighted, 1e-15);
  }
}

TEST(Metrics, PerfectPredictionsAndErrors) {
  const std::vector<int> y = {0, 1, 2, 4, 3, 2};
  const auto m = compute_metrics(y, y, 5);
  for (double v : {m.acc_weighted, m.acc_unweighted, m.f1_weighted, m.f1_unweighted, m.acc_task, m.f1_task})
    EXPECT_EQ(v, 1.0);
  EXPECT_THROW(compute_metrics(std::vector<int>{0, 1}, std::vector<int>{0}, 2), ValidationError);
  EXPECT_THROW(compute_metrics(std::vector<int>{0, 2}, std::vector<int>{0, 1}, 2), ValidationError);
  EXPECT_THROW(compute_metrics(std::vector<int>{0}, std::vector<int>{-1}, 2), ValidationError);
}

TEST(Metrics, AbsentClassSkippedInMacroMeans) {
  // Class 2 never occurs in the truth; predicting it still costs precision.
  const auto m = compute_metrics(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 2, 1, 1}, 3);
  EXPECT_DOUBLE_EQ(m.acc_unweighted, (0.5 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(m.f1_unweighted, (2.0 / 3.0 + 1.0) / 2);
}

TEST(Metrics, JsonHasEveryField) {
  const auto m = compute_metrics(std::vector<int>{0, 1}, std::vector<int>{0, 0}, 2);
  const std::string j = m.to_json();
  for (const char* k : {"acc_weighted", "acc_unweighted", "f1_weighted", "f1_unweighted", "acc_task", "f1_task"})
    EXPECT_NE(j.find(k), std::string::npos) << k;
}

namespace {

struct OneParam {
  ParamStore store;
  Tensor w;
  OneParam(std::vector<double> init) {
    const std::size_t n = init.size();
    w = store.create("w", Tensor::from({n}, std::move(init)));
  }
  void set_grad(const std::vector<double>& g) {
    store.zero_grad();
    Tensor t = Tensor::from({g.size()}, g);
    sum(mul(w, t)).backward();
  }
};

}  // namespace

TEST(Adam, ZeroGradientIsNoOp) {
  OneParam p({0.5, -1.5});
  AdamState s = AdamState::for_params(p.store);
  p.set_grad({0.0, 0.0});
  for (int i = 0; i < 5; ++i) adam_step(p.store, s, {});
  EXPECT_EQ(fixture::to_vec(p.w), (std::vector<double>{0.5, -1.5}));
}

TEST(Adam, MatchesHandRecurrence) {
  OneParam p({1.0});
  AdamState s = AdamState::for_params(p.store);
  const AdamOptions opt{0.01, 0.9, 0.999, 1e-8, 0.0};
  double x = 1.0, m = 0, v = 0;
  for (int t = 1; t <= 20; ++t) {
    const double g = 2 * x;  // d/dx x^2
    p.set_grad({g});
    adam_step(p.store, s, opt);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    ASSERT_NEAR(p.w[0], x, 1e-14) << t;
  }
}

TEST(Adam, ConstantGradientStepsAtLearningRate) {
  // m_hat / sqrt(v_hat) is exactly g/|g| under a constant gradient.
  OneParam p({0.0, 0.0});
  AdamState s = AdamState::for_params(p.store);
  const AdamOptions opt{1e-3, 0.9, 0.999, 1e-8, 0.0};
  p.set_grad({3.0, -0.2});
  for (int i = 0; i < 1000; ++i) adam_step(p.store, s, opt);
  EXPECT_NEAR(p.w[0], -1.0, 0.01);
  EXPECT_NEAR(p.w[1], 1.0, 0.01);
}

TEST(Adam, WeightDecayPullsTowardZero) {
  OneParam p({2.0});
  AdamState s = AdamState::for_params(p.store);
  p.set_grad({0.0});
  adam_step(p.store, s, {0.1, 0.9, 0.999, 1e-8, 0.5});
  EXPECT_LT(p.w[0], 2.0);
}

TEST(Resample, MinorityOversampledToLargest) {
  std::vector<int> labels(12, 0);
  labels[3] = labels[8] = 1;
  std::map<std::size_t, double> b_hits;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    Rng rng(seed);
    const auto order = resample_epoch(labels, 2, rng);
    ASSERT_EQ(order.size(), 20u);
    std::size_t ones = 0;
    std::set<std::size_t> seen(order.begin(), order.end());
    for (std::size_t i = 0; i < labels.size(); ++i) ASSERT_TRUE(seen.count(i)) << i;
    for (auto i : order) {
      if (labels[i] == 1) ++ones, b_hits[i] += 1.0 / 400;
    }
    ASSERT_EQ(ones, 10u);
  }
  EXPECT_NEAR(b_hits[3], 5.0, 0.25);
  EXPECT_NEAR(b_hits[8], 5.0, 0.25);
}

TEST(Resample, UniformClassesArePermutation) {
  const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
  Rng rng(1);
  auto order = resample_epoch(labels, 3, rng);
  std::sort(order.begin(), order.end());
  EXPECT_EQ(order, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(Resample, EmptyClassThrows) {
  Rng rng(1);
  EXPECT_THROW(resample_epoch(std::vector<int>{0, 0, 0}, 2, rng), ValidationError);
  EXPECT_THROW(resample_epoch(std::vector<int>{0, 3}, 2, rng), ValidationError);
}

TEST(Split, StratifiedCountsDisjointExhaustive) {
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i % 2);
  Rng rng(3);
  const auto [train, val] = split_train_val(labels, 0.2, rng);
  EXPECT_EQ(train.size(), 80u);
  EXPECT_EQ(val.size(), 20u);
  std::set<std::size_t> all(train.begin(), train.end());
  for (auto i : val) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 100u);

  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> y(30 + gen() % 70);
    for (auto& v : y) v = static_cast<int>(gen() % 3);
    std::map<int, int> count, in_val;
    for (int v : y) ++count[v];
    Rng r(trial);
    const auto [tr, va] = split_train_val(y, 0.2, r);
    for (auto i : va) ++in_val[y[i]];
    for (auto [c, n] : count) {
      if (n < 2) continue;
      EXPECT_LE(std::abs(in_val[c] - std::lround(n * 0.2)), 1) << c;
    }
    EXPECT_EQ(tr.size() + va.size(), y.size());
  }
}

TEST(Split, SeedDeterminesSplitAndFallback) {
  std::vector<int> labels = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  Rng a(9), b(9);
  EXPECT_EQ(split_train_val(labels, 0.3, a), split_train_val(labels, 0.3, b));
  labels.push_back(2);  // singleton class forces the unstratified path
  Rng c(9);
  const auto [tr, va] = split_train_val(labels, 0.2, c);
  EXPECT_EQ(tr.size() + va.size(), labels.size());
  EXPECT_EQ(va.size(), 2u);
  Rng d(1);
  EXPECT_THROW(split_train_val(labels, 0.0, d), ValidationError);
  EXPECT_THROW(split_train_val(labels, 1.0, d), ValidationError);
}

namespace {

std::vector<SampleTensors> synth_samples(const ModelConfig& cfg, std::size_t n, double sep,
                                         std::uint64_t seed, const std::filesystem::path& dir) {
  io::SynthSpec spec;
  spec.n_samples = n;
  spec.class_sep = sep;
  spec.dims = cfg.dims;
  spec.personality_dim = cfg.personality_dim;
  spec.t_min = 4;
  spec.t_max = 7;
  spec.seed = seed;
  return load_samples(io::synth_dataset(spec, dir), cfg);
}

}  // namespace

TEST(Train, SmokeOneEpoch) {
  fixture::TempDir dir;
  ModelConfig cfg = fixture::tiny_config(1);
  cfg.epochs = 1;
  cfg.batch_size = 4;
  const auto samples = synth_samples(cfg, 8, 1.0, 1, dir.path());
  DepressionNet net(cfg);
  std::ostringstream log;
  const auto report = train(net, samples, &log);
  ASSERT_EQ(report.epochs.size(), 1u);
  EXPECT_TRUE(std::isfinite(report.epochs[0].train_loss));
  EXPECT_EQ(report.best_epoch, 1u);
  EXPECT_EQ(report.train_indices.size() + report.val_indices.size(), 8u);
  EXPECT_NE(log.str().find("\"epoch\":1"), std::string::npos) << log.str();
}

TEST(Train, BitwiseDeterministic) {
  fixture::TempDir dir;
  ModelConfig cfg = fixture::tiny_config(2);
  cfg.epochs = 3;
  cfg.dropout = 0.3;
  const auto samples = synth_samples(cfg, 16, 1.0, 2, dir.path());
  DepressionNet a(cfg), b(cfg);
  std::ostringstream la, lb;
  train(a, samples, &la);
  train(b, samples, &lb);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(a.params().snapshot(), b.params().snapshot());
}

TEST(Train, EmptyInputRejected) {
  DepressionNet net(fixture::tiny_config());
  EXPECT_THROW(train(net, std::vector<SampleTensors>{}), ValidationError);
}

TEST(Train, SingleStepDescends) {
  fixture::TempDir dir;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    ModelConfig cfg = fixture::tiny_config(100 + trial);
    cfg.lr = 1e-4;
    const auto samples = synth_samples(cfg, 4, 0.5, trial, dir / std::to_string(trial));
    const auto labels = labels_for(samples, cfg.task);
    DepressionNet net(cfg);
    Rng rng(trial);
    auto loss = [&] {
      std::vector<Tensor> rows;
      for (const auto& s : samples) rows.push_back(net.logits(s, false, rng));
      return cross_entropy(concat(rows, 0), labels);
    };
    AdamState state = AdamState::for_params(net.params());
    net.params().zero_grad();
    const Tensor before = loss();
    before.backward();
    adam_step(net.params(), state, AdamOptions::from_config(cfg));
    const double after = loss().item();
    EXPECT_LT(after, before.item()) << "trial " << trial;
  }
}
