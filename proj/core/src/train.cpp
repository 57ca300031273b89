#include "ptmf/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <nlohmann/json.hpp>
#include <random>

#include "ptmf/errors.hpp"

namespace ptmf {

AdamOptions AdamOptions::from_config(const ModelConfig& cfg) {
  return {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay};
}

AdamState AdamState::for_params(const ParamStore& store) {
  AdamState s;
  for (const auto& p : store.params()) {
    s.m.emplace_back(p.tensor.numel(), 0.0);
    s.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

void adam_step(ParamStore& store, AdamState& state, const AdamOptions& opt) {
  auto& params = store.params();
  if (state.m.size() != params.size()) throw ValidationError("adam_step: state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor w = params[i].tensor;
    auto x = w.mutable_data();
    const auto g = w.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double gj = g[j] + opt.weight_decay * x[j];
      m[j] = opt.beta1 * m[j] + (1.0 - opt.beta1) * gj;
      v[j] = opt.beta2 * v[j] + (1.0 - opt.beta2) * gj * gj;
      x[j] -= opt.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + opt.eps);
    }
  }
}

std::vector<std::size_t> resample_epoch(std::span<const int> labels, std::size_t n_classes, Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
      throw ValidationError("resample_epoch: label " + std::to_string(labels[i]) + " out of range");
    }
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::size_t largest = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (by_class[c].empty()) {
      throw ValidationError("resample_epoch: class " + std::to_string(c) + " has no training samples");
    }
    largest = std::max(largest, by_class[c].size());
  }
  std::vector<std::size_t> out;
  out.reserve(largest * n_classes);
  for (const auto& members : by_class) {
    out.insert(out.end(), members.begin(), members.end());
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    for (std::size_t k = members.size(); k < largest; ++k) out.push_back(members[pick(rng)]);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    std::span<const int> labels, double val_fraction, Rng& rng) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ValidationError("split_train_val: fraction must lie in (0, 1)");
  }
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw ValidationError("split_train_val: negative label");
    max_label = std::max(max_label, l);
  }
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);

  bool stratify = true;
  for (const auto& members : by_class) {
    if (!members.empty() && members.size() < 2) stratify = false;
  }

  std::vector<std::size_t> train, val;
  if (stratify) {
    for (auto& members : by_class) {
      std::shuffle(members.begin(), members.end(), rng);
      const auto n_val = static_cast<std::size_t>(std::lround(static_cast<double>(members.size()) * val_fraction));
      val.insert(val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
      train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
    }
  } else {
    std::cerr << "warning: a class has fewer than 2 samples; using an unstratified split\n";
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::shuffle(all.begin(), all.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::lround(static_cast<double>(all.size()) * val_fraction));
    val.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.assign(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

std::string EpochLog::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss;
  j["train_acc"] = train_acc;
  if (val) {
    j["val_acc_weighted"] = val->acc_weighted;
    j["val_acc_unweighted"] = val->acc_unweighted;
    j["val_f1_weighted"] = val->f1_weighted;
    j["val_f1_unweighted"] = val->f1_unweighted;
    j["val_acc_task"] = val->acc_task;
    j["val_f1_task"] = val->f1_task;
  }
  return j.dump();
}

std::vector<int> labels_for(std::span<const SampleTensors> samples, io::Task task) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.labels.get(task));
  return out;
}

MetricsReport evaluate(const DepressionNet& net, std::span<const SampleTensors> samples) {
  std::vector<int> predicted;
  predicted.reserve(samples.size());
  for (const auto& s : samples) predicted.push_back(net.predict(s));
  return compute_metrics(labels_for(samples, net.config().task), predicted, net.config().n_classes());
}

namespace {

std::vector<SampleTensors> gather(std::span<const SampleTensors> samples, std::span<const std::size_t> idx) {
  std::vector<SampleTensors> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(samples[i]);
  return out;
}

Rng derived_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return Rng(seq);
}

}  // namespace

TrainReport train(DepressionNet& net, std::span<const SampleTensors> samples, std::ostream* log) {
  const ModelConfig& cfg = net.config();
  if (samples.empty()) throw ValidationError("train: no samples");
  const std::vector<int> all_labels = labels_for(samples, cfg.task);

  TrainReport report;
  Rng split_rng = derived_rng(cfg.seed, 1);
  if (cfg.val_fraction > 0.0) {
    std::tie(report.train_indices, report.val_indices) = split_train_val(all_labels, cfg.val_fraction, split_rng);
  } else {
    report.train_indices.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) report.train_indices[i] = i;
  }
  const auto train_set = gather(samples, report.train_indices);
  const auto val_set = gather(samples, report.val_indices);
  const std::vector<int> train_labels = labels_for(train_set, cfg.task);

  Rng rng = derived_rng(cfg.seed, 2);
  ParamStore& store = net.params();
  AdamState adam = AdamState::for_params(store);
  const AdamOptions opt = AdamOptions::from_config(cfg);
  std::vector<std::vector<double>> best;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = resample_epoch(train_labels, cfg.n_classes(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor> rows;
      std::vector<int> batch_labels;
      for (std::size_t k = start; k < end; ++k) {
        rows.push_back(net.logits(train_set[order[k]], true, rng));
        batch_labels.push_back(train_labels[order[k]]);
      }
      store.zero_grad();
      const Tensor loss = cross_entropy(concat(rows, 0), batch_labels);
      loss.backward();
      adam_step(store, adam, opt);
      loss_sum += loss.item() * static_cast<double>(end - start);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    entry.train_acc = evaluate(net, train_set).acc_weighted;
    if (!val_set.empty()) {
      entry.val = evaluate(net, val_set);
      if (!report.best_val || entry.val->f1_task > report.best_val->f1_task) {
        report.best_val = entry.val;
        report.best_epoch = epoch;
        best = store.snapshot();
      }
    }
    if (log) *log << entry.to_json() << '\n';
    report.epochs.push_back(std::move(entry));
  }

  if (!best.empty()) {
    store.restore(best);
  } else {
    report.best_epoch = cfg.epochs;
  }
  return report;
}

}  // namespace ptmf
