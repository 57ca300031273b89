#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ptmf/config.hpp"
#include "ptmf/metrics.hpp"
#include "ptmf/model.hpp"
#include "ptmf/params.hpp"

namespace ptmf {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient

  static AdamOptions from_config(const ModelConfig& cfg);
};

/// First and second moments, one buffer per parameter, in store order.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static AdamState for_params(const ParamStore& store);
};

/// One bias-corrected Adam update from the gradients currently in `store`.
void adam_step(ParamStore& store, AdamState& state, const AdamOptions& opt);

/// Oversamples minority classes with replacement up to the largest class
/// count. Every input index appears at least once; the result is shuffled.
/// Throws ValidationError when any class in [0, n_classes) is empty.
std::vector<std::size_t> resample_epoch(std::span<const int> labels, std::size_t n_classes, Rng& rng);

/// Stratified split of indices: each class contributes round(count * fraction)
/// validation samples. Classes with fewer than two members make the whole
/// split fall back to plain random partitioning (warning on stderr).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    std::span<const int> labels, double val_fraction, Rng& rng);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  std::optional<MetricsReport> val;

  std::string to_json() const;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  std::optional<MetricsReport> best_val;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

std::vector<int> labels_for(std::span<const SampleTensors> samples, io::Task task);

/// Predictions in inference mode, then the metric suite for the model's task.
MetricsReport evaluate(const DepressionNet& net, std::span<const SampleTensors> samples);

/// Trains `net` on `samples` with the hyperparameters of `net.config()`.
/// Each epoch line goes to `log` (JSON lines) when given. On return the
/// parameters hold the best validation snapshot (by f1_task, earliest epoch
/// on ties) or the last epoch when there is no validation split.
TrainReport train(DepressionNet& net, std::span<const SampleTensors> samples,
                  std::ostream* log = nullptr);

}  // namespace ptmf
