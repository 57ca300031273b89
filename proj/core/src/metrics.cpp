#include "ptmf/metrics.hpp"

#include <nlohmann/json.hpp>

#include "ptmf/errors.hpp"

namespace ptmf {

std::size_t MetricsReport::total() const {
  std::size_t n = 0;
  for (const auto& row : confusion)
    for (auto c : row) n += c;
  return n;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["n_classes"] = n_classes;
  j["n_samples"] = total();
  j["acc_weighted"] = acc_weighted;
  j["acc_unweighted"] = acc_unweighted;
  j["f1_weighted"] = f1_weighted;
  j["f1_unweighted"] = f1_unweighted;
  j["acc_task"] = acc_task;
  j["f1_task"] = f1_task;
  j["confusion"] = confusion;
  return j.dump();
}

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                              std::size_t n_classes) {
  if (truth.size() != predicted.size()) {
    throw ValidationError("compute_metrics: " + std::to_string(truth.size()) + " labels vs " +
                          std::to_string(predicted.size()) + " predictions");
  }
  if (truth.empty()) throw ValidationError("compute_metrics: no samples");
  MetricsReport r;
  r.n_classes = n_classes;
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  const auto check = [&](int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= n_classes) {
      throw ValidationError("compute_metrics: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(n_classes) + ")");
    }
    return static_cast<std::size_t>(label);
  };
  for (std::size_t i = 0; i < truth.size(); ++i) ++r.confusion[check(truth[i])][check(predicted[i])];

  const double n = static_cast<double>(truth.size());
  std::size_t correct = 0, present = 0;
  double recall_sum = 0.0, f1_sum = 0.0, f1_weighted = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    correct += r.confusion[c][c];
    std::size_t support = 0, predicted_c = 0;
    for (std::size_t k = 0; k < n_classes; ++k) {
      support += r.confusion[c][k];
      predicted_c += r.confusion[k][c];
    }
    if (support == 0) continue;
    ++present;
    const double tp = static_cast<double>(r.confusion[c][c]);
    const double recall = tp / static_cast<double>(support);
    const double precision = predicted_c ? tp / static_cast<double>(predicted_c) : 0.0;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    recall_sum += recall;
    f1_sum += f1;
    f1_weighted += f1 * static_cast<double>(support);
  }
  r.acc_weighted = static_cast<double>(correct) / n;
  r.acc_unweighted = recall_sum / static_cast<double>(present);
  r.f1_weighted = f1_weighted / n;
  r.f1_unweighted = f1_sum / static_cast<double>(present);
  r.acc_task = (r.acc_weighted + r.acc_unweighted) / 2.0;
  r.f1_task = (r.f1_weighted + r.f1_unweighted) / 2.0;
  return r;
}

}  // namespace ptmf
