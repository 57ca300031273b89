#pragma once

#include <span>
#include <string>
#include <vector>

namespace ptmf {

/// Challenge metric suite. Unweighted means skip classes with no true samples.
struct MetricsReport {
  std::size_t n_classes = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  double acc_weighted = 0.0;    // overall accuracy
  double acc_unweighted = 0.0;  // macro recall
  double f1_weighted = 0.0;     // support-weighted F1
  double f1_unweighted = 0.0;   // macro F1
  double acc_task = 0.0;
  double f1_task = 0.0;

  std::size_t total() const;
  /// Compact JSON object; doubles use round-trip precision.
  std::string to_json() const;
};

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                              std::size_t n_classes);

}  // namespace ptmf
