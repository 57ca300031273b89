#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ptmf/config.hpp"
#include "ptmf/metrics.hpp"
#include "ptmf/model.hpp"

namespace ptmf {

struct AblationVariant {
  std::string name;
  AblationFlags flags;
};

/// full, then one variant per disabled component.
std::array<AblationVariant, 5> ablation_variants();

struct AblationRow {
  std::string variant;
  io::Task task = io::Task::kBinary;
  MetricsReport metrics;  // validation metrics of the selected snapshot
};

/// Trains every variant on every task from `base` (task and ablation flags
/// overridden per run). Same seed and split for every cell.
std::vector<AblationRow> run_ablation(const ModelConfig& base, std::span<const SampleTensors> samples,
                                      std::span<const io::Task> tasks);

/// Header: variant,task,acc_task,f1_task,acc_w,acc_u,f1_w,f1_u
std::string ablation_csv(std::span<const AblationRow> rows);

}  // namespace ptmf
