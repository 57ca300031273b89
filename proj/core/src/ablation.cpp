#include "ptmf/ablation.hpp"

#include <iomanip>
#include <sstream>

#include "ptmf/errors.hpp"
#include "ptmf/train.hpp"

namespace ptmf {

std::array<AblationVariant, 5> ablation_variants() {
  AblationFlags full;
  AblationFlags no_audio = full, no_coatt = full, no_visual = full, no_ptmfim = full;
  no_audio.multi_audio = false;
  no_coatt.co_att = false;
  no_visual.multi_visual = false;
  no_ptmfim.ptmfim = false;
  return {{{"full", full},
           {"wo_multi_audio", no_audio},
           {"wo_co_att", no_coatt},
           {"wo_multi_visual", no_visual},
           {"wo_ptmfim", no_ptmfim}}};
}

std::vector<AblationRow> run_ablation(const ModelConfig& base, std::span<const SampleTensors> samples,
                                      std::span<const io::Task> tasks) {
  if (base.val_fraction <= 0.0) throw ValidationError("ablation needs a validation split (val_fraction > 0)");
  std::vector<AblationRow> rows;
  for (const auto task : tasks) {
    for (const auto& variant : ablation_variants()) {
      ModelConfig cfg = base;
      cfg.task = task;
      cfg.ablation = variant.flags;
      DepressionNet net(cfg);
      const TrainReport report = train(net, samples);
      rows.push_back({variant.name, task, *report.best_val});
    }
  }
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::ostringstream out;
  out << "variant,task,acc_task,f1_task,acc_w,acc_u,f1_w,f1_u\n";
  out << std::setprecision(6) << std::fixed;
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << r.variant << ',' << io::task_name(r.task) << ',' << m.acc_task << ',' << m.f1_task << ','
        << m.acc_weighted << ',' << m.acc_unweighted << ',' << m.f1_weighted << ',' << m.f1_unweighted
        << '\n';
  }
  return out.str();
}

}  // namespace ptmf
