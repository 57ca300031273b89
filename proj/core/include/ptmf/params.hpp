#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ptmf/tensor.hpp"

namespace ptmf {

struct Parameter {
  std::string name;  // dotted path, e.g. "ptmfim.gate.weight"
  Tensor tensor;
};

/// Ordered, name-unique registry of trainable tensors.
class ParamStore {
 public:
  // Registers a copy of `init` as a gradient-carrying leaf. Throws on duplicate names.
  Tensor create(std::string name, const Tensor& init);

  const std::vector<Parameter>& params() const { return params_; }
  std::vector<Parameter>& params() { return params_; }
  std::size_t size() const { return params_.size(); }

  const Parameter* find(std::string_view name) const;
  std::size_t count_with_prefix(std::string_view prefix) const;
  std::size_t element_count() const;

  void zero_grad();

  // Copies every value buffer; used for best-epoch snapshots.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<Parameter> params_;
};

// Checkpoint: "PTMF", u32 version, u32 count, then per parameter
// u32 name length, name bytes, u32 rank, u32 extents, f64 LE payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, std::span<const Parameter> params);
std::vector<Parameter> read_checkpoint(const std::filesystem::path& path);
// Copies values into a store whose names and shapes must match exactly.
void load_checkpoint_into(ParamStore& store, const std::vector<Parameter>& loaded);

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  double max_rel_error() const;
  bool passed() const { return max_rel_error() <= tolerance; }
};

struct GradCheckOptions {
  double eps = 1e-4;
  // Five-point central stencil (error O(eps^4)); false uses the plain
  // two-point central difference (error O(eps^2)).
  bool five_point = true;
  // Denominator floor of the relative error. Parameters whose true gradient
  // is exactly zero (dropped units, dead ReLUs) otherwise divide pure
  // rounding noise by a tiny number.
  double floor = 1e-8;
  double tolerance = 1e-4;
  // 0 checks every element; otherwise a seeded subset per parameter.
  std::size_t max_elements = 0;
  std::uint64_t seed = 0;
};

/// Compares backward() against central finite differences for each parameter.
/// The error per element is |analytic - numeric| / max(|analytic|, |numeric|, floor).
/// Throws ValidationError if two evaluations of `loss_fn` at the same point differ.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           std::span<const Parameter> params, const GradCheckOptions& options = {});

}  // namespace ptmf
