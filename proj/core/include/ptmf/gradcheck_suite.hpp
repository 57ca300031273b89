#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptmf/params.hpp"

namespace ptmf {

struct ModuleGradCheck {
  std::string module;
  GradCheckReport report;
};

/// Builds each parameterized module at small sizes from `seed`, attaches a
/// random linear read-out as the loss, and checks every parameter against
/// central differences. Modules: lstm, asp, coattention, transformer (two
/// layers), ptmfim, classifier head, and the full network.
std::vector<ModuleGradCheck> run_gradcheck_suite(std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace ptmf
