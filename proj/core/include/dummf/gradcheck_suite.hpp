#pragma once

// Finite-difference checks over every differentiable op, every training loss
// and the end-to-end generator objective, on small random inputs.

#include <cstdint>
#include <string>
#include <vector>

#include "dummf/gradcheck.hpp"

namespace dummf {

struct GradCheckCase {
  std::string group;  // "op", "layer", "loss" or "model"
  std::string name;
  GradCheckResult result;
};

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed, const GradCheckOptions& opt = {});

}  // namespace dummf
