#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dummf/tensor.hpp"

namespace dummf {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments are indexed like the parameter list handed to adam_step.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update on a single buffer. `t` is the step number
// after incrementing (>= 1).
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamConfig& cfg, std::uint64_t t);

// Updates every parameter in place from its accumulated gradient (missing
// gradients count as zero) and increments state.step.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace dummf
