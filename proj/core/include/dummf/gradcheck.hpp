#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dummf/tensor.hpp"

namespace dummf {

struct GradCheckOptions {
  double h = 1e-5;
  // Relative error uses max(|analytic|, |numeric|, denom_floor) as denominator,
  // so tiny gradients are judged on absolute error.
  double denom_floor = 1e-2;
  // A coordinate is kink-adjacent when its one-sided differences disagree by
  // more than kink_tol * max(1, |central|), or when the central differences at
  // h and h/2 disagree by more than scale_tol * max(|c_h|, |c_h/2|, denom_floor).
  // Such coordinates are skipped.
  double kink_tol = 1e-2;
  double scale_tol = 1e-6;
  // 0 checks every coordinate; otherwise at most this many per input, evenly strided.
  std::size_t max_coords_per_input = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::string worst;  // "input i coord j" of the largest error
};

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares backward() against central differences for every input that
// requires grad. Inputs are perturbed in place and restored.
GradCheckResult grad_check(const ScalarFn& f, std::vector<Tensor> inputs, const GradCheckOptions& opt = {});

// Single-input convenience form.
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h = 1e-5);

}  // namespace dummf
