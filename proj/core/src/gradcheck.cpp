#include "dummf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dummf/error.hpp"

namespace dummf {

GradCheckResult grad_check(const ScalarFn& f, std::vector<Tensor> inputs, const GradCheckOptions& opt) {
  for (auto& x : inputs) x.zero_grad();
  const Tensor loss = f(inputs);
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& x : inputs) analytic.push_back(x.grad());

  auto eval = [&] { return f(inputs).item(); };
  const double f0 = loss.item();
  GradCheckResult res;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    auto& data = inputs[i].mutable_data();
    const std::size_t n = data.size();
    const std::size_t stride =
        opt.max_coords_per_input && n > opt.max_coords_per_input ? (n + opt.max_coords_per_input - 1) / opt.max_coords_per_input : 1;
    for (std::size_t j = 0; j < n; j += stride) {
      const double orig = data[j];
      data[j] = orig + opt.h;
      const double fp = eval();
      data[j] = orig - opt.h;
      const double fm = eval();
      data[j] = orig;
      data[j] = orig + 0.5 * opt.h;
      const double fp2 = eval();
      data[j] = orig - 0.5 * opt.h;
      const double fm2 = eval();
      data[j] = orig;
      const double central = (fp - fm) / (2.0 * opt.h);
      const double half = (fp2 - fm2) / opt.h;
      const double fwd = (fp - f0) / opt.h;
      const double bwd = (f0 - fm) / opt.h;
      // a switch inside [x - h, x + h] moves the two central estimates apart
      const bool one_sided = std::abs(fwd - bwd) > opt.kink_tol * std::max(1.0, std::abs(central));
      const bool scales = std::abs(central - half) >
                          opt.scale_tol * std::max({std::abs(central), std::abs(half), opt.denom_floor});
      if (one_sided || scales) {
        ++res.skipped;
        continue;
      }
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(central), opt.denom_floor});
      const double err = std::abs(a - central) / denom;
      ++res.checked;
      if (err > res.max_rel_error || !std::isfinite(err)) {
        res.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
        res.worst = "input " + std::to_string(i) + " coord " + std::to_string(j);
      }
    }
  }
  for (auto& x : inputs) x.zero_grad();
  return res;
}

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h) {
  GradCheckOptions opt;
  opt.h = h;
  return grad_check([&](const std::vector<Tensor>& in) { return f(in[0]); }, {std::move(x)}, opt);
}

}  // namespace dummf
