#include "dummf/adam.hpp"

#include <cmath>

#include "dummf/error.hpp"

namespace dummf {

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamConfig& cfg, std::uint64_t t) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
    throw ShapeError("adam_update: buffer sizes differ");
  const double td = static_cast<double>(t);
  const double c1 = 1.0 - std::pow(cfg.beta1, td);
  const double c2 = 1.0 - std::pow(cfg.beta2, td);
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    param[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state holds a different parameter count");
  ++state.step;
  std::vector<double> zero;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (state.m[i].size() != p.size()) throw ShapeError("adam_step: moment shape differs from parameter " + std::to_string(i));
    std::span<const double> g;
    if (p.has_grad()) {
      g = p.node()->grad;
    } else {
      zero.assign(p.size(), 0.0);
      g = zero;
    }
    adam_update(p.mutable_data(), g, state.m[i], state.v[i], state.config, state.step);
  }
}

}  // namespace dummf
