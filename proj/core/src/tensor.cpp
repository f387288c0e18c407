#include "dummf/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "dummf/error.hpp"

namespace dummf {

using NodePtr = std::shared_ptr<Tensor::Node>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

thread_local bool g_no_grad = false;

std::vector<double>& gbuf(Tensor::Node& n) {
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Tensor make(const char* op, Shape shape, std::vector<double> value, std::vector<NodePtr> inputs,
            std::function<void(Tensor::Node&)> bw) {
  auto n = std::make_shared<Tensor::Node>();
  n->op = op;
  n->shape = std::move(shape);
  n->value = std::move(value);
  if (!g_no_grad)
    for (const auto& in : inputs)
      if (in->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->inputs = std::move(inputs);
    n->backward = std::move(bw);
  }
  return Tensor(std::move(n));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void need_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
}

struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit split(const char* op, const Shape& s, std::size_t axis) {
  if (axis >= s.size())
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <class F, class G>
Tensor unary(const char* op, const Tensor& a, F f, G df) {
  std::vector<double> out(a.size());
  const auto& x = a.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return make(op, a.shape(), std::move(out), {a.ptr()}, [df](Tensor::Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = gbuf(in);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(in.value[i], self.value[i]);
  });
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != data.size())
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
  return node_->grad;
}

namespace {

std::vector<Tensor::Node*> topo_order(Tensor::Node* root, bool grad_only) {
  std::vector<Tensor::Node*> order;
  std::unordered_set<Tensor::Node*> seen;
  std::vector<std::pair<Tensor::Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Tensor::Node* child = node->inputs[next++].get();
      if ((!grad_only || child->requires_grad) && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw UsageError("backward: loss must be a scalar, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  if (!loss.requires_grad()) throw UsageError("backward: loss does not depend on any tensor requiring grad");
  auto order = topo_order(loss.node(), true);
  for (auto* n : order)
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  loss.node()->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

std::optional<std::string> first_nonfinite(const Tensor& root) {
  for (auto* n : topo_order(root.node(), false))
    for (double v : n->value)
      if (!std::isfinite(v)) return std::string(n->op) + " " + shape_str(n->shape);
  return std::nullopt;
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  need_same("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make("add", a.shape(), std::move(out), {a.ptr(), b.ptr()}, [](Tensor::Node& self) {
    for (auto& in : self.inputs)
      if (in->requires_grad) {
        auto& g = gbuf(*in);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  need_same("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return make("sub", a.shape(), std::move(out), {a.ptr(), b.ptr()}, [](Tensor::Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      auto& g = gbuf(in);
      const double s = k == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  need_same("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make("mul", a.shape(), std::move(out), {a.ptr(), b.ptr()}, [](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    if (x.requires_grad) {
      auto& g = gbuf(x);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      auto& g = gbuf(y);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor sqrt(const Tensor& a) {
  return unary("sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      "gelu", a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x); });
}

Tensor squared_error(const Tensor& a, const Tensor& b) {
  need_same("squared_error", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = a.at(i) - b.at(i);
    out[i] = d * d;
  }
  return make("squared_error", a.shape(), std::move(out), {a.ptr(), b.ptr()}, [](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    for (std::size_t k = 0; k < 2; ++k) {
      auto& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      auto& g = gbuf(in);
      const double s = k == 0 ? 2.0 : -2.0;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i] * (x.value[i] - y.value[i]);
    }
  });
}

Tensor detach(const Tensor& a) { return Tensor::from(a.shape(), a.node()->value); }

// ---- linear algebra and layout ---------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_fail("matmul", a.shape(), b.shape());
  const auto r = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto c = static_cast<Eigen::Index>(b.dim(1));
  std::vector<double> out(static_cast<std::size_t>(r * c));
  Map(out.data(), r, c).noalias() = MapC(a.data().data(), r, k) * MapC(b.data().data(), k, c);
  return make("matmul", {a.dim(0), b.dim(1)}, std::move(out), {a.ptr(), b.ptr()}, [r, k, c](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    MapC gy(self.grad.data(), r, c);
    if (x.requires_grad) Map(gbuf(x).data(), r, k).noalias() += gy * MapC(y.value.data(), k, c).transpose();
    if (y.requires_grad) Map(gbuf(y).data(), k, c).noalias() += MapC(x.value.data(), r, k).transpose() * gy;
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(a.shape()));
  const auto r = static_cast<Eigen::Index>(a.dim(0));
  const auto c = static_cast<Eigen::Index>(a.dim(1));
  std::vector<double> out(a.size());
  Map(out.data(), c, r) = MapC(a.data().data(), r, c).transpose();
  return make("transpose", {a.dim(1), a.dim(0)}, std::move(out), {a.ptr()}, [r, c](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (x.requires_grad) Map(gbuf(x).data(), r, c) += MapC(self.grad.data(), c, r).transpose();
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) shape_fail("reshape", a.shape(), shape);
  return make("reshape", std::move(shape), a.node()->value, {a.ptr()}, [](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& g = gbuf(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape shape = parts.front().shape();
  if (axis >= shape.size()) throw ShapeError("concat: axis out of range for " + shape_str(shape));
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) shape_fail("concat", shape, s);
    s[axis] = shape[axis];
    if (s != shape) shape_fail("concat", shape, p.shape());
    total += p.dim(axis);
  }
  shape[axis] = total;
  const auto sp = split("concat", shape, axis);
  std::vector<double> out(numel(shape));
  std::vector<std::size_t> offsets;
  std::vector<NodePtr> inputs;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.dim(axis);
    const auto& v = p.node()->value;
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * len * sp.inner), len * sp.inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * total + off) * sp.inner));
    offsets.push_back(off);
    inputs.push_back(p.ptr());
    off += len;
  }
  return make("concat", std::move(shape), std::move(out), std::move(inputs),
              [sp, total, offsets](Tensor::Node& self) {
                for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                  auto& in = *self.inputs[k];
                  if (!in.requires_grad) continue;
                  auto& g = gbuf(in);
                  const std::size_t len = g.size() / (sp.outer * sp.inner);
                  for (std::size_t o = 0; o < sp.outer; ++o)
                    for (std::size_t i = 0; i < len * sp.inner; ++i)
                      g[o * len * sp.inner + i] += self.grad[(o * total + offsets[k]) * sp.inner + i];
                }
              });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t length) {
  const auto sp = split("slice", a.shape(), axis);
  if (length == 0 || begin + length > sp.len)
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(begin + length) +
                     ") out of bounds for " + shape_str(a.shape()) + " axis " + std::to_string(axis));
  Shape shape = a.shape();
  shape[axis] = length;
  std::vector<double> out(numel(shape));
  const auto& v = a.node()->value;
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>((o * sp.len + begin) * sp.inner), length * sp.inner,
                out.begin() + static_cast<std::ptrdiff_t>(o * length * sp.inner));
  return make("slice", std::move(shape), std::move(out), {a.ptr()}, [sp, begin, length](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& g = gbuf(x);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < length * sp.inner; ++i)
        g[(o * sp.len + begin) * sp.inner + i] += self.grad[o * length * sp.inner + i];
  });
}

Tensor tile(const Tensor& a, std::size_t times) {
  if (a.rank() == 0 || times == 0) throw ShapeError("tile: needs rank >= 1 and times >= 1");
  Shape shape = a.shape();
  shape[0] *= times;
  const auto& v = a.node()->value;
  std::vector<double> out;
  out.reserve(v.size() * times);
  for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), v.begin(), v.end());
  return make("tile", std::move(shape), std::move(out), {a.ptr()}, [times](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& g = gbuf(x);
    const std::size_t n = g.size();
    for (std::size_t t = 0; t < times; ++t)
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[t * n + i];
  });
}

Tensor repeat_rows(const Tensor& a, std::size_t times) {
  if (a.rank() == 0 || times == 0) throw ShapeError("repeat_rows: needs rank >= 1 and times >= 1");
  Shape shape = a.shape();
  const std::size_t rows = shape[0];
  const std::size_t w = rows ? a.size() / rows : 0;
  shape[0] *= times;
  const auto& v = a.node()->value;
  std::vector<double> out(v.size() * times);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < times; ++t)
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                  out.begin() + static_cast<std::ptrdiff_t>((r * times + t) * w));
  return make("repeat_rows", std::move(shape), std::move(out), {a.ptr()}, [rows, w, times](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& g = gbuf(x);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t t = 0; t < times; ++t)
        for (std::size_t i = 0; i < w; ++i) g[r * w + i] += self.grad[(r * times + t) * w + i];
  });
}

Tensor index_rows(const Tensor& a, std::span<const std::size_t> index) {
  if (a.rank() == 0) throw ShapeError("index_rows: rank 0 input");
  const std::size_t rows = a.dim(0);
  const std::size_t w = rows ? a.size() / rows : 0;
  Shape shape = a.shape();
  shape[0] = index.size();
  std::vector<double> out(index.size() * w);
  const auto& v = a.node()->value;
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= rows)
      throw ShapeError("index_rows: index " + std::to_string(index[r]) + " out of range for " + shape_str(a.shape()));
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(index[r] * w), w, out.begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make("index_rows", std::move(shape), std::move(out), {a.ptr()}, [idx = std::move(idx), w](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& g = gbuf(x);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t i = 0; i < w; ++i) g[idx[r] * w + i] += self.grad[r * w + i];
  });
}

Tensor cumsum(const Tensor& a, std::size_t axis) {
  const auto sp = split("cumsum", a.shape(), axis);
  std::vector<double> out(a.node()->value);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t t = 1; t < sp.len; ++t)
      for (std::size_t i = 0; i < sp.inner; ++i)
        out[(o * sp.len + t) * sp.inner + i] += out[(o * sp.len + t - 1) * sp.inner + i];
  return make("cumsum", a.shape(), std::move(out), {a.ptr()}, [sp](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& g = gbuf(x);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        double run = 0.0;
        for (std::size_t t = sp.len; t-- > 0;) {
          run += self.grad[(o * sp.len + t) * sp.inner + i];
          g[(o * sp.len + t) * sp.inner + i] += run;
        }
      }
  });
}

// ---- normalisation ---------------------------------------------------------

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto sp = split("softmax", a.shape(), axis);
  const auto& v = a.node()->value;
  std::vector<double> out(v.size());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < sp.len; ++t) mx = std::max(mx, v[base + t * sp.inner]);
      double z = 0.0;
      for (std::size_t t = 0; t < sp.len; ++t) z += out[base + t * sp.inner] = std::exp(v[base + t * sp.inner] - mx);
      for (std::size_t t = 0; t < sp.len; ++t) out[base + t * sp.inner] /= z;
    }
  return make("softmax", a.shape(), std::move(out), {a.ptr()}, [sp](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& g = gbuf(x);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.len * sp.inner + i;
        double dot = 0.0;
        for (std::size_t t = 0; t < sp.len; ++t) dot += self.grad[base + t * sp.inner] * self.value[base + t * sp.inner];
        for (std::size_t t = 0; t < sp.len; ++t) {
          const std::size_t k = base + t * sp.inner;
          g[k] += self.value[k] * (self.grad[k] - dot);
        }
      }
  });
}

Tensor layer_norm(const Tensor& a, std::size_t axis, double eps) {
  const auto sp = split("layer_norm", a.shape(), axis);
  const auto& v = a.node()->value;
  std::vector<double> out(v.size());
  std::vector<double> inv_std(sp.outer * sp.inner);
  const double n = static_cast<double>(sp.len);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      double mu = 0.0;
      for (std::size_t t = 0; t < sp.len; ++t) mu += v[base + t * sp.inner];
      mu /= n;
      double var = 0.0;
      for (std::size_t t = 0; t < sp.len; ++t) {
        const double d = v[base + t * sp.inner] - mu;
        var += d * d;
      }
      const double is = 1.0 / std::sqrt(var / n + eps);
      inv_std[o * sp.inner + i] = is;
      for (std::size_t t = 0; t < sp.len; ++t) out[base + t * sp.inner] = (v[base + t * sp.inner] - mu) * is;
    }
  return make("layer_norm", a.shape(), std::move(out), {a.ptr()},
              [sp, n, inv_std = std::move(inv_std)](Tensor::Node& self) {
                auto& x = *self.inputs[0];
                if (!x.requires_grad) return;
                auto& g = gbuf(x);
                for (std::size_t o = 0; o < sp.outer; ++o)
                  for (std::size_t i = 0; i < sp.inner; ++i) {
                    const std::size_t base = o * sp.len * sp.inner + i;
                    double mg = 0.0, mgy = 0.0;
                    for (std::size_t t = 0; t < sp.len; ++t) {
                      const std::size_t k = base + t * sp.inner;
                      mg += self.grad[k];
                      mgy += self.grad[k] * self.value[k];
                    }
                    mg /= n;
                    mgy /= n;
                    const double is = inv_std[o * sp.inner + i];
                    for (std::size_t t = 0; t < sp.len; ++t) {
                      const std::size_t k = base + t * sp.inner;
                      g[k] += is * (self.grad[k] - mg - self.value[k] * mgy);
                    }
                  }
              });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return make("sum", {}, {s}, {a.ptr()}, [](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& g = gbuf(x);
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (double x : a.data()) s += x;
  return make("mean", {}, {s / n}, {a.ptr()}, [n](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& g = gbuf(x);
    for (auto& gi : g) gi += self.grad[0] / n;
  });
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  const auto sp = split("sum_axis", a.shape(), axis);
  Shape shape = a.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const auto& v = a.node()->value;
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t t = 0; t < sp.len; ++t)
      for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += v[(o * sp.len + t) * sp.inner + i];
  return make("sum_axis", std::move(shape), std::move(out), {a.ptr()}, [sp](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& g = gbuf(x);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t t = 0; t < sp.len; ++t)
        for (std::size_t i = 0; i < sp.inner; ++i) g[(o * sp.len + t) * sp.inner + i] += self.grad[o * sp.inner + i];
  });
}

Tensor max_axis(const Tensor& a, std::size_t axis) {
  const auto sp = split("max_axis", a.shape(), axis);
  if (sp.len == 0) throw ShapeError("max_axis: empty axis");
  Shape shape = a.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const auto& v = a.node()->value;
  std::vector<double> out(sp.outer * sp.inner);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      std::size_t best = 0;
      for (std::size_t t = 1; t < sp.len; ++t)
        if (v[(o * sp.len + t) * sp.inner + i] > v[(o * sp.len + best) * sp.inner + i]) best = t;
      out[o * sp.inner + i] = v[(o * sp.len + best) * sp.inner + i];
      arg[o * sp.inner + i] = (o * sp.len + best) * sp.inner + i;
    }
  return make("max_axis", std::move(shape), std::move(out), {a.ptr()}, [arg = std::move(arg)](Tensor::Node& self) {
    auto& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& g = gbuf(x);
    for (std::size_t k = 0; k < arg.size(); ++k) g[arg[k]] += self.grad[k];
  });
}

MinSelect min_index_select(const Tensor& a) {
  if (a.rank() == 0 || a.shape().back() == 0) throw ShapeError("min_index_select: needs a non-empty last axis");
  const std::size_t k = a.shape().back();
  const std::size_t groups = a.size() / k;
  Shape shape(a.shape().begin(), a.shape().end() - 1);
  const auto& v = a.node()->value;
  std::vector<double> out(groups);
  std::vector<std::size_t> idx(groups);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (v[gi * k + j] < v[gi * k + best]) best = j;
    idx[gi] = best;
    out[gi] = v[gi * k + best];
  }
  MinSelect r;
  r.index = idx;
  r.values = make("min_index_select", std::move(shape), std::move(out), {a.ptr()},
                  [idx = std::move(idx), k](Tensor::Node& self) {
                    auto& x = *self.inputs[0];
                    if (!x.requires_grad) return;
                    auto& g = gbuf(x);
                    for (std::size_t gi = 0; gi < idx.size(); ++gi) g[gi * k + idx[gi]] += self.grad[gi];
                  });
  return r;
}

// ---- attention -------------------------------------------------------------

Tensor segmented_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                           const std::vector<AttnSegment>& segments) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) throw ShapeError("segmented_attention: inputs must be rank 2");
  if (k.shape() != v.shape()) shape_fail("segmented_attention", k.shape(), v.shape());
  if (q.dim(1) != k.dim(1)) shape_fail("segmented_attention", q.shape(), k.shape());
  const std::size_t D = q.dim(1);
  if (heads == 0 || D % heads != 0)
    throw ShapeError("segmented_attention: width " + std::to_string(D) + " not divisible by " + std::to_string(heads) +
                     " heads");
  const std::size_t dh = D / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& s : segments)
    if (s.q_begin + s.q_len > q.dim(0) || s.k_begin + s.k_len > k.dim(0) || s.k_len == 0)
      throw ShapeError("segmented_attention: segment out of range");

  using Stride = Eigen::OuterStride<>;
  using CBlock = Eigen::Map<const RowMat, 0, Stride>;
  using Block = Eigen::Map<RowMat, 0, Stride>;
  const Eigen::Index ld = static_cast<Eigen::Index>(D);
  auto cblk = [&](const double* base, std::size_t row, std::size_t rows, std::size_t h) {
    return CBlock(base + row * D + h * dh, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dh), Stride(ld));
  };

  std::vector<double> out(q.dim(0) * D, 0.0);
  auto probs = std::make_shared<std::vector<RowMat>>();
  probs->reserve(segments.size() * heads);
  const double* qd = q.data().data();
  const double* kd = k.data().data();
  const double* vd = v.data().data();
  for (const auto& s : segments)
    for (std::size_t h = 0; h < heads; ++h) {
      RowMat p = (cblk(qd, s.q_begin, s.q_len, h) * cblk(kd, s.k_begin, s.k_len, h).transpose()) * inv;
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        auto row = p.row(r);
        row.array() = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
      }
      Block(out.data() + s.q_begin * D + h * dh, static_cast<Eigen::Index>(s.q_len), static_cast<Eigen::Index>(dh),
            Stride(ld))
          .noalias() = p * cblk(vd, s.k_begin, s.k_len, h);
      probs->push_back(std::move(p));
    }

  return make("segmented_attention", {q.dim(0), D}, std::move(out), {q.ptr(), k.ptr(), v.ptr()},
              [segments, heads, dh, D, inv, probs](Tensor::Node& self) {
                auto& qn = *self.inputs[0];
                auto& kn = *self.inputs[1];
                auto& vn = *self.inputs[2];
                const Eigen::Index ld = static_cast<Eigen::Index>(D);
                auto cblk = [&](const double* base, std::size_t row, std::size_t rows, std::size_t h) {
                  return CBlock(base + row * D + h * dh, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dh),
                                Stride(ld));
                };
                auto blk = [&](double* base, std::size_t row, std::size_t rows, std::size_t h) {
                  return Block(base + row * D + h * dh, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dh),
                               Stride(ld));
                };
                double* gq = qn.requires_grad ? gbuf(qn).data() : nullptr;
                double* gk = kn.requires_grad ? gbuf(kn).data() : nullptr;
                double* gv = vn.requires_grad ? gbuf(vn).data() : nullptr;
                std::size_t pi = 0;
                for (const auto& s : segments)
                  for (std::size_t h = 0; h < heads; ++h, ++pi) {
                    const RowMat& p = (*probs)[pi];
                    const auto go = cblk(self.grad.data(), s.q_begin, s.q_len, h);
                    if (gv) blk(gv, s.k_begin, s.k_len, h).noalias() += p.transpose() * go;
                    if (!gq && !gk) continue;
                    RowMat dp = go * cblk(vn.value.data(), s.k_begin, s.k_len, h).transpose();
                    for (Eigen::Index r = 0; r < dp.rows(); ++r) {
                      const double dot = dp.row(r).dot(p.row(r));
                      dp.row(r).array() = p.row(r).array() * (dp.row(r).array() - dot);
                    }
                    dp *= inv;
                    if (gq) blk(gq, s.q_begin, s.q_len, h).noalias() += dp * cblk(kn.value.data(), s.k_begin, s.k_len, h);
                    if (gk)
                      blk(gk, s.k_begin, s.k_len, h).noalias() += dp.transpose() * cblk(qn.value.data(), s.q_begin, s.q_len, h);
                  }
              });
}

}  // namespace dummf
