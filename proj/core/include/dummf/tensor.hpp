#pragma once

// Dense row-major tensors with reverse-mode differentiation.
//
// Every op returns a new Tensor whose node keeps references to its inputs and
// a backward closure whenever any input requires grad. backward() walks the
// graph in reverse topological order. Intermediate gradients are reset at the
// start of each backward() call so a graph may be differentiated again; leaf
// gradients accumulate until zero_grad().
//
// There is no implicit broadcasting: binary ops need equal shapes. Scalars go
// through scale/add_scalar, everything else through tile/repeat/reshape.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dummf {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until something flows in
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t size() const { return node_->value.size(); }
  std::span<const double> data() const { return node_->value; }
  // In-place access for optimizers and finite differences; does not record.
  std::vector<double>& mutable_data() { return node_->value; }
  double item() const;
  double at(std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient, or zeros when nothing has flowed in yet.
  std::vector<double> grad() const;
  void zero_grad() { node_->grad.clear(); }
  const char* op() const { return node_->op; }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// While alive on a thread, ops on that thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reverse pass from a scalar loss. Throws UsageError if the loss is not a
// scalar or nothing upstream requires grad.
void backward(const Tensor& loss);

// First node, in evaluation order, holding a non-finite value; describes it
// as "op [shape]". Empty when every value is finite.
std::optional<std::string> first_nonfinite(const Tensor& root);

// ---- elementwise -----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor exp(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor squared_error(const Tensor& a, const Tensor& b);  // (a - b)^2 elementwise
Tensor detach(const Tensor& a);

// ---- linear algebra and layout ---------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);  // [r, k] x [k, c]
Tensor transpose(const Tensor& a);                // rank 2
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t length);
// Stacks `times` copies of a along axis 0.
Tensor tile(const Tensor& a, std::size_t times);
// Repeats every slice along axis 0 `times` times in place: rows r0 r0 r1 r1 ...
Tensor repeat_rows(const Tensor& a, std::size_t times);
// Gathers slices along axis 0; backward scatter-adds.
Tensor index_rows(const Tensor& a, std::span<const std::size_t> index);
Tensor cumsum(const Tensor& a, std::size_t axis);

// ---- normalisation ---------------------------------------------------------
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor layer_norm(const Tensor& a, std::size_t axis, double eps = 1e-5);

// ---- reductions ------------------------------------------------------------
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axis(const Tensor& a, std::size_t axis);
Tensor max_axis(const Tensor& a, std::size_t axis);  // ties -> lowest index

// Minimum over the last axis. The gradient reaches only the selected entry;
// ties go to the lowest index.
struct MinSelect {
  Tensor values;                    // input shape without the last axis
  std::vector<std::size_t> index;   // winner per output element
};
MinSelect min_index_select(const Tensor& a);

// ---- attention -------------------------------------------------------------
// Query rows [q_begin, q_begin + q_len) attend to key rows [k_begin, k_begin + k_len).
struct AttnSegment {
  std::size_t q_begin, q_len, k_begin, k_len;
};

// Scaled dot-product attention with `heads` column groups, evaluated per
// segment. q: [Rq, D], k and v: [Rk, D]. Query rows outside every segment
// produce zeros.
Tensor segmented_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                           const std::vector<AttnSegment>& segments);

}  // namespace dummf
