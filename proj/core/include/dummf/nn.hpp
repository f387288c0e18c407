#pragma once

// Parameter storage and transformer building blocks shared by the generator
// and the discriminators. Activations are row-stacked token matrices
// [rows, width]; attention scopes are expressed with AttnSegment lists.

#include <map>
#include <string>
#include <vector>

#include "dummf/rng.hpp"
#include "dummf/tensor.hpp"
#include "dummf/tensor_table.hpp"

namespace dummf {

class ParamStore {
 public:
  // Normal(0, std) initialised parameter.
  Tensor& add_normal(const std::string& name, Shape shape, double std, Rng& rng);
  Tensor& add_constant(const std::string& name, Shape shape, double value);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  // Name-ordered views.
  std::vector<std::string> names() const;
  std::vector<Tensor> tensors() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  // Sets every value to `value` (used to build degenerate models in tests).
  void fill(double value);
  ParamStore clone() const;

  void export_to(TensorTable& table) const;
  // Overwrites values from `table`; every name must exist with the same shape.
  void import_from(const TensorTable& table);

 private:
  std::map<std::string, Tensor> params_;
};

struct BlockDims {
  std::size_t d_model;
  std::size_t heads;
  std::size_t ff_dim;
};

// y = x W + b with W [in, out], b [1, out].
void init_linear(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
Tensor linear(const ParamStore& ps, const std::string& prefix, const Tensor& x);

// Row-wise layer norm with gain and bias [1, d].
void init_norm(ParamStore& ps, const std::string& prefix, std::size_t d);
Tensor norm(const ParamStore& ps, const std::string& prefix, const Tensor& x);

// Multi-head attention: projections, segmented scaled dot-product core, output projection.
void init_attention(ParamStore& ps, const std::string& prefix, std::size_t d, Rng& rng);
Tensor multi_head_attention(const ParamStore& ps, const std::string& prefix, const Tensor& xq, const Tensor& xkv,
                            std::size_t heads, const std::vector<AttnSegment>& segments);

// Pre-norm encoder layer: x + MHA(LN x), then + FFN(LN x).
void init_encoder_layer(ParamStore& ps, const std::string& prefix, const BlockDims& dims, Rng& rng);
Tensor encoder_layer(const ParamStore& ps, const std::string& prefix, const Tensor& x, const BlockDims& dims,
                     const std::vector<AttnSegment>& segments);

// Pre-norm decoder layer: self-attention, cross-attention to `memory`, FFN.
void init_decoder_layer(ParamStore& ps, const std::string& prefix, const BlockDims& dims, Rng& rng);
Tensor decoder_layer(const ParamStore& ps, const std::string& prefix, const Tensor& x, const Tensor& memory,
                     const BlockDims& dims, const std::vector<AttnSegment>& self_segments,
                     const std::vector<AttnSegment>& cross_segments);

// Fixed sinusoidal encoding, one row per entry of `positions`.
Tensor sinusoidal_encoding(const std::vector<double>& positions, std::size_t d);

// Segments letting each block of `len` consecutive rows attend within itself.
std::vector<AttnSegment> block_segments(std::size_t blocks, std::size_t len);

}  // namespace dummf
