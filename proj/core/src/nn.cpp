#include "dummf/nn.hpp"

#include <cmath>

#include "dummf/error.hpp"

namespace dummf {

Tensor& ParamStore::add_normal(const std::string& name, Shape shape, double std, Rng& rng) {
  std::vector<double> data(numel(shape));
  for (auto& x : data) x = std * rng.normal();
  auto [it, fresh] = params_.emplace(name, Tensor::from(std::move(shape), std::move(data), true));
  if (!fresh) throw ConfigError("duplicate parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::add_constant(const std::string& name, Shape shape, double value) {
  std::vector<double> data(numel(shape), value);
  auto [it, fresh] = params_.emplace(name, Tensor::from(std::move(shape), std::move(data), true));
  if (!fresh) throw ConfigError("duplicate parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : params_) out.push_back(k);
  return out;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  for (const auto& [k, v] : params_) out.push_back(v);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params_) n += v.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [k, v] : params_) v.zero_grad();
}

void ParamStore::fill(double value) {
  for (auto& [k, v] : params_) {
    Tensor t = v;
    std::fill(t.mutable_data().begin(), t.mutable_data().end(), value);
  }
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [k, v] : params_)
    out.params_.emplace(k, Tensor::from(v.shape(), std::vector<double>(v.data().begin(), v.data().end()), true));
  return out;
}

void ParamStore::export_to(TensorTable& table) const {
  for (const auto& [k, v] : params_) table[k] = StoredArray{v.shape(), std::vector<double>(v.data().begin(), v.data().end())};
}

void ParamStore::import_from(const TensorTable& table) {
  for (auto& [k, v] : params_) {
    auto it = table.find(k);
    if (it == table.end()) throw LoadError("checkpoint lacks parameter '" + k + "'");
    if (it->second.shape != v.shape())
      throw LoadError("parameter '" + k + "' has shape " + shape_str(it->second.shape) + ", expected " + shape_str(v.shape()));
    Tensor t = v;
    t.mutable_data() = it->second.data;
  }
}

void init_linear(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  ps.add_normal(prefix + ".w", {in, out}, std::sqrt(2.0 / static_cast<double>(in + out)), rng);
  ps.add_constant(prefix + ".b", {1, out}, 0.0);
}

Tensor linear(const ParamStore& ps, const std::string& prefix, const Tensor& x) {
  const Tensor y = matmul(x, ps.get(prefix + ".w"));
  return add(y, tile(ps.get(prefix + ".b"), x.dim(0)));
}

void init_norm(ParamStore& ps, const std::string& prefix, std::size_t d) {
  ps.add_constant(prefix + ".g", {1, d}, 1.0);
  ps.add_constant(prefix + ".b", {1, d}, 0.0);
}

Tensor norm(const ParamStore& ps, const std::string& prefix, const Tensor& x) {
  const std::size_t rows = x.dim(0);
  return add(mul(layer_norm(x, 1), tile(ps.get(prefix + ".g"), rows)), tile(ps.get(prefix + ".b"), rows));
}

void init_attention(ParamStore& ps, const std::string& prefix, std::size_t d, Rng& rng) {
  for (const char* p : {".q", ".k", ".v", ".o"}) init_linear(ps, prefix + p, d, d, rng);
}

Tensor multi_head_attention(const ParamStore& ps, const std::string& prefix, const Tensor& xq, const Tensor& xkv,
                            std::size_t heads, const std::vector<AttnSegment>& segments) {
  const Tensor q = linear(ps, prefix + ".q", xq);
  const Tensor k = linear(ps, prefix + ".k", xkv);
  const Tensor v = linear(ps, prefix + ".v", xkv);
  return linear(ps, prefix + ".o", segmented_attention(q, k, v, heads, segments));
}

namespace {

void init_ffn(ParamStore& ps, const std::string& prefix, const BlockDims& dims, Rng& rng) {
  init_linear(ps, prefix + ".ff1", dims.d_model, dims.ff_dim, rng);
  init_linear(ps, prefix + ".ff2", dims.ff_dim, dims.d_model, rng);
}

Tensor ffn(const ParamStore& ps, const std::string& prefix, const Tensor& x) {
  return linear(ps, prefix + ".ff2", gelu(linear(ps, prefix + ".ff1", x)));
}

}  // namespace

void init_encoder_layer(ParamStore& ps, const std::string& prefix, const BlockDims& dims, Rng& rng) {
  init_norm(ps, prefix + ".ln1", dims.d_model);
  init_attention(ps, prefix + ".attn", dims.d_model, rng);
  init_norm(ps, prefix + ".ln2", dims.d_model);
  init_ffn(ps, prefix, dims, rng);
}

Tensor encoder_layer(const ParamStore& ps, const std::string& prefix, const Tensor& x, const BlockDims& dims,
                     const std::vector<AttnSegment>& segments) {
  const Tensor h = norm(ps, prefix + ".ln1", x);
  const Tensor x1 = add(x, multi_head_attention(ps, prefix + ".attn", h, h, dims.heads, segments));
  return add(x1, ffn(ps, prefix, norm(ps, prefix + ".ln2", x1)));
}

void init_decoder_layer(ParamStore& ps, const std::string& prefix, const BlockDims& dims, Rng& rng) {
  init_norm(ps, prefix + ".ln1", dims.d_model);
  init_attention(ps, prefix + ".self", dims.d_model, rng);
  init_norm(ps, prefix + ".ln2", dims.d_model);
  init_attention(ps, prefix + ".cross", dims.d_model, rng);
  init_norm(ps, prefix + ".ln3", dims.d_model);
  init_ffn(ps, prefix, dims, rng);
}

Tensor decoder_layer(const ParamStore& ps, const std::string& prefix, const Tensor& x, const Tensor& memory,
                     const BlockDims& dims, const std::vector<AttnSegment>& self_segments,
                     const std::vector<AttnSegment>& cross_segments) {
  const Tensor h1 = norm(ps, prefix + ".ln1", x);
  const Tensor x1 = add(x, multi_head_attention(ps, prefix + ".self", h1, h1, dims.heads, self_segments));
  const Tensor h2 = norm(ps, prefix + ".ln2", x1);
  const Tensor x2 = add(x1, multi_head_attention(ps, prefix + ".cross", h2, memory, dims.heads, cross_segments));
  return add(x2, ffn(ps, prefix, norm(ps, prefix + ".ln3", x2)));
}

Tensor sinusoidal_encoding(const std::vector<double>& positions, std::size_t d) {
  std::vector<double> data(positions.size() * d);
  for (std::size_t r = 0; r < positions.size(); ++r)
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      data[r * d + i] = i % 2 == 0 ? std::sin(positions[r] * freq) : std::cos(positions[r] * freq);
    }
  return Tensor::from({positions.size(), d}, std::move(data));
}

std::vector<AttnSegment> block_segments(std::size_t blocks, std::size_t len) {
  std::vector<AttnSegment> out;
  out.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) out.push_back({b * len, len, b * len, len});
  return out;
}

}  // namespace dummf
