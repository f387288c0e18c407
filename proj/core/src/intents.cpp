#include "dummf/intents.hpp"

#include <numeric>

#include "dummf/error.hpp"

namespace dummf {

Codebook Codebook::init(std::size_t codes, std::size_t code_dim, Rng& rng, double std) {
  if (codes == 0 || code_dim == 0) throw ConfigError("codebook needs at least one entry and a positive width");
  std::vector<double> data(codes * code_dim);
  for (auto& x : data) x = std * rng.normal();
  return {Tensor::from({codes, code_dim}, std::move(data), true)};
}

std::vector<std::size_t> IntentBatch::flat_indices() const {
  std::vector<std::size_t> out;
  out.reserve(M * N);
  for (const auto& row : discrete_indices) out.insert(out.end(), row.begin(), row.end());
  return out;
}

Tensor IntentBatch::continuous_tensor() const { return Tensor::from({M * N, dim}, continuous); }

namespace {

// First `count` entries of a partial Fisher-Yates shuffle of 0..n-1.
std::vector<std::size_t> draw_distinct(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

IntentBatch prepare(const Codebook& codebook, std::size_t M, std::size_t N, IntentMode mode) {
  if (M == 0 || N == 0) throw UsageError("intent sampling needs M >= 1 and N >= 1");
  if (M > codebook.size())
    throw UsageError("cannot draw " + std::to_string(M) + " distinct intents from a codebook of " +
                     std::to_string(codebook.size()));
  IntentBatch b;
  b.mode = mode;
  b.M = M;
  b.N = N;
  b.dim = codebook.dim();
  b.discrete_indices.assign(M, std::vector<std::size_t>(N, 0));
  return b;
}

void draw_noise(IntentBatch& b, Rng& rng) {
  b.continuous.resize(b.M * b.N * b.dim);
  for (auto& x : b.continuous) x = rng.normal();
}

}  // namespace

IntentBatch sample_local(const Codebook& codebook, std::size_t M, std::size_t N, Rng& rng) {
  IntentBatch b = prepare(codebook, M, N, IntentMode::local);
  for (std::size_t n = 0; n < N; ++n) {
    const auto idx = draw_distinct(codebook.size(), M, rng);
    for (std::size_t m = 0; m < M; ++m) b.discrete_indices[m][n] = idx[m];
  }
  draw_noise(b, rng);
  return b;
}

IntentBatch sample_global(const Codebook& codebook, std::size_t M, std::size_t N, Rng& rng) {
  IntentBatch b = prepare(codebook, M, N, IntentMode::global);
  const auto idx = draw_distinct(codebook.size(), M, rng);
  for (std::size_t m = 0; m < M; ++m) b.discrete_indices[m].assign(N, idx[m]);
  draw_noise(b, rng);
  return b;
}

Tensor combine(const Tensor& continuous, const Tensor& codebook, const std::vector<std::size_t>& indices) {
  if (continuous.rank() != 2 || codebook.rank() != 2 || continuous.dim(0) != indices.size() ||
      continuous.dim(1) != codebook.dim(1))
    throw ShapeError("combine: noise " + shape_str(continuous.shape()) + " does not fit " +
                     std::to_string(indices.size()) + " indices into codebook " + shape_str(codebook.shape()));
  return add(continuous, index_rows(codebook, indices));
}

Tensor combine(const IntentBatch& batch, const Codebook& codebook) {
  return combine(batch.continuous_tensor(), codebook.entries, batch.flat_indices());
}

}  // namespace dummf
