#pragma once

// Discrete learnable intent codes plus continuous Gaussian noise.
//
// Local mode draws an independent codebook row per person; global mode draws
// one row per candidate m and shares it across all persons. The continuous
// part is per (m, n) in both modes.

#include <cstddef>
#include <vector>

#include "dummf/rng.hpp"
#include "dummf/tensor.hpp"

namespace dummf {

enum class IntentMode { local, global };

struct Codebook {
  Tensor entries;  // [M_codes, code_dim], requires grad

  static Codebook init(std::size_t codes, std::size_t code_dim, Rng& rng, double std = 0.02);
  std::size_t size() const { return entries.dim(0); }
  std::size_t dim() const { return entries.dim(1); }
};

struct IntentBatch {
  IntentMode mode = IntentMode::local;
  std::size_t M = 0, N = 0, dim = 0;
  std::vector<std::vector<std::size_t>> discrete_indices;  // [m][n]
  std::vector<double> continuous;                          // row (m * N + n), dim wide

  // Row-major (m, n) flattening of discrete_indices.
  std::vector<std::size_t> flat_indices() const;
  Tensor continuous_tensor() const;
};

// Per person, M distinct rows drawn without replacement; then M*N normals.
IntentBatch sample_local(const Codebook& codebook, std::size_t M, std::size_t N, Rng& rng);
// M distinct rows shared across persons; then M*N normals.
IntentBatch sample_global(const Codebook& codebook, std::size_t M, std::size_t N, Rng& rng);

// continuous + codebook[indices], differentiable into the codebook.
Tensor combine(const Tensor& continuous, const Tensor& codebook, const std::vector<std::size_t>& indices);
Tensor combine(const IntentBatch& batch, const Codebook& codebook);

}  // namespace dummf
