#pragma once

// Training objectives. Predictions are row-stacked in slot order (b, m, n):
// B scenes, M candidates, N persons, one row per (b, m, n) holding T frames
// of V*3 coordinates (or residuals). Per-person targets are rows b * N + n.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dummf/motion.hpp"
#include "dummf/tensor.hpp"

namespace dummf {

struct LossWeights {
  double local_recon = 1.0;    // lR
  double limb = 1.0;           // L
  double multimodal = 0.5;     // mmR
  double diversity = 0.1;      // D
  double local_gan = 0.1;      // lGAN
  double global_recon = 1.0;   // gR
  double global_gan = 0.1;     // gGAN
};

struct LossConfig {
  double alpha = 50.0;   // root-trajectory diversity scale
  double beta = 100.0;   // pose diversity scale
  double eps_pseudo = 0.1;       // m, Kabsch residual threshold for pseudo futures
  std::size_t max_pseudo = 8;    // per history, nearest first; 0 = unlimited
  LossWeights weights;

  void validate() const;
  std::string to_json() const;
  static LossConfig from_json(std::string_view text);
};

struct SlotLayout {
  std::size_t scenes = 1, M = 1, persons = 1;
  std::size_t slots() const { return scenes * M * persons; }
  std::size_t slot(std::size_t b, std::size_t m, std::size_t n) const { return (b * M + m) * persons + n; }
  std::size_t owner(std::size_t slot) const { return (slot / (M * persons)) * persons + slot % persons; }
};

// mean_b (1/N) sum_n min_m ||pred - target||^2
Tensor loss_local_recon(const Tensor& pred, const Tensor& target, const SlotLayout& layout);
// mean_b min_m (1/N) sum_n ||pred - target||^2
Tensor loss_global_recon(const Tensor& pred, const Tensor& target, const SlotLayout& layout);

// Alternative target residuals, each row owned by person row b * N + n.
struct PseudoTargets {
  Tensor residuals;                // [R, F]
  std::vector<std::size_t> owner;  // size R
};
// mean_b (1/N) sum_n (1/P_n) sum_p min_m ||pred - pseudo_p||^2
Tensor loss_multimodal_recon(const Tensor& pred, const PseudoTargets& pseudo, const SlotLayout& layout);

// (1/(B N M)) sum over slots, frames and edges of (predicted length - target)^2.
// target_lengths[b * N + n][e] in skel.edges() order.
Tensor loss_limb(const Tensor& abs, const std::vector<std::vector<double>>& target_lengths, const SlotLayout& layout,
                 std::size_t frames, const SkeletonSpec& skel);

// (1/(B N M (M-1))) sum_{b,n} sum_{m<k} exp(-|root_m - root_k|^2 / alpha) + exp(-|pose_m - pose_k|^2 / beta),
// root = root-joint trajectory, pose = root-relative joints.
Tensor loss_diversity(const Tensor& abs, const SlotLayout& layout, std::size_t frames, const SkeletonSpec& skel,
                      double alpha, double beta);

// Least-squares GAN terms over score tensors of any shape.
struct GanTerms {
  Tensor generator;      // mean (D(fake) - 1)^2
  Tensor discriminator;  // mean D(fake)^2 + mean (D(real) - 1)^2
};
Tensor lsgan_generator(const Tensor& fake_scores);
Tensor lsgan_discriminator(const Tensor& fake_scores, const Tensor& real_scores);
GanTerms lsgan_terms(const Tensor& fake_scores, const Tensor& real_scores);

}  // namespace dummf
