#pragma once

// Local discriminator: one person's motion plus foot velocities, scored per
// frame. Global discriminator: all persons of a scene attended jointly and
// pooled into one score, with no person-identity features.
//
// Tracks are rows [K, T*V*3] of absolute coordinates.

#include <string>
#include <string_view>

#include "dummf/motion.hpp"
#include "dummf/nn.hpp"

namespace dummf {

struct DiscriminatorConfig {
  std::size_t layers = 2;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t ff_dim = 128;

  void validate() const;
  std::string to_json() const;
  static DiscriminatorConfig from_json(std::string_view text);
  BlockDims dims() const { return {d_model, heads, ff_dim}; }
};

// Parameter names start with "disc.local." / "disc.global.".
ParamStore init_local_discriminator(const DiscriminatorConfig& cfg, const SkeletonSpec& skel, Rng& rng);
ParamStore init_global_discriminator(const DiscriminatorConfig& cfg, const SkeletonSpec& skel, Rng& rng);

// Per-frame features [K*T, V*3 + 6]: coordinates (planar-centred on the
// first-frame root, or on the scene centroid when group > 1) followed by the
// frame differences of both foot joints, zero at frame 0.
Tensor discriminator_features(const Tensor& tracks, std::size_t frames, const SkeletonSpec& skel, std::size_t group = 1);

// Scores [K, T].
Tensor discriminator_local_forward(const ParamStore& ps, const DiscriminatorConfig& cfg, const Tensor& tracks,
                                   std::size_t frames, const SkeletonSpec& skel);
// tracks hold K scenes of N consecutive person rows; scores [K, 1].
Tensor discriminator_global_forward(const ParamStore& ps, const DiscriminatorConfig& cfg, const Tensor& tracks,
                                    std::size_t persons, std::size_t frames, const SkeletonSpec& skel);

}  // namespace dummf
