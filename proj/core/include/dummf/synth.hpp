#pragma once

// Multi-person scene construction: composing 1- and 2-person clips into
// larger scenes, and procedurally generated walking scenes for training runs
// that do not have mocap data at hand.

#include <cstdint>
#include <string_view>
#include <vector>

#include "dummf/motion.hpp"
#include "dummf/rng.hpp"

namespace dummf {

struct SceneSynthConfig {
  std::size_t persons_per_scene = 3;
  double min_pair_distance = 0.5;  // m, root-to-root, every frame
  double placement_radius = 3.0;   // m, planar offsets drawn uniformly from this disk
  std::uint64_t rng_seed = 0;
  std::size_t max_rejection_tries = 1000;
  std::size_t future_len = 0;  // frames of the composed scene marked as future

  void validate() const;
};

// A clip group: one track (single person) or two tracks recorded together.
using ClipGroup = std::vector<Track>;

// Takes groups in order (skipping any that would overshoot N) until N persons
// are collected, trims them to a common length, and translates each group by
// a random planar offset until no two roots come closer than
// min_pair_distance at any frame. Throws SynthesisError after
// max_rejection_tries failed candidates.
Scene synthesize_scene(const std::vector<ClipGroup>& groups, const SceneSynthConfig& cfg, Rng& rng);
Scene synthesize_scene(const std::vector<ClipGroup>& groups, const SceneSynthConfig& cfg);

// Smallest root-to-root distance over all frames and person pairs.
double min_root_distance(const Scene& scene, std::size_t root_index = 0);

// Parameters of the procedural walking generator.
//
// Scenes come in groups of `branches`: every scene in a group shares the
// same history (bit-identical) and the persons then all turn by the same
// branch-specific heading offset at `branch_frame`, so each history has
// `branches` distinct, socially consistent continuations.
struct SyntheticSpec {
  std::size_t scene_count = 64;
  std::size_t persons = 3;
  std::size_t history_len = 45;
  std::size_t future_len = 15;
  double fps = 15.0;
  std::size_t branches = 2;
  std::size_t branch_frame = 0;      // 0 -> history_len
  double speed_min = 0.8;            // m/s
  double speed_max = 1.4;
  double turn_angle = 0.8;           // rad, spread of the branch offsets
  double turn_distance = 0.8;        // m walked while executing a branch turn
  double curved_fraction = 0.5;      // share of persons on curved paths
  double curvature_max = 0.25;       // rad/m for curved paths
  double oscillation_amplitude = 0.45;  // rad, leg swing
  double step_frequency = 0.9;       // gait cycles per second
  double body_scale_min = 0.9;
  double body_scale_max = 1.1;
  double spacing = 1.6;              // m between neighbours at the start
  double jitter_std = 0.0;           // m, per-coordinate measurement noise

  void validate() const;
  static SyntheticSpec from_json(std::string_view text);
};

// Deterministic in `seed`; group g draws from Rng::stream(seed, g).
std::vector<Scene> synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace dummf
