#pragma once

// Raw mocap joints -> the canonical 15-joint skeleton, and frame-rate
// conversion.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dummf/asf.hpp"
#include "dummf/motion.hpp"

namespace dummf {

// Canonical joint name -> raw joint names whose positions are averaged.
//
// On disk: {"pelvis": ["root"], "l_hip": ["lhipjoint"], ...}. Keys starting
// with '_' are metadata: "_version" (integer) and "_unit_scale" (meters per raw
// unit, default 1).
struct MappingTable {
  std::map<std::string, std::vector<std::string>> joints;
  double unit_scale = 1.0;
  int version = 1;

  static MappingTable from_json(std::string_view text);
  std::string to_json() const;
};

// Applies `mapping` for every joint of SkeletonSpec::canonical(). Throws
// ConfigError when a canonical joint is unmapped or refers to an unknown raw
// joint.
Track to_canonical(const RawTrack& raw, const MappingTable& mapping);

// Linear interpolation at i * (1 / target_fps); the output has
// ceil(size * target_fps / fps) frames and its first frame is the input's
// first frame. Samples past the last input frame hold the last frame.
Track resample(const Track& track, double target_fps);

}  // namespace dummf
