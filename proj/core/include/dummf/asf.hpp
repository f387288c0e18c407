#pragma once

// Acclaim ASF skeleton / AMC motion parsing and forward kinematics, following
// the CMU motion-capture conventions.

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dummf/motion.hpp"

namespace dummf {

enum class Axis { X, Y, Z };

// One rotational channel. ASF Euler angles are applied in declaration order,
// i.e. for "rx ry rz" the rotation is Rz * Ry * Rx.
struct Channel {
  bool translation = false;
  Axis axis = Axis::X;
};

struct AsfBone {
  std::string name;
  Eigen::Vector3d direction = Eigen::Vector3d::Zero();  // unit vector, global rest frame
  double length = 0;                                    // file units
  Eigen::Matrix3d axis = Eigen::Matrix3d::Identity();   // rest-frame rotation C
  std::vector<Axis> dofs;                               // rotational channels in file order
  std::string parent;                                   // "root" for top-level bones
  std::vector<std::string> children;
};

struct AsfRoot {
  std::vector<Channel> order;                            // AMC channel layout for "root"
  Eigen::Matrix3d axis = Eigen::Matrix3d::Identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d orientation = Eigen::Vector3d::Zero();  // radians
  std::vector<std::string> children;
};

struct AsfSkeleton {
  double mass = 1.0;
  double length_unit = 1.0;   // lengths in the file are divided by this
  bool degrees = true;        // angle unit declared by :units
  AsfRoot root;
  std::vector<AsfBone> bones;  // :bonedata order

  const AsfBone& bone(const std::string& name) const;
  std::size_t bone_index(const std::string& name) const;
  // Bones reachable from the root, parents before children.
  std::vector<std::size_t> traversal() const;
  // Longest root-to-leaf chain counted in bones.
  std::size_t depth() const;
};

struct AmcClip {
  // Per frame: bone name -> channel values (root: per AsfRoot::order, others
  // per AsfBone::dofs). Angles are stored in radians.
  std::vector<std::unordered_map<std::string, std::vector<double>>> frames;
  double fps = 120.0;
};

// Positions of "root" followed by the end point of every reachable bone.
struct RawTrack {
  std::vector<std::string> joint_names;
  Track track;
};

AsfSkeleton parse_asf(std::string_view text);
AmcClip parse_amc(std::string_view text, const AsfSkeleton& skel, double fps = 120.0);
RawTrack forward_kinematics(const AsfSkeleton& skel, const AmcClip& clip);

// Rotation applying the given axes in order: angles[0] about axes[0] first.
Eigen::Matrix3d euler_rotation(const std::vector<Axis>& axes, const std::vector<double>& angles);

}  // namespace dummf
