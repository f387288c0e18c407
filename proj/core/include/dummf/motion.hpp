#pragma once

// Canonical data model: skeletons, poses, tracks, multi-person scenes.
//
// Coordinates are meters, Y is up, the ground plane is y = 0. Every type here
// validates on construction and is immutable afterwards.

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dummf {

// V x 3 joint coordinates, row-major so the flat layout is x0 y0 z0 x1 ...
using Joints = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct Edge {
  std::size_t a;
  std::size_t b;
  bool operator==(const Edge&) const = default;
};

class SkeletonSpec {
 public:
  SkeletonSpec(std::size_t joint_count, std::vector<Edge> edges, std::size_t root_index,
               std::array<std::size_t, 2> foot_indices, double unit_scale = 1.0,
               std::vector<std::string> joint_names = {});

  // The 15-joint skeleton used throughout the library:
  //
  //   0 pelvis (root)   5 l_wrist     10 l_knee
  //   1 thorax          6 r_shoulder  11 l_ankle (foot)
  //   2 head            7 r_elbow     12 r_hip
  //   3 l_shoulder      8 r_wrist     13 r_knee
  //   4 l_elbow         9 l_hip       14 r_ankle (foot)
  static const SkeletonSpec& canonical();
  static constexpr std::size_t kCanonicalJoints = 15;

  std::size_t joint_count() const { return joint_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t root_index() const { return root_index_; }
  const std::array<std::size_t, 2>& foot_indices() const { return foot_indices_; }
  double unit_scale() const { return unit_scale_; }
  const std::vector<std::string>& joint_names() const { return joint_names_; }
  // Index of a named joint; throws ConfigError if unknown.
  std::size_t joint_index(const std::string& name) const;

 private:
  std::size_t joint_count_;
  std::vector<Edge> edges_;
  std::size_t root_index_;
  std::array<std::size_t, 2> foot_indices_;
  double unit_scale_;
  std::vector<std::string> joint_names_;
};

class Pose {
 public:
  Pose() = default;
  explicit Pose(Joints joints);
  static Pose zeros(std::size_t joint_count);
  // Builds from a flat x0 y0 z0 x1 ... buffer of length 3V.
  static Pose from_flat(std::span<const double> flat);

  std::size_t joint_count() const { return static_cast<std::size_t>(joints_.rows()); }
  const Joints& joints() const { return joints_; }
  Eigen::Vector3d joint(std::size_t i) const { return joints_.row(static_cast<Eigen::Index>(i)).transpose(); }
  std::span<const double> flat() const { return {joints_.data(), static_cast<std::size_t>(joints_.size())}; }

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.joints_.rows() == b.joints_.rows() && a.joints_ == b.joints_;
  }

 private:
  Joints joints_;
};

class Track {
 public:
  Track(std::vector<Pose> frames, double fps);

  std::size_t size() const { return frames_.size(); }
  std::size_t joint_count() const { return frames_.front().joint_count(); }
  double fps() const { return fps_; }
  const std::vector<Pose>& frames() const { return frames_; }
  const Pose& operator[](std::size_t t) const { return frames_[t]; }
  const Pose& back() const { return frames_.back(); }

  // Frames [begin, begin + count).
  Track slice(std::size_t begin, std::size_t count) const;
  // This track followed by `tail` (same fps and V).
  Track concat(const Track& tail) const;

  friend bool operator==(const Track& a, const Track& b) {
    return a.fps_ == b.fps_ && a.frames_ == b.frames_;
  }

 private:
  std::vector<Pose> frames_;
  double fps_;
};

class Scene {
 public:
  // ids default to "p0", "p1", ... when empty.
  Scene(std::vector<Track> persons, std::size_t history_len, std::size_t future_len,
        std::vector<std::string> ids = {});

  std::size_t person_count() const { return persons_.size(); }
  std::size_t history_len() const { return history_len_; }
  std::size_t future_len() const { return future_len_; }
  std::size_t length() const { return history_len_ + future_len_; }
  double fps() const { return persons_.front().fps(); }
  std::size_t joint_count() const { return persons_.front().joint_count(); }
  const std::vector<Track>& persons() const { return persons_; }
  const std::vector<std::string>& ids() const { return ids_; }

  Track history(std::size_t n) const { return persons_[n].slice(0, history_len_); }
  Track future(std::size_t n) const { return persons_[n].slice(history_len_, future_len_); }
  std::vector<Track> histories() const;
  std::vector<Track> futures() const;

  // Sub-window [begin, begin + history + future) re-split at `history`.
  Scene window(std::size_t begin, std::size_t history, std::size_t future) const;

  friend bool operator==(const Scene& a, const Scene& b) {
    return a.history_len_ == b.history_len_ && a.future_len_ == b.future_len_ &&
           a.persons_ == b.persons_ && a.ids_ == b.ids_;
  }

 private:
  std::vector<Track> persons_;
  std::size_t history_len_;
  std::size_t future_len_;
  std::vector<std::string> ids_;
};

// M candidate futures for N persons. source_intents[m][n] is the codebook row
// that produced prediction (m, n).
class PredictionSet {
 public:
  PredictionSet(std::vector<std::vector<Track>> predictions,
                std::vector<std::vector<std::size_t>> source_intents);

  std::size_t candidate_count() const { return predictions_.size(); }
  std::size_t person_count() const { return predictions_.front().size(); }
  std::size_t future_len() const { return predictions_.front().front().size(); }
  const Track& at(std::size_t m, std::size_t n) const { return predictions_[m][n]; }
  const std::vector<std::vector<Track>>& predictions() const { return predictions_; }
  const std::vector<std::vector<std::size_t>>& source_intents() const { return source_intents_; }

 private:
  std::vector<std::vector<Track>> predictions_;
  std::vector<std::vector<std::size_t>> source_intents_;
};

// out[0] = frames[0] - anchor, out[t] = frames[t] - frames[t-1].
std::vector<Joints> residuals(const Track& track, const Pose& anchor);

// Inverse of residuals(): cumulative sum starting at anchor.
Track integrate_residuals(const Pose& anchor, const std::vector<Joints>& deltas, double fps);

struct RootSplit {
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> root;  // T x 3
  Track local;                                                     // root joint identically 0
};
RootSplit split_root_pose(const Track& track, const SkeletonSpec& skel);

// Euclidean length of each skeleton edge, in skel.edges() order.
std::vector<double> limb_lengths(const Pose& pose, const SkeletonSpec& skel);

}  // namespace dummf
