#include "dummf/motion.hpp"

#include <algorithm>
#include <numeric>

#include "dummf/error.hpp"

namespace dummf {

namespace {

std::string shape_msg(const char* op, std::size_t want, std::size_t got) {
  return std::string(op) + ": expected " + std::to_string(want) + " joints, got " +
         std::to_string(got);
}

}  // namespace

SkeletonSpec::SkeletonSpec(std::size_t joint_count, std::vector<Edge> edges,
                           std::size_t root_index, std::array<std::size_t, 2> foot_indices,
                           double unit_scale, std::vector<std::string> joint_names)
    : joint_count_(joint_count),
      edges_(std::move(edges)),
      root_index_(root_index),
      foot_indices_(foot_indices),
      unit_scale_(unit_scale),
      joint_names_(std::move(joint_names)) {
  if (joint_count_ < 2) throw ConfigError("skeleton needs at least 2 joints");
  if (root_index_ >= joint_count_ || foot_indices_[0] >= joint_count_ ||
      foot_indices_[1] >= joint_count_)
    throw ConfigError("skeleton root/foot index out of range");
  if (!(unit_scale_ > 0)) throw ConfigError("skeleton unit_scale must be positive");
  if (!joint_names_.empty() && joint_names_.size() != joint_count_)
    throw ConfigError("skeleton joint_names length differs from joint_count");
  // A tree over V joints has V-1 edges and connects everything.
  if (edges_.size() != joint_count_ - 1) throw ConfigError("skeleton edges do not form a tree");
  std::vector<std::size_t> parent(joint_count_);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Edge& e : edges_) {
    if (e.a >= joint_count_ || e.b >= joint_count_) throw ConfigError("skeleton edge index out of range");
    const auto ra = find(e.a), rb = find(e.b);
    if (ra == rb) throw ConfigError("skeleton edges contain a cycle");
    parent[ra] = rb;
  }
}

const SkeletonSpec& SkeletonSpec::canonical() {
  static const SkeletonSpec spec(
      kCanonicalJoints,
      {{0, 1}, {1, 2}, {1, 3}, {3, 4}, {4, 5}, {1, 6}, {6, 7}, {7, 8},
       {0, 9}, {9, 10}, {10, 11}, {0, 12}, {12, 13}, {13, 14}},
      0, {11, 14}, 1.0,
      {"pelvis", "thorax", "head", "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow",
       "r_wrist", "l_hip", "l_knee", "l_ankle", "r_hip", "r_knee", "r_ankle"});
  return spec;
}

std::size_t SkeletonSpec::joint_index(const std::string& name) const {
  auto it = std::find(joint_names_.begin(), joint_names_.end(), name);
  if (it == joint_names_.end()) throw ConfigError("unknown joint '" + name + "'");
  return static_cast<std::size_t>(it - joint_names_.begin());
}

Pose::Pose(Joints joints) : joints_(std::move(joints)) {
  if (joints_.rows() == 0) throw ShapeError("pose must have at least one joint");
  if (!joints_.allFinite()) throw ShapeError("pose coordinates must be finite");
}

Pose Pose::zeros(std::size_t joint_count) {
  return Pose(Joints::Zero(static_cast<Eigen::Index>(joint_count), 3));
}

Pose Pose::from_flat(std::span<const double> flat) {
  if (flat.empty() || flat.size() % 3 != 0)
    throw ShapeError("flat pose length must be a positive multiple of 3");
  Joints j(static_cast<Eigen::Index>(flat.size() / 3), 3);
  std::copy(flat.begin(), flat.end(), j.data());
  return Pose(std::move(j));
}

Track::Track(std::vector<Pose> frames, double fps) : frames_(std::move(frames)), fps_(fps) {
  if (frames_.empty()) throw ShapeError("track must have at least one frame");
  if (!(fps_ > 0)) throw ShapeError("track fps must be positive");
  const auto v = frames_.front().joint_count();
  for (const auto& p : frames_)
    if (p.joint_count() != v) throw ShapeError(shape_msg("Track", v, p.joint_count()));
}

Track Track::slice(std::size_t begin, std::size_t count) const {
  if (count == 0 || begin + count > frames_.size())
    throw ShapeError("Track::slice out of range");
  return Track(std::vector<Pose>(frames_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 frames_.begin() + static_cast<std::ptrdiff_t>(begin + count)),
               fps_);
}

Track Track::concat(const Track& tail) const {
  if (tail.joint_count() != joint_count()) throw ShapeError(shape_msg("Track::concat", joint_count(), tail.joint_count()));
  if (tail.fps() != fps_) throw ShapeError("Track::concat: fps mismatch");
  std::vector<Pose> all = frames_;
  all.insert(all.end(), tail.frames_.begin(), tail.frames_.end());
  return Track(std::move(all), fps_);
}

Scene::Scene(std::vector<Track> persons, std::size_t history_len, std::size_t future_len,
             std::vector<std::string> ids)
    : persons_(std::move(persons)),
      history_len_(history_len),
      future_len_(future_len),
      ids_(std::move(ids)) {
  if (persons_.empty()) throw ShapeError("scene needs at least one person");
  if (history_len_ == 0) throw ShapeError("scene history_len must be positive");
  const auto& first = persons_.front();
  for (const auto& t : persons_) {
    if (t.size() != history_len_ + future_len_)
      throw ShapeError("scene track length " + std::to_string(t.size()) + " != history_len + future_len (" +
                       std::to_string(history_len_ + future_len_) + ")");
    if (t.fps() != first.fps()) throw ShapeError("scene tracks have different fps");
    if (t.joint_count() != first.joint_count()) throw ShapeError("scene tracks have different joint counts");
  }
  if (ids_.empty()) {
    for (std::size_t n = 0; n < persons_.size(); ++n) ids_.push_back("p" + std::to_string(n));
  } else if (ids_.size() != persons_.size()) {
    throw ShapeError("scene ids length differs from person count");
  }
}

std::vector<Track> Scene::histories() const {
  std::vector<Track> out;
  out.reserve(persons_.size());
  for (std::size_t n = 0; n < persons_.size(); ++n) out.push_back(history(n));
  return out;
}

std::vector<Track> Scene::futures() const {
  if (future_len_ == 0) throw ShapeError("scene has no future frames");
  std::vector<Track> out;
  out.reserve(persons_.size());
  for (std::size_t n = 0; n < persons_.size(); ++n) out.push_back(future(n));
  return out;
}

Scene Scene::window(std::size_t begin, std::size_t history, std::size_t future) const {
  std::vector<Track> tracks;
  tracks.reserve(persons_.size());
  for (const auto& t : persons_) tracks.push_back(t.slice(begin, history + future));
  return Scene(std::move(tracks), history, future, ids_);
}

PredictionSet::PredictionSet(std::vector<std::vector<Track>> predictions,
                             std::vector<std::vector<std::size_t>> source_intents)
    : predictions_(std::move(predictions)), source_intents_(std::move(source_intents)) {
  if (predictions_.empty() || predictions_.front().empty())
    throw ShapeError("prediction set needs M >= 1 and N >= 1");
  const auto n = predictions_.front().size();
  const auto len = predictions_.front().front().size();
  for (const auto& row : predictions_) {
    if (row.size() != n) throw ShapeError("prediction set rows have different person counts");
    for (const auto& t : row)
      if (t.size() != len) throw ShapeError("prediction tracks have different lengths");
  }
  if (source_intents_.size() != predictions_.size())
    throw ShapeError("source_intents must have one entry per candidate");
  for (const auto& row : source_intents_)
    if (row.size() != n) throw ShapeError("source_intents rows must have one entry per person");
}

std::vector<Joints> residuals(const Track& track, const Pose& anchor) {
  if (anchor.joint_count() != track.joint_count())
    throw ShapeError(shape_msg("residuals", track.joint_count(), anchor.joint_count()));
  std::vector<Joints> out;
  out.reserve(track.size());
  out.push_back(track[0].joints() - anchor.joints());
  for (std::size_t t = 1; t < track.size(); ++t) out.push_back(track[t].joints() - track[t - 1].joints());
  return out;
}

Track integrate_residuals(const Pose& anchor, const std::vector<Joints>& deltas, double fps) {
  if (deltas.empty()) throw ShapeError("integrate_residuals: no deltas");
  std::vector<Pose> frames;
  frames.reserve(deltas.size());
  Joints cur = anchor.joints();
  for (const auto& d : deltas) {
    if (d.rows() != cur.rows())
      throw ShapeError(shape_msg("integrate_residuals", anchor.joint_count(), static_cast<std::size_t>(d.rows())));
    cur += d;
    frames.emplace_back(cur);
  }
  return Track(std::move(frames), fps);
}

RootSplit split_root_pose(const Track& track, const SkeletonSpec& skel) {
  if (track.joint_count() != skel.joint_count())
    throw ShapeError(shape_msg("split_root_pose", skel.joint_count(), track.joint_count()));
  const auto r = static_cast<Eigen::Index>(skel.root_index());
  RootSplit out{Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>(static_cast<Eigen::Index>(track.size()), 3),
                track};
  std::vector<Pose> local;
  local.reserve(track.size());
  for (std::size_t t = 0; t < track.size(); ++t) {
    const auto& j = track[t].joints();
    out.root.row(static_cast<Eigen::Index>(t)) = j.row(r);
    Joints l = j.rowwise() - j.row(r);
    l.row(r).setZero();
    local.emplace_back(std::move(l));
  }
  out.local = Track(std::move(local), track.fps());
  return out;
}

std::vector<double> limb_lengths(const Pose& pose, const SkeletonSpec& skel) {
  if (pose.joint_count() != skel.joint_count())
    throw ShapeError(shape_msg("limb_lengths", skel.joint_count(), pose.joint_count()));
  std::vector<double> out;
  out.reserve(skel.edges().size());
  for (const Edge& e : skel.edges()) out.push_back((pose.joint(e.a) - pose.joint(e.b)).norm());
  return out;
}

}  // namespace dummf
