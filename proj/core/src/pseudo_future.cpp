#include "dummf/pseudo_future.hpp"

#include <algorithm>
#include <cmath>

#include "dummf/error.hpp"
#include "dummf/kabsch.hpp"

namespace dummf {

std::size_t PseudoFutureSet::index_of(const FutureKey& key) const {
  if (key.scene >= scene_offset_.size() || key.start < min_history_ ||
      key.start - min_history_ >= scene_starts_[key.scene])
    throw UsageError("window is not part of the pseudo-future index");
  const std::size_t i = scene_offset_[key.scene] + key.person * scene_starts_[key.scene] + (key.start - min_history_);
  if (i >= entries_.size() || !(entries_[i] == key)) throw UsageError("window is not part of the pseudo-future index");
  return i;
}

PseudoFutureSet build_pseudo_futures(const std::vector<Scene>& scenes, std::size_t future_len, double eps,
                                     std::size_t max_per_entry, std::size_t min_history) {
  if (future_len == 0 || min_history == 0) throw UsageError("pseudo futures need future_len and min_history >= 1");
  if (!(eps >= 0)) throw UsageError("eps must be non-negative");
  PseudoFutureSet set;
  set.future_len_ = future_len;
  set.min_history_ = min_history;
  std::vector<Joints> anchors;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto& sc = scenes[s];
    const std::size_t starts = sc.length() >= min_history + future_len ? sc.length() - future_len - min_history + 1 : 0;
    set.scene_offset_.push_back(set.entries_.size());
    set.scene_starts_.push_back(starts);
    for (std::size_t n = 0; n < sc.person_count(); ++n)
      for (std::size_t k = 0; k < starts; ++k) {
        const std::size_t start = min_history + k;
        set.entries_.push_back({s, n, start});
        anchors.push_back(sc.persons()[n][start - 1].joints());
      }
  }

  // |a_i - R b_i - t| >= ||a_i - ca| - |b_i - cb|| per joint, so comparing
  // centroid radii rules out most pairs before any SVD.
  const std::size_t E = anchors.size();
  std::vector<Eigen::VectorXd> radii(E);
  for (std::size_t i = 0; i < E; ++i) {
    const Eigen::RowVector3d c = anchors[i].colwise().mean();
    radii[i] = (anchors[i].rowwise() - c).rowwise().norm();
  }
  const bool everything = std::isinf(eps);
  std::vector<std::vector<std::pair<double, std::size_t>>> found(E);
  for (std::size_t i = 0; i < E; ++i) {
    found[i].emplace_back(-1.0, i);
    for (std::size_t j = i + 1; j < E; ++j) {
      if (radii[i].size() != radii[j].size()) continue;
      double res;
      if (everything) {
        res = max_per_entry ? kabsch_align(anchors[i], anchors[j]).residual : 0.0;
      } else {
        if ((radii[i] - radii[j]).norm() > eps) continue;
        res = kabsch_align(anchors[i], anchors[j]).residual;
        if (!(res <= eps)) continue;
      }
      found[i].emplace_back(res, j);
      found[j].emplace_back(res, i);
    }
  }
  set.matches_.resize(E);
  for (std::size_t i = 0; i < E; ++i) {
    auto& f = found[i];
    std::sort(f.begin(), f.end());
    if (max_per_entry && f.size() > max_per_entry) f.resize(max_per_entry);
    for (const auto& [r, j] : f) set.matches_[i].push_back(j);
  }
  return set;
}

std::vector<Joints> future_residuals(const std::vector<Scene>& scenes, const FutureKey& key, std::size_t future_len) {
  const auto& track = scenes.at(key.scene).persons().at(key.person);
  if (key.start == 0 || key.start + future_len > track.size()) throw UsageError("future window out of range");
  return residuals(track.slice(key.start, future_len), track[key.start - 1]);
}

}  // namespace dummf
