#pragma once

// Pseudo futures: for every candidate window end in a dataset, the futures of
// all windows whose start pose (last history frame) aligns with it under a
// rigid motion within eps. Futures are kept unaligned, as residuals against
// their own start pose.

#include <cstddef>
#include <vector>

#include "dummf/motion.hpp"

namespace dummf {

struct FutureKey {
  std::size_t scene, person, start;  // start = index of the first future frame
  bool operator==(const FutureKey&) const = default;
};

class PseudoFutureSet {
 public:
  std::size_t future_len() const { return future_len_; }
  std::size_t size() const { return entries_.size(); }
  const FutureKey& entry(std::size_t i) const { return entries_[i]; }
  // Matching entries for entry i, the entry itself first, then by residual.
  const std::vector<std::size_t>& matches(std::size_t i) const { return matches_[i]; }
  // Entry index of a window; throws UsageError if the window is not indexed.
  std::size_t index_of(const FutureKey& key) const;

  friend PseudoFutureSet build_pseudo_futures(const std::vector<Scene>&, std::size_t, double, std::size_t, std::size_t);

 private:
  std::size_t future_len_ = 0, min_history_ = 1;
  std::vector<FutureKey> entries_;
  std::vector<std::size_t> scene_offset_, scene_starts_;
  std::vector<std::vector<std::size_t>> matches_;
};

// Indexes every (scene, person, start) with start >= min_history and
// start + future_len <= scene length. max_per_entry = 0 keeps all matches.
PseudoFutureSet build_pseudo_futures(const std::vector<Scene>& scenes, std::size_t future_len, double eps,
                                     std::size_t max_per_entry = 0, std::size_t min_history = 1);

// Residuals of the future of `key` against its start pose.
std::vector<Joints> future_residuals(const std::vector<Scene>& scenes, const FutureKey& key, std::size_t future_len);

}  // namespace dummf
