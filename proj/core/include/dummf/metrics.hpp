#pragma once

// Evaluation metrics. A pose distance is the Frobenius norm of the V x 3
// difference; a root distance is the 3D distance between root joints.
//
// Candidates are indexed [m][n]; ground truth is indexed [n]. All tracks in
// one call share their frame count.

#include <string>
#include <vector>

#include "dummf/forecaster.hpp"
#include "dummf/motion.hpp"

namespace dummf {

using Candidates = std::vector<std::vector<Track>>;

struct MetricReport {
  double ade = 0, fde = 0, lade = 0, lfde = 0, fpd = 0;
  double root_ade = 0, root_fde = 0, pose_ade = 0, pose_fde = 0, root_fpd = 0, pose_fpd = 0;
  double fsr = 0, tcr = 0, ahd = 0;
};

struct Displacement {
  double average = 0;  // over persons and frames
  double final = 0;    // last frame only
};

// One winner m for the whole scene, chosen separately for ADE and FDE.
Displacement ade_fde(const Candidates& pred, const std::vector<Track>& gt);
// Independent winner per person.
Displacement lade_lfde(const Candidates& pred, const std::vector<Track>& gt);
// Sum over persons and unordered final-pose pairs, divided by N * M * (M - 1).
// 0 when M < 2.
double fpd(const Candidates& pred);

struct AlignedVariants {
  double root_ade = 0, root_fde = 0, pose_ade = 0, pose_fde = 0, root_fpd = 0, pose_fpd = 0;
};
AlignedVariants aligned_variants(const Candidates& pred, const std::vector<Track>& gt, const SkeletonSpec& skel);

// Fraction of frame-to-frame intervals where both feet are within
// dist_thresh of ground_height and both move at >= speed_thresh (m/s).
double fsr(const Track& track, const SkeletonSpec& skel, double ground_height, double dist_thresh = 0.05,
           double speed_thresh = 0.075);
// Mean over candidates of the fraction of frames where some pair of roots is
// closer than collision_dist.
double tcr(const Candidates& pred, const SkeletonSpec& skel, double collision_dist = 0.2);
// Mean over (m, n) of the distance between last and first predicted pose.
double ahd(const Candidates& pred);

struct EvalConfig {
  double collision_dist = 0.2;
  double foot_dist = 0.05;
  double foot_speed = 0.075;
};

// Every metric for one candidate set. `history` supplies the ground height
// (lowest foot over the history) and the frame that precedes the prediction.
MetricReport evaluate_candidates(const Candidates& pred, const std::vector<Track>& gt,
                                 const std::vector<Track>& history, const SkeletonSpec& skel,
                                 const EvalConfig& cfg = {});

struct HorizonReport {
  std::size_t step = 0;  // k
  double horizon_s = 0;  // k * future_len / fps
  std::size_t candidates = 0;
  MetricReport metrics;
};

// Horizon k keeps one branch per distinct intent_path prefix of length k,
// truncated to k * future_len frames. Horizons whose frames are not covered
// by the ground truth future are skipped; none covered is a UsageError.
std::vector<HorizonReport> evaluate(const PredictionFile& pred, const Scene& gt, const SkeletonSpec& skel,
                                    const EvalConfig& cfg = {});

std::string report_to_json(const std::vector<HorizonReport>& reports);
// Header plus one row per horizon, first column `scene`.
std::string report_to_csv(const std::vector<HorizonReport>& reports, const std::string& scene);

}  // namespace dummf
