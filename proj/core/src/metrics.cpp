#include "dummf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "dummf/error.hpp"
#include "json.hpp"
#include "json_util.hpp"

namespace dummf {

namespace {

using Seq = std::vector<Joints>;
using SeqSet = std::vector<std::vector<Seq>>;  // [m][n]

Seq full_seq(const Track& t) {
  Seq s;
  for (const auto& p : t.frames()) s.push_back(p.joints());
  return s;
}

Seq root_seq(const Track& t, const SkeletonSpec& skel) {
  const auto split = split_root_pose(t, skel);
  Seq s;
  for (Eigen::Index i = 0; i < split.root.rows(); ++i) s.push_back(split.root.row(i));
  return s;
}

Seq pose_seq(const Track& t, const SkeletonSpec& skel) { return full_seq(split_root_pose(t, skel).local); }

template <class F>
SeqSet map_set(const Candidates& pred, F f) {
  SeqSet out;
  for (const auto& row : pred) {
    out.emplace_back();
    for (const auto& t : row) out.back().push_back(f(t));
  }
  return out;
}

template <class F>
std::vector<Seq> map_gt(const std::vector<Track>& gt, F f) {
  std::vector<Seq> out;
  for (const auto& t : gt) out.push_back(f(t));
  return out;
}

double dist(const Joints& a, const Joints& b) { return (a - b).norm(); }

void check(const Candidates& pred) {
  if (pred.empty() || pred.front().empty()) throw ShapeError("need at least one candidate and one person");
  const std::size_t N = pred.front().size(), T = pred.front().front().size();
  for (const auto& row : pred) {
    if (row.size() != N) throw ShapeError("candidates disagree on person count");
    for (const auto& t : row)
      if (t.size() != T) throw ShapeError("candidate tracks disagree on frame count");
  }
}

void check(const Candidates& pred, const std::vector<Track>& gt) {
  check(pred);
  if (gt.size() != pred.front().size())
    throw ShapeError("ground truth has " + std::to_string(gt.size()) + " persons, predictions " +
                     std::to_string(pred.front().size()));
  for (const auto& t : gt)
    if (t.size() != pred.front().front().size()) throw ShapeError("ground truth frame count differs from predictions");
}

Displacement shared_min(const SeqSet& p, const std::vector<Seq>& g) {
  const std::size_t N = g.size(), T = g.front().size();
  Displacement best{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (const auto& row : p) {
    double avg = 0, fin = 0;
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t t = 0; t < T; ++t) avg += dist(row[n][t], g[n][t]);
      fin += dist(row[n][T - 1], g[n][T - 1]);
    }
    best.average = std::min(best.average, avg / static_cast<double>(N * T));
    best.final = std::min(best.final, fin / static_cast<double>(N));
  }
  return best;
}

Displacement per_person_min(const SeqSet& p, const std::vector<Seq>& g) {
  const std::size_t N = g.size(), T = g.front().size();
  Displacement out;
  for (std::size_t n = 0; n < N; ++n) {
    double avg = std::numeric_limits<double>::infinity(), fin = avg;
    for (const auto& row : p) {
      double a = 0;
      for (std::size_t t = 0; t < T; ++t) a += dist(row[n][t], g[n][t]);
      avg = std::min(avg, a / static_cast<double>(T));
      fin = std::min(fin, dist(row[n][T - 1], g[n][T - 1]));
    }
    out.average += avg;
    out.final += fin;
  }
  out.average /= static_cast<double>(N);
  out.final /= static_cast<double>(N);
  return out;
}

double final_pairs(const SeqSet& p) {
  const std::size_t M = p.size(), N = p.front().size();
  if (M < 2) return 0;
  double s = 0;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t k = m + 1; k < M; ++k) s += dist(p[m][n].back(), p[k][n].back());
  return s / static_cast<double>(N * M * (M - 1));
}

}  // namespace

Displacement ade_fde(const Candidates& pred, const std::vector<Track>& gt) {
  check(pred, gt);
  return shared_min(map_set(pred, full_seq), map_gt(gt, full_seq));
}

Displacement lade_lfde(const Candidates& pred, const std::vector<Track>& gt) {
  check(pred, gt);
  return per_person_min(map_set(pred, full_seq), map_gt(gt, full_seq));
}

double fpd(const Candidates& pred) {
  check(pred);
  return final_pairs(map_set(pred, full_seq));
}

AlignedVariants aligned_variants(const Candidates& pred, const std::vector<Track>& gt, const SkeletonSpec& skel) {
  check(pred, gt);
  auto root = [&](const Track& t) { return root_seq(t, skel); };
  auto pose = [&](const Track& t) { return pose_seq(t, skel); };
  const SeqSet pr = map_set(pred, root), pp = map_set(pred, pose);
  const auto r = shared_min(pr, map_gt(gt, root));
  const auto q = shared_min(pp, map_gt(gt, pose));
  AlignedVariants a;
  a.root_ade = r.average;
  a.root_fde = r.final;
  a.pose_ade = q.average;
  a.pose_fde = q.final;
  a.root_fpd = final_pairs(pr);
  a.pose_fpd = final_pairs(pp);
  return a;
}

double fsr(const Track& track, const SkeletonSpec& skel, double ground_height, double dist_thresh,
           double speed_thresh) {
  if (track.size() < 2) return 0;
  const auto feet = skel.foot_indices();
  std::size_t hits = 0;
  for (std::size_t t = 1; t < track.size(); ++t) {
    bool skate = true;
    for (auto f : feet) {
      const Eigen::Vector3d now = track[t].joint(f), before = track[t - 1].joint(f);
      const double height = std::abs(now.y() - ground_height);
      const double speed = (now - before).norm() * track.fps();
      if (!(height <= dist_thresh && speed >= speed_thresh)) skate = false;
    }
    if (skate) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(track.size() - 1);
}

double tcr(const Candidates& pred, const SkeletonSpec& skel, double collision_dist) {
  check(pred);
  const std::size_t N = pred.front().size(), T = pred.front().front().size();
  const std::size_t r = skel.root_index();
  double total = 0;
  for (const auto& row : pred) {
    std::size_t hits = 0;
    for (std::size_t t = 0; t < T; ++t) {
      bool hit = false;
      for (std::size_t a = 0; a < N && !hit; ++a)
        for (std::size_t b = a + 1; b < N && !hit; ++b)
          hit = (row[a][t].joint(r) - row[b][t].joint(r)).norm() < collision_dist;
      if (hit) ++hits;
    }
    total += static_cast<double>(hits) / static_cast<double>(T);
  }
  return total / static_cast<double>(pred.size());
}

double ahd(const Candidates& pred) {
  check(pred);
  double s = 0;
  std::size_t count = 0;
  for (const auto& row : pred)
    for (const auto& t : row) {
      s += dist(t.back().joints(), t[0].joints());
      ++count;
    }
  return s / static_cast<double>(count);
}

MetricReport evaluate_candidates(const Candidates& pred, const std::vector<Track>& gt,
                                 const std::vector<Track>& history, const SkeletonSpec& skel, const EvalConfig& cfg) {
  check(pred, gt);
  if (history.size() != gt.size()) throw ShapeError("history and ground truth disagree on person count");
  MetricReport r;
  const auto acc = ade_fde(pred, gt);
  const auto lacc = lade_lfde(pred, gt);
  r.ade = acc.average;
  r.fde = acc.final;
  r.lade = lacc.average;
  r.lfde = lacc.final;
  r.fpd = fpd(pred);
  const auto v = aligned_variants(pred, gt, skel);
  r.root_ade = v.root_ade;
  r.root_fde = v.root_fde;
  r.pose_ade = v.pose_ade;
  r.pose_fde = v.pose_fde;
  r.root_fpd = v.root_fpd;
  r.pose_fpd = v.pose_fpd;

  double ground = std::numeric_limits<double>::infinity();
  for (const auto& h : history)
    for (const auto& p : h.frames())
      for (auto f : skel.foot_indices()) ground = std::min(ground, p.joint(f).y());
  double skate = 0;
  for (const auto& row : pred)
    for (std::size_t n = 0; n < row.size(); ++n) {
      const Track joined = history[n].slice(history[n].size() - 1, 1).concat(row[n]);
      skate += fsr(joined, skel, ground, cfg.foot_dist, cfg.foot_speed);
    }
  r.fsr = skate / static_cast<double>(pred.size() * pred.front().size());
  r.tcr = tcr(pred, skel, cfg.collision_dist);
  r.ahd = ahd(pred);
  return r;
}

std::vector<HorizonReport> evaluate(const PredictionFile& pred, const Scene& gt, const SkeletonSpec& skel,
                                    const EvalConfig& cfg) {
  if (pred.branches.empty()) throw UsageError("no prediction branches to evaluate");
  if (pred.branches.front().persons.size() != gt.person_count())
    throw UsageError("predictions have " + std::to_string(pred.branches.front().persons.size()) +
                     " persons, ground truth " + std::to_string(gt.person_count()));
  if (gt.joint_count() != skel.joint_count() || pred.branches.front().persons.front().joint_count() != skel.joint_count())
    throw UsageError("joint count does not match the skeleton");
  const auto history = gt.histories();
  const auto future = gt.futures();
  std::vector<HorizonReport> out;
  for (std::size_t k = 1; k <= pred.steps; ++k) {
    const std::size_t frames = k * pred.future_len;
    if (frames > gt.future_len()) break;
    Candidates cands;
    std::map<std::vector<std::size_t>, bool> seen;
    for (const auto& b : pred.branches) {
      std::vector<std::size_t> prefix(b.intent_path.begin(), b.intent_path.begin() + static_cast<std::ptrdiff_t>(k));
      if (!seen.emplace(prefix, true).second) continue;
      std::vector<Track> row;
      for (const auto& t : b.persons) row.push_back(t.slice(0, frames));
      cands.push_back(std::move(row));
    }
    std::vector<Track> truth;
    for (const auto& t : future) truth.push_back(t.slice(0, frames));
    HorizonReport h;
    h.step = k;
    h.horizon_s = static_cast<double>(frames) / pred.fps;
    h.candidates = cands.size();
    h.metrics = evaluate_candidates(cands, truth, history, skel, cfg);
    out.push_back(h);
  }
  if (out.empty())
    throw UsageError("ground truth future (" + std::to_string(gt.future_len()) + " frames) is shorter than one " +
                     std::to_string(pred.future_len) + "-frame prediction window");
  return out;
}

namespace {

std::vector<std::pair<const char*, double>> fields(const MetricReport& m) {
  return {{"ade", m.ade},           {"fde", m.fde},           {"lade", m.lade},         {"lfde", m.lfde},
          {"fpd", m.fpd},           {"rootADE", m.root_ade},  {"rootFDE", m.root_fde},  {"poseADE", m.pose_ade},
          {"poseFDE", m.pose_fde},  {"rootFPD", m.root_fpd},  {"poseFPD", m.pose_fpd},  {"fsr", m.fsr},
          {"tcr", m.tcr},           {"ahd", m.ahd}};
}

}  // namespace

std::string report_to_json(const std::vector<HorizonReport>& reports) {
  std::string out = "[";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out += i ? ",\n " : "\n ";
    out += "{\"horizon_s\":";
    detail::append_number(out, r.horizon_s);
    out += ",\"step\":" + std::to_string(r.step) + ",\"candidates\":" + std::to_string(r.candidates);
    out += ",\"metrics\":{";
    bool first = true;
    for (const auto& [name, value] : fields(r.metrics)) {
      if (!first) out.push_back(',');
      first = false;
      out += "\"" + std::string(name) + "\":";
      detail::append_number(out, value);
    }
    out += "}}";
  }
  out += "\n]\n";
  return out;
}

std::string report_to_csv(const std::vector<HorizonReport>& reports, const std::string& scene) {
  std::string out = "scene,horizon_s,candidates";
  for (const auto& f : fields(MetricReport{})) out += std::string(",") + f.first;
  out += "\n";
  for (const auto& r : reports) {
    out += scene + ",";
    detail::append_number(out, r.horizon_s);
    out += "," + std::to_string(r.candidates);
    for (const auto& f : fields(r.metrics)) {
      out.push_back(',');
      detail::append_number(out, f.second);
    }
    out += "\n";
  }
  return out;
}

}  // namespace dummf
