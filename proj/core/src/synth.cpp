#include "dummf/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dummf/error.hpp"
#include "json.hpp"

namespace dummf {

void SceneSynthConfig::validate() const {
  if (persons_per_scene < 1) throw ConfigError("persons_per_scene must be >= 1");
  if (!(min_pair_distance > 0)) throw ConfigError("min_pair_distance must be positive");
  if (!(placement_radius >= 0)) throw ConfigError("placement_radius must be non-negative");
  if (max_rejection_tries < 1) throw ConfigError("max_rejection_tries must be >= 1");
}

double min_root_distance(const Scene& scene, std::size_t root_index) {
  double best = std::numeric_limits<double>::infinity();
  const auto& p = scene.persons();
  for (std::size_t t = 0; t < scene.length(); ++t)
    for (std::size_t a = 0; a < p.size(); ++a)
      for (std::size_t b = a + 1; b < p.size(); ++b)
        best = std::min(best, (p[a][t].joint(root_index) - p[b][t].joint(root_index)).norm());
  return best;
}

Scene synthesize_scene(const std::vector<ClipGroup>& groups, const SceneSynthConfig& cfg) {
  Rng rng(cfg.rng_seed);
  return synthesize_scene(groups, cfg, rng);
}

Scene synthesize_scene(const std::vector<ClipGroup>& groups, const SceneSynthConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<const ClipGroup*> chosen;
  std::size_t persons = 0;
  for (const auto& g : groups) {
    if (g.empty() || g.size() > 2) throw UsageError("clip groups must hold 1 or 2 tracks");
    if (persons + g.size() > cfg.persons_per_scene) continue;
    chosen.push_back(&g);
    persons += g.size();
    if (persons == cfg.persons_per_scene) break;
  }
  if (persons != cfg.persons_per_scene)
    throw UsageError("not enough clips to compose a " + std::to_string(cfg.persons_per_scene) + "-person scene");

  std::size_t length = std::numeric_limits<std::size_t>::max();
  const double fps = chosen.front()->front().fps();
  for (const auto* g : chosen)
    for (const auto& t : *g) {
      if (t.fps() != fps) throw UsageError("clips must share one frame rate");
      length = std::min(length, t.size());
    }
  if (cfg.future_len >= length) throw UsageError("future_len must be shorter than the clips");

  for (std::size_t attempt = 0; attempt < cfg.max_rejection_tries; ++attempt) {
    std::vector<Track> tracks;
    for (const auto* g : chosen) {
      const double r = cfg.placement_radius * std::sqrt(rng.uniform());
      const double phi = 2.0 * std::numbers::pi * rng.uniform();
      const Eigen::RowVector3d offset(r * std::cos(phi), 0.0, r * std::sin(phi));
      for (const auto& t : *g) {
        std::vector<Pose> frames;
        frames.reserve(length);
        for (std::size_t f = 0; f < length; ++f)
          frames.emplace_back(Joints(t[f].joints().rowwise() + offset));
        tracks.emplace_back(std::move(frames), fps);
      }
    }
    Scene candidate(std::move(tracks), length - cfg.future_len, cfg.future_len);
    if (candidate.person_count() == 1 || min_root_distance(candidate) >= cfg.min_pair_distance) return candidate;
  }
  throw SynthesisError("no collision-free placement found after " + std::to_string(cfg.max_rejection_tries) +
                       " tries");
}

void SyntheticSpec::validate() const {
  if (scene_count < 1) throw ConfigError("scene_count must be >= 1");
  if (persons < 1) throw ConfigError("persons must be >= 1");
  if (history_len < 1) throw ConfigError("history_len must be >= 1");
  if (!(fps > 0)) throw ConfigError("fps must be positive");
  if (branches < 1) throw ConfigError("branches must be >= 1");
  if (speed_min < 0 || speed_max < speed_min) throw ConfigError("invalid speed range");
  if (!(turn_distance > 0)) throw ConfigError("turn_distance must be positive");
  if (body_scale_min <= 0 || body_scale_max < body_scale_min) throw ConfigError("invalid body scale range");
  if (jitter_std < 0) throw ConfigError("jitter_std must be non-negative");
  if (branch_frame > history_len + future_len) throw ConfigError("branch_frame beyond scene length");
}

SyntheticSpec SyntheticSpec::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  SyntheticSpec s;
  try {
#define DUMMF_READ(field) s.field = j.value(#field, s.field)
    DUMMF_READ(scene_count);
    DUMMF_READ(persons);
    DUMMF_READ(history_len);
    DUMMF_READ(future_len);
    DUMMF_READ(fps);
    DUMMF_READ(branches);
    DUMMF_READ(branch_frame);
    DUMMF_READ(speed_min);
    DUMMF_READ(speed_max);
    DUMMF_READ(turn_angle);
    DUMMF_READ(turn_distance);
    DUMMF_READ(curved_fraction);
    DUMMF_READ(curvature_max);
    DUMMF_READ(oscillation_amplitude);
    DUMMF_READ(step_frequency);
    DUMMF_READ(body_scale_min);
    DUMMF_READ(body_scale_max);
    DUMMF_READ(spacing);
    DUMMF_READ(jitter_std);
#undef DUMMF_READ
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

struct Walker {
  double x, z, heading, speed, curvature, phase, scale;
};

Eigen::Vector3d swing(double angle, double len) {
  return {0.0, -len * std::cos(angle), -len * std::sin(angle)};
}

// Canonical pose in the body frame (x left, y up, z forward), pelvis at the origin.
Joints body_pose(double s, double amp, double phase) {
  const double leg_l = amp * std::sin(phase);
  const double leg_r = -leg_l;
  const double knee_l = 0.6 * amp * 0.5 * (1.0 - std::cos(phase));
  const double knee_r = 0.6 * amp * 0.5 * (1.0 + std::cos(phase));
  const double arm_l = -0.7 * leg_l;
  const double arm_r = -arm_l;
  const double elbow = -0.3 * amp;

  Joints j(15, 3);
  auto set = [&](int i, const Eigen::Vector3d& v) { j.row(i) = v.transpose(); };
  const Eigen::Vector3d pelvis(0, 0, 0), thorax(0, 0.50 * s, 0);
  set(0, pelvis);
  set(1, thorax);
  set(2, thorax + Eigen::Vector3d(0, 0.25 * s, 0));
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;
    const double arm = side == 0 ? arm_l : arm_r;
    const double leg = side == 0 ? leg_l : leg_r;
    const double knee = side == 0 ? knee_l : knee_r;
    const int base_arm = side == 0 ? 3 : 6;
    const int base_leg = side == 0 ? 9 : 12;
    const Eigen::Vector3d shoulder = thorax + Eigen::Vector3d(sign * 0.18 * s, 0, 0);
    const Eigen::Vector3d el = shoulder + swing(arm, 0.28 * s);
    set(base_arm, shoulder);
    set(base_arm + 1, el);
    set(base_arm + 2, el + swing(arm + elbow, 0.25 * s));
    const Eigen::Vector3d hip = pelvis + Eigen::Vector3d(sign * 0.10 * s, 0, 0);
    const Eigen::Vector3d kn = hip + swing(leg, 0.45 * s);
    set(base_leg, hip);
    set(base_leg + 1, kn);
    set(base_leg + 2, kn + swing(leg + knee, 0.45 * s));
  }
  return j;
}

Joints world_pose(const Walker& w, double amp, double phase) {
  const Eigen::Matrix3d yaw = Eigen::AngleAxisd(w.heading, Eigen::Vector3d::UnitY()).toRotationMatrix();
  const Joints body = body_pose(w.scale, amp, phase);
  Joints out = body * yaw.transpose();
  out.rowwise() += Eigen::RowVector3d(w.x, 0.95 * w.scale, w.z);
  return out;
}

// Simulates every person for `length` frames with the given branch offset.
std::vector<Track> simulate(std::vector<Walker> walkers, const SyntheticSpec& spec, std::size_t length,
                            std::size_t branch_frame, double offset) {
  const double dt = 1.0 / spec.fps;
  std::vector<std::vector<Pose>> frames(walkers.size());
  for (std::size_t n = 0; n < walkers.size(); ++n) {
    auto w = walkers[n];
    double turned = 0.0;  // distance walked since the branch
    for (std::size_t t = 0; t < length; ++t) {
      const double phase = w.phase + 2.0 * std::numbers::pi * spec.step_frequency * static_cast<double>(t) * dt;
      frames[n].emplace_back(world_pose(w, spec.oscillation_amplitude, phase));
      const double ds = w.speed * dt;
      double rate = w.curvature;
      if (t + 1 >= branch_frame && turned < spec.turn_distance) {
        const double step = std::min(ds, spec.turn_distance - turned);
        w.heading += offset / spec.turn_distance * step;
        turned += ds;
      }
      w.heading += rate * ds;
      w.x += ds * std::sin(w.heading);
      w.z += ds * std::cos(w.heading);
    }
  }
  std::vector<Track> tracks;
  for (auto& f : frames) tracks.emplace_back(std::move(f), spec.fps);
  return tracks;
}

}  // namespace

std::vector<Scene> synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t length = spec.history_len + spec.future_len;
  const std::size_t branch_frame = spec.branch_frame ? spec.branch_frame : spec.history_len;
  const std::size_t groups = (spec.scene_count + spec.branches - 1) / spec.branches;
  constexpr double kMinSeparation = 0.5;
  constexpr int kPlacementTries = 50;

  std::vector<Scene> out;
  out.reserve(spec.scene_count);
  for (std::size_t g = 0; g < groups && out.size() < spec.scene_count; ++g) {
    Rng rng = Rng::stream(seed, g);
    std::vector<std::vector<Track>> variants;
    for (int attempt = 0; attempt < kPlacementTries; ++attempt) {
      const double common = 2.0 * std::numbers::pi * rng.uniform();
      std::vector<Walker> walkers;
      for (std::size_t n = 0; n < spec.persons; ++n) {
        const double lateral = (static_cast<double>(n) - 0.5 * static_cast<double>(spec.persons - 1)) * spec.spacing +
                               rng.uniform(-0.2, 0.2);
        const double along = rng.uniform(-0.4, 0.4);
        Walker w{};
        w.x = lateral * std::cos(common) + along * std::sin(common);
        w.z = -lateral * std::sin(common) + along * std::cos(common);
        w.heading = common + rng.uniform(-0.25, 0.25);
        w.speed = rng.uniform(spec.speed_min, spec.speed_max);
        const bool curved = rng.uniform() < spec.curved_fraction;
        w.curvature = curved ? rng.uniform(-spec.curvature_max, spec.curvature_max) : 0.0;
        w.phase = 2.0 * std::numbers::pi * rng.uniform();
        w.scale = rng.uniform(spec.body_scale_min, spec.body_scale_max);
        walkers.push_back(w);
      }
      variants.clear();
      bool ok = true;
      for (std::size_t b = 0; b < spec.branches; ++b) {
        const double offset = spec.branches == 1
                                  ? 0.0
                                  : spec.turn_angle * (2.0 * static_cast<double>(b) / static_cast<double>(spec.branches - 1) - 1.0);
        variants.push_back(simulate(walkers, spec, length, branch_frame, offset));
        Scene probe(variants.back(), length - spec.future_len, spec.future_len);
        if (spec.persons > 1 && min_root_distance(probe) < kMinSeparation) ok = false;
      }
      if (ok) break;
    }

    // Noise is shared by all branches so their histories stay identical.
    std::vector<std::vector<Joints>> noise;
    if (spec.jitter_std > 0) {
      noise.resize(spec.persons);
      for (auto& per : noise)
        for (std::size_t t = 0; t < length; ++t) {
          Joints e(15, 3);
          for (Eigen::Index k = 0; k < e.size(); ++k) e.data()[k] = spec.jitter_std * rng.normal();
          per.push_back(std::move(e));
        }
    }
    for (auto& tracks : variants) {
      if (out.size() >= spec.scene_count) break;
      if (!noise.empty()) {
        for (std::size_t n = 0; n < tracks.size(); ++n) {
          std::vector<Pose> noisy;
          for (std::size_t t = 0; t < length; ++t) noisy.emplace_back(Joints(tracks[n][t].joints() + noise[n][t]));
          tracks[n] = Track(std::move(noisy), spec.fps);
        }
      }
      out.emplace_back(std::move(tracks), length - spec.future_len, spec.future_len);
    }
  }
  return out;
}

}  // namespace dummf
