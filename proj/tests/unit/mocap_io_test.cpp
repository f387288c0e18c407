#include <gtest/gtest.h>

#include <cmath>

#include "dummf/asf.hpp"
#include "dummf/canonical.hpp"
#include "dummf/error.hpp"
#include "dummf/scene_io.hpp"
#include "dummf/synth.hpp"
#include "test_util.hpp"

namespace dummf {
namespace {

using test::fixture_text;

Eigen::Vector3d joint_of(const RawTrack& raw, std::size_t frame, const std::string& name) {
  for (std::size_t i = 0; i < raw.joint_names.size(); ++i)
    if (raw.joint_names[i] == name) return raw.track[frame].joint(i);
  ADD_FAILURE() << "no joint " << name;
  return Eigen::Vector3d::Zero();
}

RawTrack chain_fk(const std::string& amc) {
  const auto skel = parse_asf(fixture_text("chain2.asf"));
  return forward_kinematics(skel, parse_amc(fixture_text(amc), skel));
}

TEST(Asf, ChainFixture) {
  const auto skel = parse_asf(fixture_text("chain2.asf"));
  EXPECT_EQ(skel.bones.size(), 2u);
  EXPECT_EQ(skel.depth(), 2u);
  EXPECT_EQ(skel.bone("lower").parent, "upper");
  EXPECT_DOUBLE_EQ(skel.bone("lower").length, 2.0);
  EXPECT_EQ(skel.root.order.size(), 6u);
}

TEST(Asf, EmptyIsParseError) { EXPECT_THROW(parse_asf(""), ParseError); }

TEST(Asf, UndefinedBoneInHierarchy) {
  try {
    parse_asf(fixture_text("bad_hierarchy.asf"));
    FAIL();
  } catch (const SemanticError& e) {
    EXPECT_NE(std::string(e.what()).find("line 38"), std::string::npos) << e.what();
  }
}

TEST(Asf, LineLocatedErrors) {
  try {
    parse_asf(fixture_text("bad_length.asf"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 31u);
  }
  try {
    parse_asf(fixture_text("bad_dof.asf"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 22u);
  }
}

TEST(Amc, ThreeFrames) {
  const auto skel = parse_asf(fixture_text("chain2.asf"));
  const auto clip = parse_amc(fixture_text("chain2_3frames.amc"), skel);
  EXPECT_EQ(clip.frames.size(), 3u);
  EXPECT_NEAR(clip.frames[2].at("upper")[2], std::numbers::pi / 2, 1e-15);
}

TEST(Amc, Malformed) {
  const auto skel = parse_asf(fixture_text("chain2.asf"));
  try {
    parse_amc(fixture_text("bad_channel_count.amc"), skel);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
  try {
    parse_amc(fixture_text("bad_number.amc"), skel);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
  try {
    parse_amc(fixture_text("bad_missing_channel.amc"), skel);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
  }
}

TEST(Fk, RestChain) {
  const auto raw = chain_fk("chain2_rest.amc");
  EXPECT_LE((joint_of(raw, 0, "root")).norm(), 1e-12);
  EXPECT_LE((joint_of(raw, 0, "upper") - Eigen::Vector3d(0, 1, 0)).norm(), 1e-12);
  EXPECT_LE((joint_of(raw, 0, "lower") - Eigen::Vector3d(0, 3, 0)).norm(), 1e-12);
}

TEST(Fk, RootTranslation) {
  const auto rest = chain_fk("chain2_rest.amc");
  const auto moved = chain_fk("chain2_translate.amc");
  for (const char* j : {"root", "upper", "lower"})
    EXPECT_LE((joint_of(moved, 0, j) - joint_of(rest, 0, j) - Eigen::Vector3d(1, 2, 3)).norm(), 1e-12) << j;
}

TEST(Fk, RotationAboutZ) {
  const auto raw = chain_fk("chain2_rotz.amc");
  EXPECT_LE((joint_of(raw, 0, "upper") - Eigen::Vector3d(-1, 0, 0)).norm(), 1e-12);
  EXPECT_LE((joint_of(raw, 0, "lower") - Eigen::Vector3d(-3, 0, 0)).norm(), 1e-12);
}

TEST(Fk, ComposedRotations) {
  const auto raw = chain_fk("chain2_3frames.amc");
  ASSERT_EQ(raw.track.size(), 3u);
  EXPECT_LE((joint_of(raw, 1, "lower") - Eigen::Vector3d(1, 5, 3)).norm(), 1e-12);
  EXPECT_LE((joint_of(raw, 2, "upper") - Eigen::Vector3d(-1, 0, 0)).norm(), 1e-12);
  EXPECT_LE((joint_of(raw, 2, "lower") - Eigen::Vector3d(-1, 0, 2)).norm(), 1e-12);
}

TEST(Fk, Deterministic) {
  const auto a = chain_fk("chain2_3frames.amc");
  const auto b = chain_fk("chain2_3frames.amc");
  EXPECT_EQ(a.track, b.track);
}

TEST(EulerRotation, OrderMatters) {
  const double h = std::numbers::pi / 2;
  const Eigen::Matrix3d xz = euler_rotation({Axis::X, Axis::Z}, {h, h});
  // x first then z: z_axis -> (rx) -> -y -> (rz) -> +x
  EXPECT_LE((xz * Eigen::Vector3d::UnitZ() - Eigen::Vector3d::UnitX()).norm(), 1e-12);
}

RawTrack canonical_raw(const Track& t) {
  return {SkeletonSpec::canonical().joint_names(), t};
}

MappingTable identity_mapping() {
  MappingTable m;
  for (const auto& n : SkeletonSpec::canonical().joint_names()) m.joints[n] = {n};
  return m;
}

TEST(Canonical, IdentityMapping) {
  Rng rng(1);
  const Track t = test::random_track(rng, 4);
  EXPECT_EQ(to_canonical(canonical_raw(t), identity_mapping()), t);
}

TEST(Canonical, UnitScaleInverse) {
  Rng rng(2);
  const Track t = test::random_track(rng, 3);
  std::vector<Pose> doubled;
  for (const auto& p : t.frames()) doubled.emplace_back(Joints(p.joints() * 2.0));
  auto m = identity_mapping();
  m.unit_scale = 0.5;
  EXPECT_LE(test::track_diff(to_canonical(canonical_raw(Track(doubled, t.fps())), m), t), 1e-15);
}

TEST(Canonical, AveragedJointOracle) {
  const auto skel = parse_asf(fixture_text("humanoid.asf"));
  const auto raw = forward_kinematics(skel, parse_amc(fixture_text("humanoid_walk.amc"), skel));
  const auto m = MappingTable::from_json(fixture_text("humanoid_mapping.json"));
  const Track c = to_canonical(raw, m);
  ASSERT_EQ(c.joint_count(), 15u);
  for (std::size_t f = 0; f < raw.track.size(); ++f) {
    const Eigen::Vector3d a = joint_of(raw, f, "lhipjoint"), b = joint_of(raw, f, "rhipjoint");
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(c[f].joint(0)(k), 0.5 * (a(k) + b(k)) * m.unit_scale, 1e-12);
  }
}

TEST(Canonical, UnknownJoints) {
  Rng rng(3);
  auto m = identity_mapping();
  m.joints["head"] = {"antenna"};
  EXPECT_THROW(to_canonical(canonical_raw(test::random_track(rng, 2)), m), ConfigError);
  m.joints.erase("head");
  EXPECT_THROW(to_canonical(canonical_raw(test::random_track(rng, 2)), m), ConfigError);
  EXPECT_THROW(MappingTable::from_json("[1,2]"), ConfigError);
}

TEST(Canonical, MappingRoundTrip) {
  const auto m = MappingTable::from_json(fixture_text("humanoid_mapping.json"));
  const auto back = MappingTable::from_json(m.to_json());
  EXPECT_EQ(back.joints, m.joints);
  EXPECT_EQ(back.unit_scale, m.unit_scale);
}

TEST(Resample, SameFps) {
  Rng rng(4);
  const Track t = test::random_track(rng, 7, 15, 30.0);
  EXPECT_EQ(resample(t, 30.0), t);
}

TEST(Resample, ConstantTrack) {
  Rng rng(5);
  const Pose p = test::random_pose(rng);
  const Track t(std::vector<Pose>(100, p), 120.0);
  const Track r = resample(t, 15.0);
  EXPECT_EQ(r.size(), static_cast<std::size_t>(std::ceil(100.0 / 120.0 * 15.0)));
  EXPECT_EQ(r.fps(), 15.0);
  for (const auto& q : r.frames()) EXPECT_LE((q.joints() - p.joints()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Resample, LinearMotionExact) {
  Rng rng(6);
  const Pose a = test::random_pose(rng), v = test::random_pose(rng);
  auto at = [&](double s) { return Pose(Joints(a.joints() + s * v.joints())); };
  std::vector<Pose> f;
  for (int i = 0; i < 97; ++i) f.push_back(at(i / 120.0));
  const Track r = resample(Track(f, 120.0), 15.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double s = static_cast<double>(i) / 15.0;
    if (s > 96 / 120.0) break;
    EXPECT_LE((r[i].joints() - at(s).joints()).cwiseAbs().maxCoeff(), 1e-12) << i;
  }
  // a non-integer ratio exercises the interpolation weights
  const Track r7 = resample(Track(f, 120.0), 7.0);
  for (std::size_t i = 0; i * 120.0 / 7.0 <= 96.0; ++i)
    EXPECT_LE((r7[i].joints() - at(i / 7.0).joints()).cwiseAbs().maxCoeff(), 1e-12) << i;
}

std::vector<Track> walkers(std::uint64_t seed, std::size_t persons) {
  SyntheticSpec s;
  s.scene_count = 1;
  s.branches = 1;
  s.persons = persons;
  s.history_len = 20;
  s.future_len = 10;
  return synthetic_dataset(s, seed).front().persons();
}

TEST(SynthesizeScene, SingleClipOffsetOnly) {
  const auto clip = walkers(1, 1).front();
  SceneSynthConfig cfg;
  cfg.persons_per_scene = 1;
  cfg.future_len = 5;
  Rng rng(3);
  const Scene s = synthesize_scene({{clip}}, cfg, rng);
  ASSERT_EQ(s.person_count(), 1u);
  const Eigen::Vector3d off = s.persons()[0][0].joint(0) - clip[0].joint(0);
  EXPECT_EQ(off.y(), 0.0);
  for (std::size_t t = 0; t < clip.size(); ++t) {
    Joints expect = clip[t].joints();
    expect.rowwise() += off.transpose();
    EXPECT_LE((s.persons()[0][t].joints() - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SynthesizeScene, ZeroRadiusCollides) {
  const auto clip = walkers(2, 1).front();
  SceneSynthConfig cfg;
  cfg.persons_per_scene = 2;
  cfg.placement_radius = 0.0;
  cfg.max_rejection_tries = 20;
  cfg.future_len = 5;
  Rng rng(4);
  EXPECT_THROW(synthesize_scene({{clip}, {clip}}, cfg, rng), SynthesisError);
}

TEST(SynthesizeScene, ThreePersonsSeparated) {
  const auto pair = walkers(3, 2);
  const auto single = walkers(4, 1);
  SceneSynthConfig cfg;
  cfg.persons_per_scene = 3;
  cfg.rng_seed = 7;
  cfg.future_len = 10;
  const Scene s = synthesize_scene({pair, single}, cfg);
  ASSERT_EQ(s.person_count(), 3u);
  for (std::size_t t = 0; t < s.length(); ++t)
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) {
        if (a == b) continue;
        double d2 = 0;
        for (int k = 0; k < 3; ++k) {
          const double d = s.persons()[a][t].joints()(0, k) - s.persons()[b][t].joints()(0, k);
          d2 += d * d;
        }
        EXPECT_GE(std::sqrt(d2), cfg.min_pair_distance);
      }
  // the recorded pair keeps its relative placement
  const Eigen::Vector3d rel0 = pair[1][0].joint(0) - pair[0][0].joint(0);
  const Eigen::Vector3d rel1 = s.persons()[1][0].joint(0) - s.persons()[0][0].joint(0);
  EXPECT_LE((rel0 - rel1).norm(), 1e-12);
}

TEST(SynthesizeScene, Errors) {
  SceneSynthConfig cfg;
  cfg.persons_per_scene = 4;
  EXPECT_THROW(synthesize_scene({walkers(5, 2)}, cfg), UsageError);
  cfg.min_pair_distance = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(SyntheticDataset, StaticWhenMotionless) {
  SyntheticSpec s;
  s.scene_count = 4;
  s.speed_min = s.speed_max = 0.0;
  s.oscillation_amplitude = 0.0;
  s.curvature_max = 0.0;
  for (const auto& scene : synthetic_dataset(s, 11))
    for (const auto& t : scene.persons())
      for (const auto& p : t.frames()) EXPECT_EQ(p, t[0]);
}

TEST(SyntheticDataset, Deterministic) {
  SyntheticSpec s;
  s.scene_count = 6;
  s.jitter_std = 0.01;
  const auto a = synthetic_dataset(s, 12), b = synthetic_dataset(s, 12);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_FALSE(synthetic_dataset(s, 13)[0] == a[0]);
}

TEST(SyntheticDataset, ConstantLimbLengths) {
  SyntheticSpec s;
  s.scene_count = 8;
  const auto& skel = SkeletonSpec::canonical();
  for (const auto& scene : synthetic_dataset(s, 14))
    for (const auto& t : scene.persons()) {
      const auto ref = limb_lengths(t[0], skel);
      for (const auto& p : t.frames()) {
        const auto l = limb_lengths(p, skel);
        for (std::size_t e = 0; e < l.size(); ++e) EXPECT_NEAR(l[e], ref[e], 1e-9);
      }
    }
}

TEST(SyntheticDataset, BranchesShareHistory) {
  SyntheticSpec s;
  s.scene_count = 6;
  s.branches = 3;
  s.jitter_std = 0.01;
  const auto d = synthetic_dataset(s, 15);
  for (std::size_t g = 0; g < 2; ++g) {
    const Scene& a = d[3 * g];
    for (std::size_t b = 1; b < 3; ++b) {
      const Scene& o = d[3 * g + b];
      for (std::size_t n = 0; n < a.person_count(); ++n) {
        EXPECT_EQ(a.history(n), o.history(n));
        EXPECT_GT(test::track_diff(a.future(n), o.future(n)), 0.05);
      }
    }
  }
}

TEST(SyntheticDataset, SpecFromJson) {
  const auto s = SyntheticSpec::from_json(R"({"scene_count": 3, "persons": 2, "jitter_std": 0.02})");
  EXPECT_EQ(s.scene_count, 3u);
  EXPECT_EQ(s.persons, 2u);
  EXPECT_EQ(s.jitter_std, 0.02);
  EXPECT_THROW(SyntheticSpec::from_json(R"({"persons": 0})"), ConfigError);
  EXPECT_THROW(SyntheticSpec::from_json("{"), ConfigError);
}

TEST(SceneIo, RoundTripExact) {
  SyntheticSpec s;
  s.scene_count = 1;
  s.jitter_std = 0.013;
  const Scene a = synthetic_dataset(s, 16).front();
  const std::string text = scene_to_json(a);
  const Scene b = scene_from_json(text);
  EXPECT_EQ(a, b);
  EXPECT_EQ(scene_to_json(b), text);
  EXPECT_THROW(scene_from_json("{}"), Error);
}

TEST(SceneIo, DirectorySkipsManifests) {
  test::TempDir dir("sceneio");
  SyntheticSpec s;
  s.scene_count = 2;
  s.branches = 1;
  const auto d = synthetic_dataset(s, 17);
  write_scene_file(dir / "b.json", d[1]);
  write_scene_file(dir / "a.json", d[0]);
  write_file_atomic(dir / "synth.manifest.json", "{\"command\": \"synth\"}");
  const auto back = read_scene_dir(dir.path());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], d[0]);
  EXPECT_EQ(back[1], d[1]);
}

}  // namespace
}  // namespace dummf
