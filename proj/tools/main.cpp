// dummf: ingest mocap, synthesize scenes, train, forecast, evaluate, gradcheck.

#include <Eigen/Core>

#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dummf/asf.hpp"
#include "dummf/canonical.hpp"
#include "dummf/error.hpp"
#include "dummf/forecaster.hpp"
#include "dummf/gradcheck_suite.hpp"
#include "dummf/metrics.hpp"
#include "dummf/scene_io.hpp"
#include "dummf/synth.hpp"
#include "dummf/trainer.hpp"
#include "json.hpp"
#include "manifest.hpp"
#include "version.hpp"

namespace fs = std::filesystem;
using namespace dummf;
using tools::Manifest;

namespace {

Manifest g_manifest;

fs::path manifest_for_file(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

std::vector<fs::path> scene_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json" &&
        e.path().filename().string().find(".manifest") == std::string::npos)
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

// Rethrows parse failures with the offending file in front of the line.
template <class F>
auto with_file(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ParseError(path.generic_string() + ": " + e.what());
  } catch (const SemanticError& e) {
    throw SemanticError(path.generic_string() + ": " + e.what());
  }
}

// ---- ingest ----------------------------------------------------------------

struct IngestArgs {
  fs::path asf, mapping, out;
  std::vector<fs::path> amc;
  double fps = 15, source_fps = 120;
  std::size_t history_len = 0;
  bool together = false;
  std::string name;
};

int cmd_ingest(const IngestArgs& a) {
  const MappingTable mapping = with_file(a.mapping, [&] { return MappingTable::from_json(read_text_file(a.mapping)); });
  const AsfSkeleton skel = with_file(a.asf, [&] { return parse_asf(read_text_file(a.asf)); });
  if (!(a.fps > 0) || !(a.source_fps > 0)) throw UsageError("frame rates must be positive");
  std::vector<Track> tracks;
  std::vector<std::string> stems;
  for (const auto& amc : a.amc) {
    const AmcClip clip = with_file(amc, [&] { return parse_amc(read_text_file(amc), skel, a.source_fps); });
    if (clip.frames.empty()) throw ParseError(amc.generic_string() + ": no frames");
    tracks.push_back(resample(to_canonical(forward_kinematics(skel, clip), mapping), a.fps));
    stems.push_back(amc.stem().string());
  }
  auto make_scene = [&](std::vector<Track> persons) {
    std::size_t len = persons.front().size();
    for (const auto& t : persons) len = std::min(len, t.size());
    for (auto& t : persons) t = t.slice(0, len);
    const std::size_t h = a.history_len ? a.history_len : len;
    if (h > len)
      throw UsageError("--history-len " + std::to_string(h) + " exceeds the clip length " + std::to_string(len));
    return Scene(std::move(persons), h, len - h);
  };
  fs::create_directories(a.out);
  if (a.together) {
    const fs::path out = a.out / ((a.name.empty() ? stems.front() + "_group" : a.name) + ".json");
    write_scene_file(out, make_scene(tracks));
    g_manifest.outputs.push_back(out);
  } else {
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      const fs::path out = a.out / (stems[i] + ".json");
      write_scene_file(out, make_scene({tracks[i]}));
      g_manifest.outputs.push_back(out);
    }
  }
  g_manifest.inputs = {a.asf, a.mapping};
  g_manifest.inputs.insert(g_manifest.inputs.end(), a.amc.begin(), a.amc.end());
  g_manifest.config_sha256 = tools::file_sha256(a.mapping);
  g_manifest.write(a.out / "ingest.manifest.json");
  std::cerr << "ingest: wrote " << g_manifest.outputs.size() << " scene file(s) to " << a.out.generic_string() << "\n";
  return 0;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  fs::path config, out, clips;
  std::uint64_t seed = 0;
  std::optional<std::size_t> count;
};

SceneSynthConfig compose_config(const std::string& text) {
  SceneSynthConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      if (k != "persons_per_scene" && k != "min_pair_distance" && k != "placement_radius" &&
          k != "max_rejection_tries" && k != "future_len")
        throw ConfigError("unknown scene synthesis key '" + k + "'");
    }
    c.persons_per_scene = j.value("persons_per_scene", c.persons_per_scene);
    c.min_pair_distance = j.value("min_pair_distance", c.min_pair_distance);
    c.placement_radius = j.value("placement_radius", c.placement_radius);
    c.max_rejection_tries = j.value("max_rejection_tries", c.max_rejection_tries);
    c.future_len = j.value("future_len", c.future_len);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene synthesis config: ") + e.what());
  }
  c.validate();
  return c;
}

int cmd_synth(const SynthArgs& a) {
  const std::string text = read_text_file(a.config);
  std::vector<Scene> scenes;
  g_manifest.inputs = {a.config};
  if (a.clips.empty()) {
    SyntheticSpec spec = SyntheticSpec::from_json(text);
    if (a.count) spec.scene_count = *a.count;
    spec.validate();
    scenes = synthetic_dataset(spec, a.seed);
  } else {
    SceneSynthConfig cfg = compose_config(text);
    cfg.rng_seed = a.seed;
    std::vector<ClipGroup> groups;
    for (const auto& f : scene_files(a.clips)) {
      groups.push_back(read_scene_file(f).persons());
      g_manifest.inputs.push_back(f);
    }
    if (groups.empty()) throw UsageError("no clip scenes in " + a.clips.generic_string());
    const std::size_t count = a.count.value_or(1);
    for (std::size_t k = 0; k < count; ++k) {
      std::vector<ClipGroup> rotated;
      for (std::size_t i = 0; i < groups.size(); ++i) rotated.push_back(groups[(i + k) % groups.size()]);
      Rng rng = Rng::stream(a.seed, k);
      scenes.push_back(synthesize_scene(rotated, cfg, rng));
    }
  }
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%05zu.json", i);
    write_scene_file(a.out / name, scenes[i]);
    g_manifest.outputs.push_back(a.out / name);
  }
  g_manifest.config_sha256 = tools::sha256_hex(text);
  g_manifest.write(a.out / "synth.manifest.json");
  std::cerr << "synth: wrote " << scenes.size() << " scene(s) to " << a.out.generic_string() << "\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  fs::path data, config, out, log;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size, examples_per_epoch, intents;
  std::string variant;
  bool resume = false;
};

int cmd_train(const TrainArgs& a) {
  const std::string text = read_text_file(a.config);
  TrainConfig cfg = TrainConfig::from_json(text);
  if (a.seed) cfg.rng_seed = *a.seed;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.examples_per_epoch) cfg.examples_per_epoch = *a.examples_per_epoch;
  if (a.intents) cfg.M = *a.intents;
  if (a.variant == "dual") cfg.variant = TrainVariant::dual;
  if (a.variant == "no_separation") cfg.variant = TrainVariant::no_separation;
  cfg.validate();

  const auto files = scene_files(a.data);
  if (files.empty()) throw UsageError("no scene files in " + a.data.generic_string());
  std::vector<Scene> scenes;
  for (const auto& f : files) scenes.push_back(with_file(f, [&] { return read_scene_file(f); }));

  const fs::path log = a.log.empty() ? fs::path(a.out.string() + ".log.jsonl") : a.log;
  TrainState state;
  if (a.resume && fs::exists(a.out)) {
    state = load_checkpoint(a.out);
    if (a.epochs) state.config.epochs = *a.epochs;
    std::cerr << "train: resuming from epoch " << state.epoch << "\n";
  } else {
    state = init_train_state(cfg);
    if (fs::exists(log)) fs::remove(log);
  }
  const TrainingData data = prepare_training_data(std::move(scenes), state.config);
  if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());

  TrainOptions opt;
  opt.checkpoint_path = a.out;
  opt.log_path = log;
  const std::uint64_t first_epoch = state.epoch;
  const auto report = train(state, data, opt);
  save_checkpoint(a.out, state);
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    const auto& m = report.epochs[e];
    std::cerr << "epoch " << first_epoch + e + 1 << "/" << state.config.epochs << "  L_lR " << m.L_lR << "  L_gR "
              << m.L_gR << "  total " << m.total << "\n";
  }

  g_manifest.seed = state.config.rng_seed;
  g_manifest.has_seed = true;
  g_manifest.config_sha256 = tools::sha256_hex(state.config.to_json());
  g_manifest.inputs = {a.config};
  g_manifest.inputs.insert(g_manifest.inputs.end(), files.begin(), files.end());
  g_manifest.outputs = {a.out};
  if (fs::exists(log)) g_manifest.outputs.push_back(log);
  g_manifest.write(manifest_for_file(a.out));
  return 0;
}

// ---- forecast --------------------------------------------------------------

struct ForecastArgs {
  fs::path ckpt, scene, out;
  std::size_t intents = 5, steps = 3, max_branches = 4096;
  std::uint64_t seed = 0;
};

int cmd_forecast(const ForecastArgs& a) {
  const ForecastModel model = load_forecast_model(a.ckpt);
  const Scene scene = with_file(a.scene, [&] { return read_scene_file(a.scene); });
  if (scene.joint_count() != model.predictor.config.joints)
    throw UsageError("scene has " + std::to_string(scene.joint_count()) + " joints, model expects " +
                     std::to_string(model.predictor.config.joints));
  RolloutOptions opt;
  opt.M = a.intents;
  opt.steps = a.steps;
  opt.seed = a.seed;
  opt.max_branches = a.max_branches;
  const RolloutTree tree = forecast_progressive(scene.histories(), model, opt, scene.ids());
  if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
  write_file_atomic(a.out, predictions_to_json(tree, a.seed));
  g_manifest.seed = a.seed;
  g_manifest.has_seed = true;
  g_manifest.inputs = {a.ckpt, a.scene};
  g_manifest.outputs = {a.out};
  g_manifest.write(manifest_for_file(a.out));
  std::cerr << "forecast: " << tree.leaves().size() << " branches over " << a.steps << " step(s)\n";
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  fs::path pred, gt, out, csv;
  EvalConfig cfg;
};

int cmd_eval(const EvalArgs& a) {
  const std::string text = read_text_file(a.pred);
  const PredictionFile pred = with_file(a.pred, [&] {
    bool is_rollout = false;
    try {
      is_rollout = nlohmann::json::parse(text).contains("branches");
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    return is_rollout ? predictions_from_json(text) : prediction_file_from_scene(scene_from_json(text));
  });
  const Scene gt = with_file(a.gt, [&] { return read_scene_file(a.gt); });
  if (gt.joint_count() != SkeletonSpec::kCanonicalJoints)
    throw UsageError("evaluation expects canonical " + std::to_string(SkeletonSpec::kCanonicalJoints) +
                     "-joint scenes");
  const auto reports = evaluate(pred, gt, SkeletonSpec::canonical(), a.cfg);
  if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
  const fs::path csv = a.csv.empty() ? fs::path(a.out).replace_extension(".csv") : a.csv;
  write_file_atomic(a.out, report_to_json(reports));
  write_file_atomic(csv, report_to_csv(reports, a.gt.stem().string()));
  g_manifest.inputs = {a.pred, a.gt};
  g_manifest.outputs = {a.out, csv};
  g_manifest.write(manifest_for_file(a.out));
  for (const auto& r : reports)
    std::cerr << "@" << r.horizon_s << "s  candidates " << r.candidates << "  ade " << r.metrics.ade << "  fde "
              << r.metrics.fde << "  fpd " << r.metrics.fpd << "\n";
  return 0;
}

// ---- gradcheck -------------------------------------------------------------

int cmd_gradcheck(std::uint64_t seed, double tolerance) {
  const auto cases = run_gradcheck_suite(seed);
  std::size_t failed = 0;
  for (const auto& c : cases) {
    const bool ok = c.result.max_rel_error < tolerance && c.result.checked > 0;
    if (!ok) ++failed;
    std::printf("%s %-6s %-32s max_rel %.3e  checked %zu  skipped %zu\n", ok ? "PASS" : "FAIL", c.group.c_str(),
                c.name.c_str(), c.result.max_rel_error, c.result.checked, c.result.skipped);
  }
  std::printf("%zu/%zu checks passed (tolerance %.1e, seed %llu)\n", cases.size() - failed, cases.size(), tolerance,
              static_cast<unsigned long long>(seed));
  return failed ? 1 : 0;
}

unsigned threads_from_env() {
  const char* env = std::getenv("DUMMF_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end || v < 1) throw UsageError(std::string("DUMMF_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<unsigned>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-person motion forecasting with dual-level intents"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("dummf ") + tools::kToolVersion + " (scene format " +
                                        std::to_string(tools::kSceneFormat) + ", predictions format " +
                                        std::to_string(tools::kPredictionFormat) + ", checkpoint " +
                                        tools::kCheckpointFormat + ")");
  std::optional<unsigned> threads;
  app.add_option("--threads", threads, "Worker threads (1 = fully deterministic mode)")->check(CLI::PositiveNumber);

  IngestArgs ingest;
  auto* ci = app.add_subcommand("ingest", "Convert ASF/AMC mocap into canonical scene JSON");
  ci->add_option("--asf", ingest.asf, "Skeleton file")->required()->check(CLI::ExistingFile);
  ci->add_option("--amc", ingest.amc, "Motion file(s)")->required()->check(CLI::ExistingFile);
  ci->add_option("--mapping", ingest.mapping, "Joint mapping JSON")->required()->check(CLI::ExistingFile);
  ci->add_option("--fps", ingest.fps, "Output frame rate")->capture_default_str();
  ci->add_option("--source-fps", ingest.source_fps, "AMC frame rate")->capture_default_str();
  ci->add_option("--history-len", ingest.history_len, "Frames marked as history (0 = all)")->capture_default_str();
  ci->add_flag("--together", ingest.together, "Put all clips into one multi-person scene");
  ci->add_option("--name", ingest.name, "Output scene name with --together");
  ci->add_option("--out", ingest.out, "Output directory")->required();

  SynthArgs synth;
  auto* cs = app.add_subcommand("synth", "Generate or compose multi-person scenes");
  cs->add_option("--config", synth.config, "Synthetic or composition config JSON")->required()->check(CLI::ExistingFile);
  cs->add_option("--seed", synth.seed)->capture_default_str();
  cs->add_option("--count", synth.count, "Number of scenes");
  cs->add_option("--clips", synth.clips, "Directory of clip scenes to compose")->check(CLI::ExistingDirectory);
  cs->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs trn;
  auto* ct = app.add_subcommand("train", "Train generator, codebook and discriminators");
  ct->add_option("--data", trn.data, "Directory of scene JSON files")->required()->check(CLI::ExistingDirectory);
  ct->add_option("--config", trn.config, "Training config JSON")->required()->check(CLI::ExistingFile);
  ct->add_option("--out", trn.out, "Checkpoint path")->required();
  ct->add_option("--log", trn.log, "Per-epoch JSON lines (default: <out>.log.jsonl)");
  ct->add_option("--seed", trn.seed);
  ct->add_option("--epochs", trn.epochs);
  ct->add_option("--batch-size", trn.batch_size)->check(CLI::PositiveNumber);
  ct->add_option("--examples-per-epoch", trn.examples_per_epoch)->check(CLI::PositiveNumber);
  ct->add_option("--intents", trn.intents)->check(CLI::PositiveNumber);
  ct->add_option("--variant", trn.variant)->check(CLI::IsMember({"dual", "no_separation"}));
  ct->add_flag("--resume", trn.resume, "Continue from --out if it exists");

  ForecastArgs fc;
  auto* cf = app.add_subcommand("forecast", "Progressive global-mode forecasting");
  cf->add_option("--ckpt", fc.ckpt)->required()->check(CLI::ExistingFile);
  cf->add_option("--scene", fc.scene, "Scene JSON whose history is forecast")->required()->check(CLI::ExistingFile);
  cf->add_option("--intents", fc.intents, "Candidates per step (M)")->capture_default_str()->check(CLI::PositiveNumber);
  cf->add_option("--steps", fc.steps, "Autoregressive steps")->capture_default_str()->check(CLI::PositiveNumber);
  cf->add_option("--max-branches", fc.max_branches)->capture_default_str()->check(CLI::PositiveNumber);
  cf->add_option("--seed", fc.seed)->capture_default_str();
  cf->add_option("--out", fc.out, "Predictions JSON")->required();

  EvalArgs ev;
  auto* ce = app.add_subcommand("eval", "Score predictions against ground truth");
  ce->add_option("--pred", ev.pred, "Predictions JSON or scene JSON")->required()->check(CLI::ExistingFile);
  ce->add_option("--gt", ev.gt, "Ground-truth scene JSON")->required()->check(CLI::ExistingFile);
  ce->add_option("--out", ev.out, "Report JSON")->required();
  ce->add_option("--csv", ev.csv, "CSV report (default: <out> with .csv)");
  ce->add_option("--collision-dist", ev.cfg.collision_dist)->capture_default_str()->check(CLI::PositiveNumber);

  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-5;
  auto* cg = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  cg->add_option("--seed", gc_seed)->capture_default_str();
  cg->add_option("--tolerance", gc_tol)->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {  // --help and --version
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    g_manifest.threads = threads ? *threads : threads_from_env();
    Eigen::setNbThreads(static_cast<int>(g_manifest.threads));
    g_manifest.started = tools::timestamp_utc();
    for (int i = 1; i < argc; ++i) g_manifest.args.emplace_back(argv[i]);
    if (ci->parsed()) return g_manifest.command = "ingest", cmd_ingest(ingest);
    if (cs->parsed()) {
      g_manifest.command = "synth";
      g_manifest.seed = synth.seed;
      g_manifest.has_seed = true;
      return cmd_synth(synth);
    }
    if (ct->parsed()) return g_manifest.command = "train", cmd_train(trn);
    if (cf->parsed()) return g_manifest.command = "forecast", cmd_forecast(fc);
    if (ce->parsed()) return g_manifest.command = "eval", cmd_eval(ev);
    if (cg->parsed()) return cmd_gradcheck(gc_seed, gc_tol);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
