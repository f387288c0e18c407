#include "dummf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dummf/error.hpp"
#include "json.hpp"

namespace dummf {

// ---- config ----------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (examples_per_epoch == 0) throw ConfigError("examples_per_epoch must be positive");
  if (M == 0) throw ConfigError("M must be positive");
  if (codes() < M) throw ConfigError("codebook_size must be >= M");
  for (double lr : {lr_generator, lr_discriminator, lr_codebook})
    if (!(lr > 0)) throw ConfigError("learning rates must be positive");
  if (history_lengths.empty()) throw ConfigError("history_lengths must not be empty");
  for (auto h : history_lengths)
    if (h == 0) throw ConfigError("history lengths must be positive");
  if (future_len == 0) throw ConfigError("future_len must be positive");
  loss.validate();
  predictor.validate();
  discriminator.validate();
}

std::string TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["examples_per_epoch"] = examples_per_epoch;
  j["M"] = M;
  j["codebook_size"] = codes();
  j["lr_generator"] = lr_generator;
  j["lr_discriminator"] = lr_discriminator;
  j["lr_codebook"] = lr_codebook;
  j["rng_seed"] = rng_seed;
  j["history_lengths"] = history_lengths;
  j["future_len"] = future_len;
  j["variant"] = variant == TrainVariant::dual ? "dual" : "no_separation";
  j["loss"] = nlohmann::ordered_json::parse(loss.to_json());
  j["predictor"] = nlohmann::ordered_json::parse(predictor.to_json());
  j["discriminator"] = nlohmann::ordered_json::parse(discriminator.to_json());
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(std::string_view text) {
  TrainConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw ConfigError("training config must be a JSON object");
    static const std::vector<std::string> known = {
        "batch_size", "epochs",    "examples_per_epoch", "M",       "codebook_size", "lr_generator",
        "lr_discriminator", "lr_codebook", "rng_seed", "history_lengths", "future_len", "variant",
        "loss",       "predictor", "discriminator"};
    for (auto it = j.begin(); it != j.end(); ++it)
      if (std::find(known.begin(), known.end(), it.key()) == known.end())
        throw ConfigError("unknown training config key '" + it.key() + "'");
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.examples_per_epoch = j.value("examples_per_epoch", c.examples_per_epoch);
    c.M = j.value("M", c.M);
    c.codebook_size = j.value("codebook_size", c.codebook_size);
    c.lr_generator = j.value("lr_generator", c.lr_generator);
    c.lr_discriminator = j.value("lr_discriminator", c.lr_discriminator);
    c.lr_codebook = j.value("lr_codebook", c.lr_codebook);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.history_lengths = j.value("history_lengths", c.history_lengths);
    c.future_len = j.value("future_len", c.future_len);
    const auto v = j.value("variant", std::string("dual"));
    if (v == "dual")
      c.variant = TrainVariant::dual;
    else if (v == "no_separation")
      c.variant = TrainVariant::no_separation;
    else
      throw ConfigError("variant must be 'dual' or 'no_separation', got '" + v + "'");
    if (j.contains("loss")) c.loss = LossConfig::from_json(j["loss"].dump());
    if (j.contains("predictor")) c.predictor = PredictorConfig::from_json(j["predictor"].dump());
    if (j.contains("discriminator")) c.discriminator = DiscriminatorConfig::from_json(j["discriminator"].dump());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- state -----------------------------------------------------------------

namespace {

AdamState fresh_adam(const std::vector<Tensor>& params, double lr) {
  AdamState s;
  s.config.lr = lr;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

const SkeletonSpec& skeleton_for(const TrainConfig& c) {
  if (c.predictor.joints != SkeletonSpec::kCanonicalJoints)
    throw ConfigError("training requires the canonical " + std::to_string(SkeletonSpec::kCanonicalJoints) +
                      "-joint skeleton");
  return SkeletonSpec::canonical();
}

}  // namespace

TrainState init_train_state(const TrainConfig& config) {
  config.validate();
  const auto& skel = skeleton_for(config);
  TrainState st;
  st.config = config;
  Rng init = Rng::stream(config.rng_seed, 0xC0DE);
  st.generator = init_predictor(config.predictor, init);
  st.codebook = Codebook::init(config.codes(), config.predictor.code_dim, init);
  st.disc_local = init_local_discriminator(config.discriminator, skel, init);
  st.disc_global = init_global_discriminator(config.discriminator, skel, init);
  st.adam_generator = fresh_adam(st.generator.params.tensors(), config.lr_generator);
  st.adam_codebook = fresh_adam({st.codebook.entries}, config.lr_codebook);
  st.adam_disc_local = fresh_adam(st.disc_local.tensors(), config.lr_discriminator);
  st.adam_disc_global = fresh_adam(st.disc_global.tensors(), config.lr_discriminator);
  st.rng = Rng::stream(config.rng_seed, 0xBA7C);
  return st;
}

// ---- data ------------------------------------------------------------------

TrainingData prepare_training_data(std::vector<Scene> scenes, const TrainConfig& config) {
  config.validate();
  if (scenes.empty()) throw UsageError("training needs at least one scene");
  const std::size_t hmin = *std::min_element(config.history_lengths.begin(), config.history_lengths.end());
  bool usable = false;
  for (const auto& s : scenes) {
    if (s.joint_count() != config.predictor.joints)
      throw UsageError("scene has " + std::to_string(s.joint_count()) + " joints, model expects " +
                       std::to_string(config.predictor.joints));
    if (s.length() >= hmin + config.future_len) usable = true;
  }
  if (!usable)
    throw UsageError("no scene is long enough for a " + std::to_string(hmin) + "+" + std::to_string(config.future_len) +
                     " frame window");
  TrainingData d;
  d.pseudo = build_pseudo_futures(scenes, config.future_len, config.loss.eps_pseudo, config.loss.max_pseudo, hmin);
  d.scenes = std::move(scenes);
  return d;
}

Batch sample_batch(const TrainingData& data, const TrainConfig& config, Rng& rng) {
  const std::size_t Tp = config.future_len;
  std::size_t h = config.history_lengths[rng.below(config.history_lengths.size())];
  auto eligible = [&](std::size_t hist) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < data.scenes.size(); ++i)
      if (data.scenes[i].length() >= hist + Tp) out.push_back(i);
    return out;
  };
  auto pool = eligible(h);
  if (pool.empty()) {
    // Fall back to the longest configured history that still fits somewhere.
    std::vector<std::size_t> hs = config.history_lengths;
    std::sort(hs.rbegin(), hs.rend());
    for (auto cand : hs)
      if (!(pool = eligible(cand)).empty()) {
        h = cand;
        break;
      }
  }
  Batch b;
  b.history_len = h;
  b.future_len = Tp;
  const std::size_t first = pool[rng.below(pool.size())];
  b.persons = data.scenes[first].person_count();
  std::vector<std::size_t> same;
  for (auto i : pool)
    if (data.scenes[i].person_count() == b.persons) same.push_back(i);
  for (std::size_t k = 0; k < config.batch_size; ++k) {
    const std::size_t s = k == 0 ? first : same[rng.below(same.size())];
    const std::size_t span = data.scenes[s].length() - h - Tp + 1;
    b.scene.push_back(s);
    b.start.push_back(h + rng.below(span));
  }
  return b;
}

// ---- step ------------------------------------------------------------------

namespace {

struct BatchTensors {
  SceneBatch input;
  Tensor target_residuals;  // [B*N, Tp*V3]
  Tensor real_future;       // [B*N, Tp*V3]
  std::vector<std::vector<double>> limb_targets;
  PseudoTargets pseudo;
};

BatchTensors assemble(const TrainingData& data, const Batch& batch, const SkeletonSpec& skel, bool with_pseudo) {
  const std::size_t B = batch.scene.size(), N = batch.persons, h = batch.history_len, Tp = batch.future_len;
  const std::size_t V3 = 3 * skel.joint_count();
  std::vector<std::vector<Track>> hist(B);
  std::vector<double> tres, treal;
  tres.reserve(B * N * Tp * V3);
  treal.reserve(B * N * Tp * V3);
  BatchTensors bt;
  std::vector<double> pseudo_rows;
  for (std::size_t b = 0; b < B; ++b) {
    const auto& sc = data.scenes[batch.scene[b]];
    for (std::size_t n = 0; n < N; ++n) {
      const auto& track = sc.persons()[n];
      const std::size_t f = batch.start[b];
      hist[b].push_back(track.slice(f - h, h));
      const Track fut = track.slice(f, Tp);
      for (const auto& d : residuals(fut, track[f - 1])) tres.insert(tres.end(), d.data(), d.data() + V3);
      for (const auto& p : fut.frames()) treal.insert(treal.end(), p.joints().data(), p.joints().data() + V3);

      std::vector<double> lens(skel.edges().size(), 0.0);
      for (const auto& p : hist[b].back().frames()) {
        const auto l = limb_lengths(p, skel);
        for (std::size_t e = 0; e < l.size(); ++e) lens[e] += l[e];
      }
      for (auto& l : lens) l /= static_cast<double>(h);
      bt.limb_targets.push_back(std::move(lens));

      if (with_pseudo) {
        const std::size_t idx = data.pseudo.index_of({batch.scene[b], n, f});
        for (auto j : data.pseudo.matches(idx)) {
          for (const auto& d : future_residuals(data.scenes, data.pseudo.entry(j), Tp))
            pseudo_rows.insert(pseudo_rows.end(), d.data(), d.data() + V3);
          bt.pseudo.owner.push_back(b * N + n);
        }
      }
    }
  }
  bt.input = make_scene_batch(hist);
  bt.target_residuals = Tensor::from({B * N, Tp * V3}, std::move(tres));
  bt.real_future = Tensor::from({B * N, Tp * V3}, std::move(treal));
  bt.pseudo.residuals = Tensor::from({bt.pseudo.owner.size(), Tp * V3}, std::move(pseudo_rows));
  return bt;
}

Tensor sample_codes(const Codebook& cb, IntentMode mode, std::size_t B, std::size_t M, std::size_t N, Rng& rng) {
  std::vector<double> cont;
  std::vector<std::size_t> idx;
  for (std::size_t b = 0; b < B; ++b) {
    const IntentBatch ib = mode == IntentMode::local ? sample_local(cb, M, N, rng) : sample_global(cb, M, N, rng);
    cont.insert(cont.end(), ib.continuous.begin(), ib.continuous.end());
    const auto f = ib.flat_indices();
    idx.insert(idx.end(), f.begin(), f.end());
  }
  return combine(Tensor::from({B * M * N, cb.dim()}, std::move(cont)), cb.entries, idx);
}

void accumulate(Tensor& total, const Tensor& term, double weight) {
  if (weight == 0) return;
  const Tensor w = scale(term, weight);
  total = total.defined() ? add(total, w) : w;
}

struct PassResult {
  Tensor residuals, absolute;
};

}  // namespace

GeneratorObjective generator_objective(const TrainState& st, const TrainingData& data, const Batch& batch) {
  const auto& cfg = st.config;
  const auto& w = cfg.loss.weights;
  const auto& skel = skeleton_for(cfg);
  const std::size_t B = batch.scene.size(), N = batch.persons, M = cfg.M, Tp = batch.future_len;
  const SlotLayout layout{B, M, N};
  const bool dual = cfg.variant == TrainVariant::dual;

  const BatchTensors bt = assemble(data, batch, skel, w.multimodal > 0);
  const EncodedScene enc = encode(st.generator, bt.input);
  auto run_pass = [&](IntentMode mode, std::uint64_t tag) {
    Rng rng = Rng::stream(cfg.rng_seed, st.step, tag);
    const Tensor codes = sample_codes(st.codebook, mode, B, M, N, rng);
    PassResult r;
    r.residuals = decode(st.generator, enc, codes, M, Tp);
    r.absolute = integrate_slots(r.residuals, bt.input, M, Tp);
    return r;
  };

  GeneratorObjective g;
  g.persons = N;
  g.frames = Tp;
  g.real = bt.real_future;
  auto& out = g.parts;
  Tensor total;
  // Without separation a single global-mode pass carries every loss.
  const PassResult first = run_pass(dual ? IntentMode::local : IntentMode::global, 1);
  const PassResult second = dual ? run_pass(IntentMode::global, 2) : first;
  g.local_fake = first.absolute;
  g.global_fake = second.absolute;

  const Tensor lR = loss_local_recon(first.residuals, bt.target_residuals, layout);
  out.L_lR = lR.item();
  accumulate(total, lR, w.local_recon);
  if (w.limb > 0) {
    const Tensor t = loss_limb(first.absolute, bt.limb_targets, layout, Tp, skel);
    out.L_L = t.item();
    accumulate(total, t, w.limb);
  }
  if (w.multimodal > 0) {
    const Tensor t = loss_multimodal_recon(first.residuals, bt.pseudo, layout);
    out.L_mmR = t.item();
    accumulate(total, t, w.multimodal);
  }
  if (w.diversity > 0) {
    const Tensor t = loss_diversity(first.absolute, layout, Tp, skel, cfg.loss.alpha, cfg.loss.beta);
    out.L_D = t.item();
    accumulate(total, t, w.diversity);
  }
  if (w.local_gan > 0) {
    const Tensor t = lsgan_generator(discriminator_local_forward(st.disc_local, cfg.discriminator, first.absolute, Tp, skel));
    out.L_lGAN = t.item();
    accumulate(total, t, w.local_gan);
  }
  const Tensor gR = loss_global_recon(second.residuals, bt.target_residuals, layout);
  out.L_gR = gR.item();
  accumulate(total, gR, w.global_recon);
  if (w.global_gan > 0) {
    const Tensor t = lsgan_generator(
        discriminator_global_forward(st.disc_global, cfg.discriminator, second.absolute, N, Tp, skel));
    out.L_gGAN = t.item();
    accumulate(total, t, w.global_gan);
  }
  if (!total.defined()) throw ConfigError("every loss weight is zero");
  out.total = total.item();
  g.total = total;
  return g;
}

Tensor discriminator_objective(const TrainState& st, GeneratorObjective& g) {
  const auto& cfg = st.config;
  const auto& w = cfg.loss.weights;
  const auto& skel = skeleton_for(cfg);
  Tensor dloss;
  if (w.local_gan > 0) {
    const Tensor t = lsgan_discriminator(
        discriminator_local_forward(st.disc_local, cfg.discriminator, detach(g.local_fake), g.frames, skel),
        discriminator_local_forward(st.disc_local, cfg.discriminator, g.real, g.frames, skel));
    g.parts.D_local = t.item();
    dloss = t;
  }
  if (w.global_gan > 0) {
    const Tensor t = lsgan_discriminator(
        discriminator_global_forward(st.disc_global, cfg.discriminator, detach(g.global_fake), g.persons, g.frames, skel),
        discriminator_global_forward(st.disc_global, cfg.discriminator, g.real, g.persons, g.frames, skel));
    g.parts.D_global = t.item();
    dloss = dloss.defined() ? add(dloss, t) : t;
  }
  return dloss;
}

LossBreakdown train_step(TrainState& st, const TrainingData& data, const Batch& batch) {
  const auto& w = st.config.loss.weights;
  st.generator.params.zero_grad();
  st.codebook.entries.zero_grad();
  st.disc_local.zero_grad();
  st.disc_global.zero_grad();

  GeneratorObjective g = generator_objective(st, data, batch);
  if (!std::isfinite(g.parts.total)) {
    const auto where = first_nonfinite(g.total);
    throw NumericError("non-finite loss at step " + std::to_string(st.step) + "; first non-finite tensor: " +
                       where.value_or("unknown"));
  }
  if (g.total.requires_grad()) {
    backward(g.total);
    auto gen = st.generator.params.tensors();
    adam_step(gen, st.adam_generator);
    std::vector<Tensor> cb{st.codebook.entries};
    adam_step(cb, st.adam_codebook);
  }

  if (w.local_gan > 0 || w.global_gan > 0) {
    st.disc_local.zero_grad();
    st.disc_global.zero_grad();
    const Tensor dloss = discriminator_objective(st, g);
    if (!std::isfinite(dloss.item())) {
      const auto where = first_nonfinite(dloss);
      throw NumericError("non-finite discriminator loss at step " + std::to_string(st.step) +
                         "; first non-finite tensor: " + where.value_or("unknown"));
    }
    backward(dloss);
    if (w.local_gan > 0) {
      auto p = st.disc_local.tensors();
      adam_step(p, st.adam_disc_local);
    }
    if (w.global_gan > 0) {
      auto p = st.disc_global.tensors();
      adam_step(p, st.adam_disc_global);
    }
  }
  ++st.step;
  return g.parts;
}

// ---- loop ------------------------------------------------------------------

namespace {

LossBreakdown& operator+=(LossBreakdown& a, const LossBreakdown& b) {
  a.L_lR += b.L_lR;
  a.L_gR += b.L_gR;
  a.L_L += b.L_L;
  a.L_mmR += b.L_mmR;
  a.L_D += b.L_D;
  a.L_lGAN += b.L_lGAN;
  a.L_gGAN += b.L_gGAN;
  a.D_local += b.D_local;
  a.D_global += b.D_global;
  a.total += b.total;
  return a;
}

LossBreakdown scaled(LossBreakdown a, double s) {
  for (double* x : {&a.L_lR, &a.L_gR, &a.L_L, &a.L_mmR, &a.L_D, &a.L_lGAN, &a.L_gGAN, &a.D_local, &a.D_global, &a.total})
    *x *= s;
  return a;
}

}  // namespace

std::string epoch_log_line(std::uint64_t epoch, std::size_t steps, const LossBreakdown& m) {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["steps"] = steps;
  j["L_lR"] = m.L_lR;
  j["L_gR"] = m.L_gR;
  j["L_L"] = m.L_L;
  j["L_mmR"] = m.L_mmR;
  j["L_D"] = m.L_D;
  j["L_lGAN"] = m.L_lGAN;
  j["L_gGAN"] = m.L_gGAN;
  j["D_local"] = m.D_local;
  j["D_global"] = m.D_global;
  j["total"] = m.total;
  return j.dump();
}

TrainReport train(TrainState& st, const TrainingData& data, const TrainOptions& opt) {
  TrainReport report;
  const std::size_t steps = st.config.steps_per_epoch();
  while (st.epoch < st.config.epochs) {
    if (opt.stop_after_epoch && st.epoch >= opt.stop_after_epoch) break;
    LossBreakdown sum;
    for (std::size_t k = 0; k < steps; ++k) {
      const Batch batch = sample_batch(data, st.config, st.rng);
      const LossBreakdown l = train_step(st, data, batch);
      report.steps.push_back(l);
      if (opt.on_step) opt.on_step(st.step, l);
      sum += l;
    }
    ++st.epoch;
    const LossBreakdown mean = scaled(sum, 1.0 / static_cast<double>(steps));
    report.epochs.push_back(mean);
    if (!opt.log_path.empty()) {
      std::ofstream log(opt.log_path, std::ios::app);
      if (!log) throw Error("cannot append to " + opt.log_path.string());
      log << epoch_log_line(st.epoch, steps, mean) << '\n';
    }
    if (!opt.checkpoint_path.empty()) save_checkpoint(opt.checkpoint_path, st);
  }
  return report;
}

// ---- checkpoints -----------------------------------------------------------

namespace {

void export_adam(TensorTable& t, const std::string& group, const AdamState& s, const std::vector<std::string>& names) {
  t["adam." + group + ".step"] = StoredArray{{1}, {static_cast<double>(s.step)}};
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Shape shape{s.m[i].size()};
    t["adam." + group + ".m." + names[i]] = StoredArray{shape, s.m[i]};
    t["adam." + group + ".v." + names[i]] = StoredArray{shape, s.v[i]};
  }
}

const StoredArray& need(const TensorTable& t, const std::string& name) {
  auto it = t.find(name);
  if (it == t.end()) throw LoadError("checkpoint lacks '" + name + "'");
  return it->second;
}

void import_adam(const TensorTable& t, const std::string& group, AdamState& s, const std::vector<std::string>& names) {
  s.step = static_cast<std::uint64_t>(need(t, "adam." + group + ".step").data.at(0));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& m = need(t, "adam." + group + ".m." + names[i]);
    const auto& v = need(t, "adam." + group + ".v." + names[i]);
    if (m.data.size() != s.m[i].size() || v.data.size() != s.v[i].size())
      throw LoadError("optimizer state for '" + names[i] + "' has the wrong size");
    s.m[i] = m.data;
    s.v[i] = v.data;
  }
}

}  // namespace

TensorTable checkpoint_table(const TrainState& st) {
  TensorTable t;
  st.generator.params.export_to(t);
  st.disc_local.export_to(t);
  st.disc_global.export_to(t);
  t["intent.codebook"] = StoredArray{st.codebook.entries.shape(),
                                     std::vector<double>(st.codebook.entries.data().begin(), st.codebook.entries.data().end())};
  export_adam(t, "generator", st.adam_generator, st.generator.params.names());
  export_adam(t, "codebook", st.adam_codebook, {"intent.codebook"});
  export_adam(t, "disc_local", st.adam_disc_local, st.disc_local.names());
  export_adam(t, "disc_global", st.adam_disc_global, st.disc_global.names());
  t["meta.config"] = text_array(st.config.to_json());
  t["meta.rng"] = text_array(st.rng.state());
  t["meta.epoch"] = StoredArray{{1}, {static_cast<double>(st.epoch)}};
  t["meta.step"] = StoredArray{{1}, {static_cast<double>(st.step)}};
  return t;
}

TrainState state_from_table(const TensorTable& t) {
  TrainConfig cfg;
  try {
    cfg = TrainConfig::from_json(array_text(need(t, "meta.config")));
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint config: ") + e.what());
  }
  TrainState st = init_train_state(cfg);
  st.generator.params.import_from(t);
  st.disc_local.import_from(t);
  st.disc_global.import_from(t);
  const auto& cb = need(t, "intent.codebook");
  if (cb.shape != st.codebook.entries.shape()) throw LoadError("codebook shape mismatch");
  st.codebook.entries.mutable_data() = cb.data;
  import_adam(t, "generator", st.adam_generator, st.generator.params.names());
  import_adam(t, "codebook", st.adam_codebook, {"intent.codebook"});
  import_adam(t, "disc_local", st.adam_disc_local, st.disc_local.names());
  import_adam(t, "disc_global", st.adam_disc_global, st.disc_global.names());
  try {
    st.rng.set_state(array_text(need(t, "meta.rng")));
  } catch (const LoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw LoadError(std::string("checkpoint rng state: ") + e.what());
  }
  st.epoch = static_cast<std::uint64_t>(need(t, "meta.epoch").data.at(0));
  st.step = static_cast<std::uint64_t>(need(t, "meta.step").data.at(0));
  return st;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  save_tensor_table(path, checkpoint_table(state));
}

TrainState load_checkpoint(const std::filesystem::path& path) { return state_from_table(load_tensor_table(path)); }

}  // namespace dummf
