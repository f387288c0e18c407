#include "dummf/predictor.hpp"

#include <algorithm>
#include <numeric>

#include "dummf/error.hpp"
#include "json.hpp"

namespace dummf {

namespace {

constexpr double kVelocityScale = 10.0;
constexpr double kResidualScale = 0.1;
constexpr double kOutInitStd = 1e-3;

std::string layer(const char* stack, std::size_t i) { return std::string("gen.") + stack + "." + std::to_string(i); }

}  // namespace

void PredictorConfig::validate() const {
  if (layers == 0) throw ConfigError("predictor.layers must be >= 1");
  if (d_model == 0 || heads == 0 || d_model % heads != 0)
    throw ConfigError("predictor.d_model must be a positive multiple of predictor.heads");
  if (ff_dim == 0) throw ConfigError("predictor.ff_dim must be positive");
  if (code_dim != d_model) throw ConfigError("predictor.code_dim must equal predictor.d_model");
  if (joints < 2) throw ConfigError("predictor.joints must be >= 2");
}

std::string PredictorConfig::to_json() const {
  nlohmann::ordered_json j;
  j["layers"] = layers;
  j["d_model"] = d_model;
  j["heads"] = heads;
  j["ff_dim"] = ff_dim;
  j["code_dim"] = code_dim;
  j["global_variant"] = global_variant == GlobalVariant::attention ? "attention" : "maxpool";
  j["joints"] = joints;
  return j.dump();
}

PredictorConfig PredictorConfig::from_json(std::string_view text) {
  PredictorConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.layers = j.value("layers", c.layers);
    c.d_model = j.value("d_model", c.d_model);
    c.heads = j.value("heads", c.heads);
    c.ff_dim = j.value("ff_dim", c.ff_dim);
    c.code_dim = j.value("code_dim", c.d_model);
    c.joints = j.value("joints", c.joints);
    const auto v = j.value("global_variant", std::string("attention"));
    if (v == "attention")
      c.global_variant = GlobalVariant::attention;
    else if (v == "maxpool")
      c.global_variant = GlobalVariant::maxpool;
    else
      throw ConfigError("predictor.global_variant must be 'attention' or 'maxpool', got '" + v + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("predictor config: ") + e.what());
  }
  c.validate();
  return c;
}

PredictorParams init_predictor(const PredictorConfig& config, Rng& rng) {
  config.validate();
  PredictorParams p{config, {}};
  auto& ps = p.params;
  const auto dims = config.dims();
  const std::size_t d = config.d_model;
  init_linear(ps, "gen.in", 6 * config.joints, d, rng);
  for (std::size_t i = 0; i < config.layers; ++i) init_encoder_layer(ps, layer("local", i), dims, rng);
  init_norm(ps, "gen.local.ln", d);
  if (config.global_variant == GlobalVariant::attention) {
    for (std::size_t i = 0; i < config.layers; ++i) init_encoder_layer(ps, layer("global", i), dims, rng);
    init_norm(ps, "gen.global.ln", d);
  } else {
    init_linear(ps, "gen.pool", d, d, rng);
    init_norm(ps, "gen.pool.ln", d);
  }
  for (std::size_t i = 0; i < config.layers; ++i) init_decoder_layer(ps, layer("dec", i), dims, rng);
  init_norm(ps, "gen.dec.ln", d);
  // small output layer: the first predictions are close to holding the last pose
  ps.add_normal("gen.out.w", {d, 3 * config.joints}, kOutInitStd, rng);
  ps.add_constant("gen.out.b", {1, 3 * config.joints}, 0.0);
  return p;
}

SceneBatch make_scene_batch(const std::vector<std::vector<Track>>& histories) {
  if (histories.empty() || histories.front().empty()) throw ShapeError("scene batch needs B >= 1 and N >= 1");
  SceneBatch sb;
  sb.scenes = histories.size();
  sb.persons = histories.front().size();
  sb.history_len = histories.front().front().size();
  sb.joints = histories.front().front().joint_count();
  sb.fps = histories.front().front().fps();
  const std::size_t V3 = 3 * sb.joints;
  std::vector<double> feat;
  feat.reserve(sb.scenes * sb.persons * sb.history_len * 2 * V3);
  for (const auto& scene : histories) {
    if (scene.size() != sb.persons) throw ShapeError("scene batch: scenes have different person counts");
    // Planar centroid of the last-frame roots, summed in sorted order so that
    // permuting persons gives bit-identical features.
    std::vector<double> xs, zs;
    for (const auto& t : scene) {
      if (t.size() != sb.history_len || t.joint_count() != sb.joints)
        throw ShapeError("scene batch: histories differ in length or joint count");
      xs.push_back(t.back().joints()(0, 0));
      zs.push_back(t.back().joints()(0, 2));
    }
    std::sort(xs.begin(), xs.end());
    std::sort(zs.begin(), zs.end());
    const double cx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(sb.persons);
    const double cz = std::accumulate(zs.begin(), zs.end(), 0.0) / static_cast<double>(sb.persons);
    for (const auto& t : scene) {
      for (std::size_t f = 0; f < sb.history_len; ++f) {
        const auto& j = t[f].joints();
        for (std::size_t v = 0; v < sb.joints; ++v) {
          const auto r = static_cast<Eigen::Index>(v);
          feat.push_back(j(r, 0) - cx);
          feat.push_back(j(r, 1));
          feat.push_back(j(r, 2) - cz);
        }
        for (std::size_t v = 0; v < sb.joints; ++v)
          for (Eigen::Index c = 0; c < 3; ++c) {
            const auto r = static_cast<Eigen::Index>(v);
            feat.push_back(f == 0 ? 0.0 : kVelocityScale * (j(r, c) - t[f - 1].joints()(r, c)));
          }
      }
      sb.last_pose.push_back(t.back().joints());
    }
  }
  sb.features = Tensor::from({sb.scenes * sb.persons * sb.history_len, 2 * V3}, std::move(feat));
  return sb;
}

EncodedScene encode(const PredictorParams& p, const SceneBatch& batch) {
  const auto& cfg = p.config;
  const auto& ps = p.params;
  if (batch.joints != cfg.joints)
    throw ShapeError("encode: model expects " + std::to_string(cfg.joints) + " joints, got " + std::to_string(batch.joints));
  const std::size_t B = batch.scenes, N = batch.persons, T = batch.history_len;
  const auto dims = cfg.dims();

  std::vector<double> pos(T);
  for (std::size_t t = 0; t < T; ++t) pos[t] = -static_cast<double>(T - 1 - t);
  Tensor x = add(linear(ps, "gen.in", batch.features), tile(sinusoidal_encoding(pos, cfg.d_model), B * N));
  const auto person_segs = block_segments(B * N, T);
  for (std::size_t i = 0; i < cfg.layers; ++i) x = encoder_layer(ps, layer("local", i), x, dims, person_segs);
  const Tensor tokens = norm(ps, "gen.local.ln", x);

  std::vector<std::size_t> last(B * N);
  for (std::size_t k = 0; k < B * N; ++k) last[k] = k * T + T - 1;

  EncodedScene enc;
  enc.scenes = B;
  enc.persons = N;
  enc.local = index_rows(tokens, last);
  if (cfg.global_variant == GlobalVariant::attention) {
    Tensor g = tokens;
    const auto scene_segs = block_segments(B, N * T);
    for (std::size_t i = 0; i < cfg.layers; ++i) g = encoder_layer(ps, layer("global", i), g, dims, scene_segs);
    enc.memory = norm(ps, "gen.global.ln", g);
    for (std::size_t b = 0; b < B; ++b) enc.memory_rows.emplace_back(b * N * T, N * T);
  } else {
    const Tensor pooled = max_axis(reshape(enc.local, {B, N, cfg.d_model}), 1);
    enc.memory = norm(ps, "gen.pool.ln", linear(ps, "gen.pool", pooled));
    for (std::size_t b = 0; b < B; ++b) enc.memory_rows.emplace_back(b, 1);
  }
  return enc;
}

Tensor decode(const PredictorParams& p, const EncodedScene& enc, const Tensor& codes, std::size_t M,
              std::size_t future_len) {
  const auto& cfg = p.config;
  const auto& ps = p.params;
  const std::size_t B = enc.scenes, N = enc.persons, Tp = future_len;
  if (M == 0 || Tp == 0) throw UsageError("decode: M and future_len must be positive");
  if (codes.rank() != 2 || codes.dim(0) != B * M * N || codes.dim(1) != cfg.code_dim)
    throw UsageError("decode: expected " + std::to_string(B * M * N) + " codes of width " + std::to_string(cfg.code_dim) +
                     ", got " + shape_str(codes.shape()));
  const std::size_t slots = B * M * N;
  std::vector<std::size_t> owner(slots);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t n = 0; n < N; ++n) owner[(b * M + m) * N + n] = b * N + n;

  const Tensor seed = add(index_rows(enc.local, owner), codes);
  std::vector<double> pos(Tp);
  for (std::size_t t = 0; t < Tp; ++t) pos[t] = static_cast<double>(t + 1);
  Tensor x = add(repeat_rows(seed, Tp), tile(sinusoidal_encoding(pos, cfg.d_model), slots));

  const auto self_segs = block_segments(slots, Tp);
  std::vector<AttnSegment> cross;
  cross.reserve(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    const auto [mb, mc] = enc.memory_rows[s / (M * N)];
    cross.push_back({s * Tp, Tp, mb, mc});
  }
  const auto dims = cfg.dims();
  for (std::size_t i = 0; i < cfg.layers; ++i) x = decoder_layer(ps, layer("dec", i), x, enc.memory, dims, self_segs, cross);
  const Tensor out = scale(linear(ps, "gen.out", norm(ps, "gen.dec.ln", x)), kResidualScale);
  return reshape(out, {slots, Tp * 3 * cfg.joints});
}

Tensor decode(const PredictorParams& p, const EncodedScene& enc, const Tensor& codes, std::size_t future_len) {
  if (enc.scenes != 1 || codes.rank() != 2 || codes.dim(0) != enc.persons)
    throw UsageError("decode: need exactly one code per person (" + std::to_string(enc.persons) + "), got " +
                     (codes.rank() == 2 ? std::to_string(codes.dim(0)) : shape_str(codes.shape())));
  return decode(p, enc, codes, 1, future_len);
}

Tensor integrate_slots(const Tensor& residuals, const SceneBatch& batch, std::size_t M, std::size_t future_len) {
  const std::size_t B = batch.scenes, N = batch.persons, V3 = 3 * batch.joints, Tp = future_len;
  const std::size_t slots = B * M * N;
  if (residuals.rank() != 2 || residuals.dim(0) != slots || residuals.dim(1) != Tp * V3)
    throw ShapeError("integrate_slots: residuals " + shape_str(residuals.shape()) + " do not match the batch");
  std::vector<double> anchor(slots * Tp * V3);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t n = 0; n < N; ++n) {
        const auto& last = batch.last_pose[b * N + n];
        const std::size_t s = (b * M + m) * N + n;
        for (std::size_t t = 0; t < Tp; ++t) std::copy_n(last.data(), V3, anchor.begin() + static_cast<std::ptrdiff_t>((s * Tp + t) * V3));
      }
  const Tensor summed = reshape(cumsum(reshape(residuals, {slots, Tp, V3}), 1), {slots, Tp * V3});
  return add(summed, Tensor::from({slots, Tp * V3}, std::move(anchor)));
}

std::vector<std::vector<std::vector<Track>>> slots_to_tracks(const Tensor& abs, std::size_t scenes, std::size_t M,
                                                             std::size_t N, std::size_t frames, double fps) {
  const std::size_t width = abs.dim(1) / frames;
  std::vector<std::vector<std::vector<Track>>> out(scenes, std::vector<std::vector<Track>>(M));
  const auto data = abs.data();
  for (std::size_t b = 0; b < scenes; ++b)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t s = (b * M + m) * N + n;
        std::vector<Pose> poses;
        poses.reserve(frames);
        for (std::size_t t = 0; t < frames; ++t) poses.push_back(Pose::from_flat(data.subspan((s * frames + t) * width, width)));
        out[b][m].emplace_back(std::move(poses), fps);
      }
  return out;
}

PredictionSet forward(const std::vector<Track>& histories, const IntentBatch& intents, const Codebook& codebook,
                      const PredictorParams& p, std::size_t future_len) {
  if (intents.N != histories.size())
    throw UsageError("forward: " + std::to_string(intents.N) + " intents per candidate for " +
                     std::to_string(histories.size()) + " persons");
  const SceneBatch sb = make_scene_batch({histories});
  const EncodedScene enc = encode(p, sb);
  const Tensor res = decode(p, enc, combine(intents, codebook), intents.M, future_len);
  const Tensor abs = integrate_slots(res, sb, intents.M, future_len);
  auto tracks = slots_to_tracks(abs, 1, intents.M, intents.N, future_len, sb.fps);
  return PredictionSet(std::move(tracks[0]), intents.discrete_indices);
}

}  // namespace dummf
