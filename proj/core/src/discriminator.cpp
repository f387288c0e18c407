#include "dummf/discriminator.hpp"

#include "dummf/error.hpp"
#include "json.hpp"

namespace dummf {

void DiscriminatorConfig::validate() const {
  if (layers == 0) throw ConfigError("discriminator.layers must be >= 1");
  if (d_model == 0 || heads == 0 || d_model % heads != 0)
    throw ConfigError("discriminator.d_model must be a positive multiple of discriminator.heads");
  if (ff_dim == 0) throw ConfigError("discriminator.ff_dim must be positive");
}

std::string DiscriminatorConfig::to_json() const {
  nlohmann::ordered_json j;
  j["layers"] = layers;
  j["d_model"] = d_model;
  j["heads"] = heads;
  j["ff_dim"] = ff_dim;
  return j.dump();
}

DiscriminatorConfig DiscriminatorConfig::from_json(std::string_view text) {
  DiscriminatorConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.layers = j.value("layers", c.layers);
    c.d_model = j.value("d_model", c.d_model);
    c.heads = j.value("heads", c.heads);
    c.ff_dim = j.value("ff_dim", c.ff_dim);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("discriminator config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

ParamStore init_disc(const std::string& prefix, const DiscriminatorConfig& cfg, const SkeletonSpec& skel, Rng& rng) {
  cfg.validate();
  ParamStore ps;
  init_linear(ps, prefix + ".in", 3 * skel.joint_count() + 6, cfg.d_model, rng);
  for (std::size_t i = 0; i < cfg.layers; ++i) init_encoder_layer(ps, prefix + "." + std::to_string(i), cfg.dims(), rng);
  init_norm(ps, prefix + ".ln", cfg.d_model);
  init_linear(ps, prefix + ".out", cfg.d_model, 1, rng);
  return ps;
}

Tensor trunk(const ParamStore& ps, const std::string& prefix, const DiscriminatorConfig& cfg, const Tensor& feat,
             std::size_t blocks, std::size_t block_len, std::size_t frames) {
  std::vector<double> pos(frames);
  for (std::size_t t = 0; t < frames; ++t) pos[t] = static_cast<double>(t);
  const Tensor pe = sinusoidal_encoding(pos, cfg.d_model);
  Tensor x = add(linear(ps, prefix + ".in", feat), tile(pe, feat.dim(0) / frames));
  const auto segs = block_segments(blocks, block_len);
  for (std::size_t i = 0; i < cfg.layers; ++i) x = encoder_layer(ps, prefix + "." + std::to_string(i), x, cfg.dims(), segs);
  return norm(ps, prefix + ".ln", x);
}

}  // namespace

ParamStore init_local_discriminator(const DiscriminatorConfig& cfg, const SkeletonSpec& skel, Rng& rng) {
  return init_disc("disc.local", cfg, skel, rng);
}

ParamStore init_global_discriminator(const DiscriminatorConfig& cfg, const SkeletonSpec& skel, Rng& rng) {
  return init_disc("disc.global", cfg, skel, rng);
}

Tensor discriminator_features(const Tensor& tracks, std::size_t frames, const SkeletonSpec& skel, std::size_t group) {
  const std::size_t V = skel.joint_count();
  if (tracks.rank() != 2 || frames == 0 || tracks.dim(1) != frames * V * 3 || group == 0 || tracks.dim(0) % group != 0)
    throw ShapeError("discriminator_features: tracks " + shape_str(tracks.shape()) + " do not hold " +
                     std::to_string(frames) + " frames of " + std::to_string(V) + " joints");
  const std::size_t K = tracks.dim(0), G = K / group;
  const Tensor pts = reshape(tracks, {K * frames * V, 3});

  // Planar centre per group: mean of first-frame roots, y left untouched.
  std::vector<std::size_t> first(K);
  for (std::size_t k = 0; k < K; ++k) first[k] = k * frames * V + skel.root_index();
  Tensor centre = index_rows(pts, first);
  if (group > 1) centre = scale(sum_axis(reshape(centre, {G, group, 3}), 1), 1.0 / static_cast<double>(group));
  centre = mul(centre, tile(Tensor::from({1, 3}, {1.0, 0.0, 1.0}), G));
  std::vector<std::size_t> spread(K * frames * V);
  for (std::size_t r = 0; r < spread.size(); ++r) spread[r] = r / (group * frames * V);
  const Tensor coords = reshape(sub(pts, index_rows(centre, spread)), {K * frames, V * 3});

  std::vector<std::size_t> now, prev;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t t = 0; t < frames; ++t)
      for (auto f : skel.foot_indices()) {
        now.push_back((k * frames + t) * V + f);
        prev.push_back((k * frames + (t == 0 ? 0 : t - 1)) * V + f);
      }
  const Tensor dfeet = reshape(sub(index_rows(pts, now), index_rows(pts, prev)), {K * frames, 6});
  return concat({coords, dfeet}, 1);
}

Tensor discriminator_local_forward(const ParamStore& ps, const DiscriminatorConfig& cfg, const Tensor& tracks,
                                   std::size_t frames, const SkeletonSpec& skel) {
  const Tensor feat = discriminator_features(tracks, frames, skel);
  const std::size_t K = tracks.dim(0);
  const Tensor h = trunk(ps, "disc.local", cfg, feat, K, frames, frames);
  return reshape(linear(ps, "disc.local.out", h), {K, frames});
}

Tensor discriminator_global_forward(const ParamStore& ps, const DiscriminatorConfig& cfg, const Tensor& tracks,
                                    std::size_t persons, std::size_t frames, const SkeletonSpec& skel) {
  const Tensor feat = discriminator_features(tracks, frames, skel, persons);
  const std::size_t K = tracks.dim(0) / persons;
  const Tensor h = trunk(ps, "disc.global", cfg, feat, K, persons * frames, frames);
  const Tensor pooled = scale(sum_axis(reshape(h, {K, persons * frames, cfg.d_model}), 1),
                              1.0 / static_cast<double>(persons * frames));
  return linear(ps, "disc.global.out", pooled);
}

}  // namespace dummf
