#include <gtest/gtest.h>

#include "dummf/error.hpp"
#include "dummf/predictor.hpp"
#include "dummf/synth.hpp"
#include "test_util.hpp"

namespace dummf {
namespace {

PredictorConfig small_config(GlobalVariant g = GlobalVariant::attention) {
  PredictorConfig c;
  c.layers = 2;
  c.d_model = 16;
  c.code_dim = 16;
  c.heads = 2;
  c.ff_dim = 24;
  c.global_variant = g;
  return c;
}

std::vector<Track> histories(std::uint64_t seed, std::size_t N, std::size_t T) {
  SyntheticSpec s;
  s.scene_count = 1;
  s.branches = 1;
  s.persons = N;
  s.history_len = T;
  s.future_len = 1;
  s.jitter_std = 0.01;
  return synthetic_dataset(s, seed).front().histories();
}

Tensor random_codes(Rng& rng, std::size_t rows, std::size_t d) { return test::random_tensor(rng, {rows, d}, false); }

Tensor rows_of(const Tensor& t, const std::vector<std::size_t>& idx) { return index_rows(t, idx); }

TEST(PredictorConfig, ValidateAndJson) {
  auto c = small_config();
  EXPECT_NO_THROW(c.validate());
  const auto back = PredictorConfig::from_json(c.to_json());
  EXPECT_EQ(back.d_model, 16u);
  EXPECT_EQ(back.layers, 2u);
  EXPECT_EQ(PredictorConfig::from_json(R"({"d_model": 32, "heads": 4})").code_dim, 32u);
  EXPECT_EQ(PredictorConfig::from_json(R"({"global_variant": "maxpool"})").global_variant, GlobalVariant::maxpool);
  EXPECT_THROW(PredictorConfig::from_json(R"({"global_variant": "gru"})"), ConfigError);
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Encode, SinglePersonGlobalIsOwnSelfAttention) {
  Rng rng(1);
  const auto p = init_predictor(small_config(), rng);
  const auto h = histories(2, 1, 6);
  const SceneBatch sb = make_scene_batch({h});
  const EncodedScene enc = encode(p, sb);
  // rebuild from the public blocks: local stack, then the global stack over one person's tokens
  std::vector<double> pos;
  for (int t = 0; t < 6; ++t) pos.push_back(t - 5.0);
  Tensor x = add(linear(p.params, "gen.in", sb.features), sinusoidal_encoding(pos, 16));
  const auto dims = p.config.dims();
  const auto segs = block_segments(1, 6);
  for (int i = 0; i < 2; ++i) x = encoder_layer(p.params, "gen.local." + std::to_string(i), x, dims, segs);
  Tensor g = norm(p.params, "gen.local.ln", x);
  for (int i = 0; i < 2; ++i) g = encoder_layer(p.params, "gen.global." + std::to_string(i), g, dims, segs);
  g = norm(p.params, "gen.global.ln", g);
  ASSERT_EQ(enc.memory.shape(), g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(enc.memory.at(i), g.at(i));
}

TEST(Encode, PermutationMaxpool) {
  Rng rng(3);
  const auto p = init_predictor(small_config(GlobalVariant::maxpool), rng);
  const auto h = histories(4, 3, 5);
  const std::vector<std::size_t> perm{2, 0, 1};
  std::vector<Track> hp;
  for (auto i : perm) hp.push_back(h[i]);
  const auto a = encode(p, make_scene_batch({h}));
  const auto b = encode(p, make_scene_batch({hp}));
  const Tensor la = rows_of(a.local, perm);
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_EQ(la.at(i), b.local.at(i));
  for (std::size_t i = 0; i < a.memory.size(); ++i) EXPECT_EQ(a.memory.at(i), b.memory.at(i));
}

TEST(Encode, ZeroWeightsZeroEmbeddings) {
  for (auto g : {GlobalVariant::attention, GlobalVariant::maxpool}) {
    Rng rng(5);
    auto p = init_predictor(small_config(g), rng);
    p.params.fill(0.0);
    const auto enc = encode(p, make_scene_batch({histories(6, 2, 4)}));
    for (double x : enc.local.data()) EXPECT_EQ(x, 0.0);
    for (double x : enc.memory.data()) EXPECT_EQ(x, 0.0);
  }
}

TEST(Encode, VariableHistoryLength) {
  Rng rng(7);
  const auto p = init_predictor(small_config(), rng);
  const std::size_t n_params = p.params.scalar_count();
  for (std::size_t T : {15u, 30u, 45u}) {
    const auto enc = encode(p, make_scene_batch({histories(8, 2, T)}));
    EXPECT_EQ(enc.local.shape(), (Shape{2, 16}));
    EXPECT_EQ(enc.memory.dim(0), 2 * T);
  }
  EXPECT_EQ(p.params.scalar_count(), n_params);
}

TEST(Encode, BatchedEqualsSeparate) {
  Rng rng(9);
  const auto p = init_predictor(small_config(), rng);
  const auto h1 = histories(10, 2, 5), h2 = histories(11, 2, 5);
  const auto both = encode(p, make_scene_batch({h1, h2}));
  const auto one = encode(p, make_scene_batch({h2}));
  for (std::size_t i = 0; i < one.local.size(); ++i) EXPECT_NEAR(both.local.at(one.local.size() + i), one.local.at(i), 1e-12);
  const Tensor rows = decode(p, both, random_codes(rng, 2 * 3 * 2, 16), 3, 4);
  EXPECT_EQ(rows.shape(), (Shape{12, 4 * 45}));
}

TEST(Decode, Deterministic) {
  Rng rng(12);
  const auto p = init_predictor(small_config(), rng);
  const auto enc = encode(p, make_scene_batch({histories(13, 3, 5)}));
  const Tensor z = random_codes(rng, 3, 16);
  const Tensor a = decode(p, enc, z, 4), b = decode(p, enc, z, 4);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.at(i), b.at(i));
  EXPECT_THROW(decode(p, enc, random_codes(rng, 2, 16), 4), UsageError);
}

TEST(Decode, CodeLocality) {
  for (auto g : {GlobalVariant::attention, GlobalVariant::maxpool}) {
    Rng rng(14);
    const auto p = init_predictor(small_config(g), rng);
    const auto enc = encode(p, make_scene_batch({histories(15, 3, 5)}));
    const Tensor z = random_codes(rng, 3, 16);
    const Tensor base = decode(p, enc, z, 4);
    const std::size_t F = base.dim(1);
    for (std::size_t k = 0; k < 3; ++k) {
      Tensor zp = Tensor::from(z.shape(), std::vector<double>(z.data().begin(), z.data().end()));
      for (std::size_t d = 0; d < 16; ++d) zp.mutable_data()[k * 16 + d] += rng.normal();
      const Tensor out = decode(p, enc, zp, 4);
      for (std::size_t n = 0; n < 3; ++n) {
        double diff = 0;
        for (std::size_t f = 0; f < F; ++f) diff = std::max(diff, std::abs(out.at(n * F + f) - base.at(n * F + f)));
        if (n == k) EXPECT_GT(diff, 0.0);
        else EXPECT_EQ(diff, 0.0);
      }
    }
  }
}

TEST(Decode, ZeroWeightsHoldLastPose) {
  Rng rng(16);
  auto p = init_predictor(small_config(), rng);
  p.params.fill(0.0);
  const auto h = histories(17, 2, 5);
  const auto enc = encode(p, make_scene_batch({h}));
  const Tensor r = decode(p, enc, random_codes(rng, 2, 16), 3);
  for (double x : r.data()) EXPECT_EQ(x, 0.0);

  Rng irng(18);
  Codebook cb = Codebook::init(1, 16, irng);
  const auto ps = forward(h, sample_global(cb, 1, 2, irng), cb, p, 3);
  ASSERT_EQ(ps.candidate_count(), 1u);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(ps.at(0, n)[t], h[n].back());
}

TEST(Forward, PermutationEquivariance) {
  for (auto g : {GlobalVariant::attention, GlobalVariant::maxpool}) {
    Rng rng(19);
    const auto p = init_predictor(small_config(g), rng);
    Codebook cb = Codebook::init(3, 16, rng);
    const auto h = histories(20, 3, 6);
    const std::vector<std::size_t> perm{1, 2, 0};
    std::vector<Track> hp;
    for (auto i : perm) hp.push_back(h[i]);
    Rng r1(21);
    const auto intents = sample_local(cb, 2, 3, r1);
    IntentBatch ip = intents;
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t n = 0; n < 3; ++n) {
        ip.discrete_indices[m][n] = intents.discrete_indices[m][perm[n]];
        for (std::size_t d = 0; d < 16; ++d)
          ip.continuous[(m * 3 + n) * 16 + d] = intents.continuous[(m * 3 + perm[n]) * 16 + d];
      }
    const auto a = forward(h, intents, cb, p, 4);
    const auto b = forward(hp, ip, cb, p, 4);
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t n = 0; n < 3; ++n) EXPECT_LE(test::track_diff(a.at(m, perm[n]), b.at(m, n)), 1e-9);
  }
}

TEST(Forward, Shapes) {
  Rng rng(22);
  const auto p = init_predictor(small_config(), rng);
  Codebook cb = Codebook::init(4, 16, rng);
  const auto h = histories(23, 2, 5);
  const auto ps = forward(h, sample_global(cb, 4, 2, rng), cb, p, 15);
  EXPECT_EQ(ps.candidate_count(), 4u);
  EXPECT_EQ(ps.person_count(), 2u);
  EXPECT_EQ(ps.future_len(), 15u);
  EXPECT_EQ(ps.at(3, 1).fps(), h[0].fps());
  EXPECT_THROW(forward(h, sample_global(cb, 2, 3, rng), cb, p, 15), UsageError);
  std::vector<Track> wrong{test::random_track(rng, 5, 14)};
  EXPECT_THROW(forward(wrong, sample_global(cb, 1, 1, rng), cb, p, 15), ShapeError);
}

}  // namespace
}  // namespace dummf
