#include "dummf/gradcheck_suite.hpp"

#include "dummf/discriminator.hpp"
#include "dummf/intents.hpp"
#include "dummf/losses.hpp"
#include "dummf/nn.hpp"
#include "dummf/synth.hpp"
#include "dummf/trainer.hpp"

namespace dummf {

namespace {

Tensor uniform(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor constant(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

// Contracts any output against fixed random weights so the check covers the
// full Jacobian rather than the gradient of a plain sum.
Tensor project(const Tensor& y, const Tensor& w) { return sum(mul(y, w)); }

struct Suite {
  std::uint64_t seed;
  GradCheckOptions opt;
  std::vector<GradCheckCase> cases;
  Rng rng;

  void run(const std::string& group, const std::string& name, std::vector<Tensor> inputs, const ScalarFn& f) {
    cases.push_back({group, name, grad_check(f, std::move(inputs), opt)});
  }

  // out = op(inputs) then projected with fresh weights shaped like out.
  void op(const std::string& name, std::vector<Tensor> inputs, std::function<Tensor(const std::vector<Tensor>&)> f) {
    Tensor shape_probe;
    {
      NoGradGuard g;
      shape_probe = f(inputs);
    }
    const Tensor w = constant(shape_probe.shape(), rng);
    run("op", name, std::move(inputs), [f, w](const std::vector<Tensor>& x) { return project(f(x), w); });
  }
};

std::vector<Tensor> with(std::vector<Tensor> a, const std::vector<Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void ops(Suite& s) {
  Rng& r = s.rng;
  s.op("add", {uniform({3, 4}, r), uniform({3, 4}, r)}, [](auto& x) { return add(x[0], x[1]); });
  s.op("sub", {uniform({3, 4}, r), uniform({3, 4}, r)}, [](auto& x) { return sub(x[0], x[1]); });
  s.op("mul", {uniform({3, 4}, r), uniform({3, 4}, r)}, [](auto& x) { return mul(x[0], x[1]); });
  s.op("scale", {uniform({3, 4}, r)}, [](auto& x) { return scale(x[0], -1.7); });
  s.op("add_scalar", {uniform({3, 4}, r)}, [](auto& x) { return add_scalar(x[0], 0.3); });
  s.op("exp", {uniform({3, 4}, r)}, [](auto& x) { return exp(x[0]); });
  s.op("sqrt", {uniform({3, 4}, r, 0.5, 2.0)}, [](auto& x) { return sqrt(x[0]); });
  s.op("square", {uniform({3, 4}, r)}, [](auto& x) { return square(x[0]); });
  s.op("relu", {uniform({3, 4}, r)}, [](auto& x) { return relu(x[0]); });
  s.op("gelu", {uniform({3, 4}, r, -3, 3)}, [](auto& x) { return gelu(x[0]); });
  s.op("squared_error", {uniform({3, 4}, r), uniform({3, 4}, r)}, [](auto& x) { return squared_error(x[0], x[1]); });
  s.op("matmul", {uniform({3, 4}, r), uniform({4, 2}, r)}, [](auto& x) { return matmul(x[0], x[1]); });
  s.op("transpose", {uniform({3, 4}, r)}, [](auto& x) { return transpose(x[0]); });
  s.op("reshape", {uniform({3, 4}, r)}, [](auto& x) { return reshape(x[0], {2, 6}); });
  s.op("concat_rows", {uniform({2, 3}, r), uniform({1, 3}, r)}, [](auto& x) { return concat({x[0], x[1]}, 0); });
  s.op("concat_cols", {uniform({2, 3}, r), uniform({2, 2}, r)}, [](auto& x) { return concat({x[0], x[1]}, 1); });
  s.op("slice", {uniform({3, 5}, r)}, [](auto& x) { return slice(x[0], 1, 1, 3); });
  s.op("tile", {uniform({2, 3}, r)}, [](auto& x) { return tile(x[0], 3); });
  s.op("repeat_rows", {uniform({2, 3}, r)}, [](auto& x) { return repeat_rows(x[0], 2); });
  s.op("index_rows", {uniform({3, 2}, r)}, [](auto& x) {
    static const std::vector<std::size_t> idx{2, 0, 2, 1};
    return index_rows(x[0], idx);
  });
  s.op("cumsum_rows", {uniform({4, 3}, r)}, [](auto& x) { return cumsum(x[0], 0); });
  s.op("cumsum_cols", {uniform({4, 3}, r)}, [](auto& x) { return cumsum(x[0], 1); });
  s.op("softmax_rows", {uniform({3, 4}, r, -2, 2)}, [](auto& x) { return softmax(x[0], 1); });
  s.op("softmax_cols", {uniform({3, 4}, r, -2, 2)}, [](auto& x) { return softmax(x[0], 0); });
  s.op("layer_norm", {uniform({3, 5}, r)}, [](auto& x) { return layer_norm(x[0], 1); });
  s.op("sum", {uniform({3, 4}, r)}, [](auto& x) { return sum(x[0]); });
  s.op("mean", {uniform({3, 4}, r)}, [](auto& x) { return mean(x[0]); });
  s.op("sum_axis0", {uniform({3, 4}, r)}, [](auto& x) { return sum_axis(x[0], 0); });
  s.op("sum_axis1", {uniform({3, 4}, r)}, [](auto& x) { return sum_axis(x[0], 1); });
  s.op("max_axis", {uniform({3, 4}, r)}, [](auto& x) { return max_axis(x[0], 0); });
  s.op("min_select", {uniform({3, 4}, r)}, [](auto& x) { return min_index_select(x[0]).values; });
  s.op("segmented_attention", {uniform({5, 4}, r), uniform({6, 4}, r), uniform({6, 4}, r)}, [](auto& x) {
    static const std::vector<AttnSegment> seg{{0, 2, 0, 3}, {2, 3, 3, 3}};
    return segmented_attention(x[0], x[1], x[2], 2, seg);
  });
}

void layers(Suite& s) {
  Rng& r = s.rng;
  const BlockDims dims{8, 2, 12};
  auto layer = [&](const std::string& name, ParamStore ps, Tensor x, std::function<Tensor(const ParamStore&, const Tensor&)> f) {
    Tensor probe;
    {
      NoGradGuard g;
      probe = f(ps, x);
    }
    const Tensor w = constant(probe.shape(), r);
    auto shared = std::make_shared<ParamStore>(std::move(ps));
    s.run("layer", name, with({x}, shared->tensors()),
          [shared, f, w](const std::vector<Tensor>& in) { return project(f(*shared, in[0]), w); });
  };
  {
    ParamStore ps;
    init_linear(ps, "l", 5, 3, r);
    layer("linear", std::move(ps), uniform({4, 5}, r), [](const ParamStore& p, const Tensor& x) { return linear(p, "l", x); });
  }
  {
    ParamStore ps;
    init_norm(ps, "n", 6);
    ps.import_from({{"n.g", StoredArray{{1, 6}, {0.9, 1.1, 1.3, 0.7, 1.0, 1.2}}},
                    {"n.b", StoredArray{{1, 6}, {0.1, -0.2, 0.0, 0.3, -0.1, 0.2}}}});
    layer("norm", std::move(ps), uniform({3, 6}, r), [](const ParamStore& p, const Tensor& x) { return norm(p, "n", x); });
  }
  {
    ParamStore ps;
    init_attention(ps, "a", 8, r);
    layer("attention", std::move(ps), uniform({5, 8}, r), [](const ParamStore& p, const Tensor& x) {
      return multi_head_attention(p, "a", x, x, 2, block_segments(1, 5));
    });
  }
  {
    ParamStore ps;
    init_encoder_layer(ps, "e", dims, r);
    layer("encoder_layer", std::move(ps), uniform({6, 8}, r), [dims](const ParamStore& p, const Tensor& x) {
      return encoder_layer(p, "e", x, dims, block_segments(2, 3));
    });
  }
  {
    ParamStore ps;
    init_decoder_layer(ps, "d", dims, r);
    const Tensor memory = constant({4, 8}, r);
    layer("decoder_layer", std::move(ps), uniform({6, 8}, r), [dims, memory](const ParamStore& p, const Tensor& x) {
      return decoder_layer(p, "d", x, memory, dims, block_segments(2, 3), {{0, 3, 0, 2}, {3, 3, 2, 2}});
    });
  }
  {
    const Tensor cb = uniform({4, 3}, r), cont = uniform({5, 3}, r);
    const Tensor w = constant({5, 3}, r);
    s.run("layer", "intent_combine", {cont, cb}, [w](const std::vector<Tensor>& x) {
      return project(combine(x[0], x[1], {3, 1, 1, 0, 2}), w);
    });
  }
  const auto& skel = SkeletonSpec::canonical();
  const std::size_t T = 3, V3 = 3 * skel.joint_count();
  {
    const Tensor tracks = uniform({4, T * V3}, r);
    const Tensor w1 = constant({4 * T, V3 + 6}, r), w2 = constant({4 * T, V3 + 6}, r);
    s.run("layer", "disc_features_local", {tracks}, [&skel, w1](const std::vector<Tensor>& x) {
      return project(discriminator_features(x[0], 3, skel), w1);
    });
    s.run("layer", "disc_features_global", {tracks}, [&skel, w2](const std::vector<Tensor>& x) {
      return project(discriminator_features(x[0], 3, skel, 2), w2);
    });
  }
  const DiscriminatorConfig dc{1, 8, 2, 12};
  {
    ParamStore ps = init_local_discriminator(dc, skel, r);
    layer("disc_local", std::move(ps), uniform({2, T * V3}, r), [dc, &skel](const ParamStore& p, const Tensor& x) {
      return discriminator_local_forward(p, dc, x, 3, skel);
    });
  }
  {
    ParamStore ps = init_global_discriminator(dc, skel, r);
    layer("disc_global", std::move(ps), uniform({4, T * V3}, r), [dc, &skel](const ParamStore& p, const Tensor& x) {
      return discriminator_global_forward(p, dc, x, 2, 3, skel);
    });
  }
}

// Plausible poses so limb lengths stay away from zero.
Tensor pose_rows(std::size_t rows, std::size_t frames, Rng& r, bool grad) {
  const auto& skel = SkeletonSpec::canonical();
  std::vector<double> v;
  for (std::size_t i = 0; i < rows; ++i) {
    const Eigen::Vector3d offset(r.uniform(-2, 2), 0, r.uniform(-2, 2));
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t j = 0; j < skel.joint_count(); ++j) {
        const double ref[15][3] = {{0, 0.95, 0},      {0, 1.4, 0},      {0, 1.65, 0},    {0.18, 1.4, 0},
                                   {0.2, 1.12, 0},    {0.22, 0.85, 0},  {-0.18, 1.4, 0}, {-0.2, 1.12, 0},
                                   {-0.22, 0.85, 0},  {0.1, 0.92, 0},   {0.1, 0.5, 0},   {0.1, 0.08, 0},
                                   {-0.1, 0.92, 0},   {-0.1, 0.5, 0},   {-0.1, 0.08, 0}};
        for (int k = 0; k < 3; ++k) v.push_back(ref[j][k] + offset[k] + 0.1 * t * (k == 2) + r.uniform(-0.05, 0.05));
      }
  }
  return Tensor::from({rows, frames * 3 * skel.joint_count()}, std::move(v), grad);
}

void losses(Suite& s) {
  Rng& r = s.rng;
  const auto& skel = SkeletonSpec::canonical();
  const std::size_t T = 3, F = T * 3 * skel.joint_count();
  const SlotLayout lay{2, 3, 2};  // B=2, M=3, N=2
  const Tensor pred = uniform({lay.slots(), F}, r, -0.3, 0.3);
  const Tensor target = constant({lay.scenes * lay.persons, F}, r, -0.3, 0.3);
  s.run("loss", "local_recon", {pred}, [=](auto& x) { return loss_local_recon(x[0], target, lay); });
  s.run("loss", "global_recon", {pred}, [=](auto& x) { return loss_global_recon(x[0], target, lay); });
  PseudoTargets pt;
  pt.owner = {0, 0, 1, 2, 3, 3, 3};
  pt.residuals = constant({pt.owner.size(), F}, r, -0.3, 0.3);
  s.run("loss", "multimodal_recon", {pred}, [=](auto& x) { return loss_multimodal_recon(x[0], pt, lay); });

  const Tensor abs = pose_rows(lay.slots(), T, r, true);
  std::vector<std::vector<double>> lengths(lay.scenes * lay.persons);
  for (auto& l : lengths)
    for (std::size_t e = 0; e < skel.edges().size(); ++e) l.push_back(r.uniform(0.1, 0.5));
  s.run("loss", "limb", {abs}, [=, &skel](auto& x) { return loss_limb(x[0], lengths, lay, T, skel); });
  s.run("loss", "diversity", {abs}, [=, &skel](auto& x) { return loss_diversity(x[0], lay, T, skel, 0.5, 2.0); });
  s.run("loss", "diversity_default_scales", {abs},
        [=, &skel](auto& x) { return loss_diversity(x[0], lay, T, skel, 50.0, 100.0); });

  const Tensor fake = uniform({4, 3}, r), real = uniform({4, 3}, r);
  s.run("loss", "lsgan_generator", {fake}, [](auto& x) { return lsgan_generator(x[0]); });
  s.run("loss", "lsgan_discriminator", {fake, real}, [](auto& x) { return lsgan_discriminator(x[0], x[1]); });
}

void model(Suite& s) {
  SyntheticSpec spec;
  spec.scene_count = 4;
  spec.persons = 2;
  spec.history_len = 4;
  spec.future_len = 3;
  spec.branches = 2;
  auto scenes = synthetic_dataset(spec, s.seed);

  for (auto variant : {TrainVariant::dual, TrainVariant::no_separation}) {
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.M = 2;
    cfg.history_lengths = {4};
    cfg.future_len = 3;
    cfg.rng_seed = s.seed;
    cfg.variant = variant;
    cfg.loss.eps_pseudo = 1e9;
    cfg.predictor.layers = 1;
    cfg.predictor.d_model = 8;
    cfg.predictor.heads = 2;
    cfg.predictor.ff_dim = 12;
    cfg.predictor.code_dim = 8;
    cfg.discriminator = DiscriminatorConfig{1, 8, 2, 12};
    auto state = std::make_shared<TrainState>(init_train_state(cfg));
    auto data = std::make_shared<TrainingData>(prepare_training_data(scenes, cfg));
    Rng br = Rng::stream(s.seed, 77);
    const Batch batch = sample_batch(*data, cfg, br);

    const std::string suffix = variant == TrainVariant::dual ? "" : "_no_separation";
    auto inputs = with(state->generator.params.tensors(), {state->codebook.entries});
    GradCheckOptions opt = s.opt;
    if (opt.max_coords_per_input == 0) opt.max_coords_per_input = 6;
    s.cases.push_back({"model", "generator_objective" + suffix,
                       grad_check([state, data, batch](const std::vector<Tensor>&) {
                         return generator_objective(*state, *data, batch).total;
                       }, inputs, opt)});
    if (variant == TrainVariant::dual) {
      auto dparams = with(state->disc_local.tensors(), state->disc_global.tensors());
      s.cases.push_back({"model", "discriminator_objective",
                         grad_check([state, data, batch](const std::vector<Tensor>&) {
                           GeneratorObjective g;
                           {
                             NoGradGuard ng;
                             g = generator_objective(*state, *data, batch);
                           }
                           return discriminator_objective(*state, g);
                         }, dparams, opt)});
    }
  }
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed, const GradCheckOptions& opt) {
  Suite s{seed, opt, {}, Rng::stream(seed, 0x6c4ec)};
  ops(s);
  layers(s);
  losses(s);
  model(s);
  return s.cases;
}

}  // namespace dummf
