#pragma once

// Dual-level training. Every step runs a local pass (per-person codes,
// individual losses) and a global pass (shared codes, social losses) on the
// same encoded batch; the generator is updated from the sum, the codebook
// receives gradient only through the rows each pass sampled, and both
// discriminators are then updated on detached generator outputs.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dummf/adam.hpp"
#include "dummf/discriminator.hpp"
#include "dummf/intents.hpp"
#include "dummf/losses.hpp"
#include "dummf/predictor.hpp"
#include "dummf/pseudo_future.hpp"
#include "dummf/tensor_table.hpp"

namespace dummf {

enum class TrainVariant {
  dual,           // level-specific passes and losses
  no_separation,  // one global-mode pass carrying every loss
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::size_t examples_per_epoch = 6000;
  std::size_t M = 5;
  std::size_t codebook_size = 0;  // 0 -> M
  double lr_generator = 1e-4;
  double lr_discriminator = 1e-4;
  double lr_codebook = 1e-4;
  std::uint64_t rng_seed = 0;
  std::vector<std::size_t> history_lengths = {15, 30, 45};
  std::size_t future_len = 15;
  TrainVariant variant = TrainVariant::dual;
  LossConfig loss;
  PredictorConfig predictor;
  DiscriminatorConfig discriminator;

  void validate() const;
  std::size_t steps_per_epoch() const { return (examples_per_epoch + batch_size - 1) / batch_size; }
  std::size_t codes() const { return codebook_size ? codebook_size : M; }
  std::string to_json() const;
  static TrainConfig from_json(std::string_view text);
};

struct TrainState {
  TrainConfig config;
  PredictorParams generator;
  Codebook codebook;
  ParamStore disc_local;
  ParamStore disc_global;
  AdamState adam_generator, adam_codebook, adam_disc_local, adam_disc_global;
  Rng rng;  // batch assembly; per-step noise comes from streams keyed by step
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
};

TrainState init_train_state(const TrainConfig& config);

struct TrainingData {
  std::vector<Scene> scenes;
  PseudoFutureSet pseudo;
};

// Validates scenes against the config and builds the pseudo-future index.
TrainingData prepare_training_data(std::vector<Scene> scenes, const TrainConfig& config);

struct Batch {
  std::size_t history_len = 0, future_len = 0, persons = 0;
  std::vector<std::size_t> scene;  // per example
  std::vector<std::size_t> start;  // first future frame per example
};

// Draws one history length, then batch_size windows of scenes sharing N.
Batch sample_batch(const TrainingData& data, const TrainConfig& config, Rng& rng);

struct LossBreakdown {
  double L_lR = 0, L_gR = 0, L_L = 0, L_mmR = 0, L_D = 0, L_lGAN = 0, L_gGAN = 0;
  double D_local = 0, D_global = 0;
  double total = 0;
};

// The fused generator loss for one batch at the current parameters. Codes
// come from streams keyed on state.step, so repeated calls at the same step
// rebuild the same graph.
struct GeneratorObjective {
  Tensor total;
  LossBreakdown parts;
  Tensor local_fake, global_fake;  // [B*M*N, T*V*3] absolute, from each pass
  Tensor real;                     // [B*N, T*V*3] ground-truth futures
  std::size_t persons = 0, frames = 0;
};
GeneratorObjective generator_objective(const TrainState& state, const TrainingData& data, const Batch& batch);

// Least-squares discriminator loss on the detached fakes of `g`. Undefined
// when both GAN weights are zero. Fills D_local / D_global of g.parts.
Tensor discriminator_objective(const TrainState& state, GeneratorObjective& g);

// One optimisation step. Throws NumericError naming the first non-finite
// tensor if the loss is not finite.
LossBreakdown train_step(TrainState& state, const TrainingData& data, const Batch& batch);

struct TrainOptions {
  std::filesystem::path checkpoint_path;  // rewritten after every epoch when set
  std::filesystem::path log_path;         // one JSON line appended per epoch when set
  std::size_t stop_after_epoch = 0;       // simulate an interruption; 0 = run to config.epochs
  std::function<void(std::uint64_t step, const LossBreakdown&)> on_step;
};

struct TrainReport {
  std::vector<LossBreakdown> steps;
  std::vector<LossBreakdown> epochs;  // per-epoch means
};

// Continues from state.epoch up to config.epochs.
TrainReport train(TrainState& state, const TrainingData& data, const TrainOptions& options = {});

std::string epoch_log_line(std::uint64_t epoch, std::size_t steps, const LossBreakdown& mean);

TensorTable checkpoint_table(const TrainState& state);
TrainState state_from_table(const TensorTable& table);
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace dummf
