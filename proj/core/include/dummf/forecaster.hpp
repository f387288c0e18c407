#pragma once

// Inference. Only the global mode is used: every candidate shares one
// codebook row across all persons. Progressive rollout feeds each branch's
// own predictions back as history, so step k holds M^k branches.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dummf/intents.hpp"
#include "dummf/motion.hpp"
#include "dummf/predictor.hpp"
#include "dummf/rng.hpp"

namespace dummf {

struct TrainState;

struct ForecastModel {
  PredictorParams predictor;
  Codebook codebook;
  std::size_t future_len = 15;
  std::size_t max_history = 45;  // encoder sees at most this many recent frames
};

ForecastModel forecast_model(const TrainState& state);
// Throws LoadError for missing or malformed checkpoints.
ForecastModel load_forecast_model(const std::filesystem::path& checkpoint);

// M global-mode candidates for one scene history.
PredictionSet forecast_window(const std::vector<Track>& history, const ForecastModel& model, std::size_t M, Rng& rng);

struct RolloutBranch {
  std::vector<std::size_t> intent_path;  // codebook row chosen at each step
  std::vector<Track> tracks;             // per person, history followed by every predicted window
  std::size_t parent = 0;                // index into the previous step; 0 at step 1
};

struct RolloutTree {
  std::size_t history_len = 0, future_len = 0, M = 0;
  double fps = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<RolloutBranch>> steps;  // steps[k - 1] holds M^k branches

  const std::vector<RolloutBranch>& leaves() const { return steps.back(); }
};

struct RolloutOptions {
  std::size_t M = 5;
  std::size_t steps = 3;
  std::uint64_t seed = 0;
  std::size_t max_branches = 4096;  // cap on M^steps
};

// Each expansion draws from Rng::stream(seed, hash(parent path)), so the
// result does not depend on evaluation order.
RolloutTree forecast_progressive(const std::vector<Track>& history, const ForecastModel& model,
                                 const RolloutOptions& opt, std::vector<std::string> ids = {});

std::uint64_t path_hash(const std::vector<std::size_t>& path);

// Predictions JSON. Leaves only, predicted frames only:
//   {"fps", "history_len", "future_len", "intents", "steps", "seed",
//    "branches": [{"intent_path": [...], "persons": [{"id", "frames"}]}]}
std::string predictions_to_json(const RolloutTree& tree, std::uint64_t seed);

struct PredictionBranch {
  std::vector<std::size_t> intent_path;
  std::vector<Track> persons;  // predicted frames only
};

struct PredictionFile {
  double fps = 0;
  std::size_t history_len = 0, future_len = 0, intents = 0, steps = 0;
  std::uint64_t seed = 0;
  std::vector<PredictionBranch> branches;
};

PredictionFile predictions_from_json(std::string_view text);
PredictionFile to_prediction_file(const RolloutTree& tree, std::uint64_t seed);
// A scene's future as a single one-step branch; its history is dropped.
PredictionFile prediction_file_from_scene(const Scene& scene);

}  // namespace dummf
