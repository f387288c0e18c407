#pragma once

// Multi-person generator: a local encoder per person, a global encoder over
// all persons, and a per-person decoder that reads the intent-augmented
// summary of its own person and cross-attends to the code-free scene memory.
//
// Batched layout: scenes b, candidates m and persons n are stacked as rows in
// (b, m, n) order ("slots"), each slot owning T_p consecutive decoder tokens.

#include <string>
#include <string_view>
#include <vector>

#include "dummf/intents.hpp"
#include "dummf/motion.hpp"
#include "dummf/nn.hpp"

namespace dummf {

enum class GlobalVariant { attention, maxpool };

struct PredictorConfig {
  std::size_t layers = 6;
  std::size_t d_model = 128;
  std::size_t heads = 8;
  std::size_t ff_dim = 256;
  std::size_t code_dim = 128;
  GlobalVariant global_variant = GlobalVariant::attention;
  std::size_t joints = SkeletonSpec::kCanonicalJoints;

  void validate() const;
  std::string to_json() const;
  // Missing keys keep their defaults; code_dim follows d_model unless given.
  static PredictorConfig from_json(std::string_view text);
  BlockDims dims() const { return {d_model, heads, ff_dim}; }
};

struct PredictorParams {
  PredictorConfig config;
  ParamStore params;  // names start with "gen."
};

PredictorParams init_predictor(const PredictorConfig& config, Rng& rng);

// Network input for B scenes of N persons sharing one history length.
struct SceneBatch {
  std::size_t scenes = 0, persons = 0, history_len = 0, joints = 0;
  double fps = 0;
  Tensor features;               // [B*N*T_h, 6V]
  std::vector<Joints> last_pose; // index b * N + n
};

SceneBatch make_scene_batch(const std::vector<std::vector<Track>>& histories);

struct EncodedScene {
  std::size_t scenes = 0, persons = 0;
  Tensor local;   // [B*N, d] summary token per person
  Tensor memory;  // stacked per-scene global memory rows
  std::vector<std::pair<std::size_t, std::size_t>> memory_rows;  // (begin, count) per scene
};

EncodedScene encode(const PredictorParams& p, const SceneBatch& batch);

// codes: [B*M*N, code_dim] in slot order. Returns residuals [B*M*N, T_p*V*3].
Tensor decode(const PredictorParams& p, const EncodedScene& enc, const Tensor& codes, std::size_t M,
              std::size_t future_len);
// Single scene, one code per person.
Tensor decode(const PredictorParams& p, const EncodedScene& enc, const Tensor& codes, std::size_t future_len);

// Cumulative sum of residuals from each slot's last history pose.
Tensor integrate_slots(const Tensor& residuals, const SceneBatch& batch, std::size_t M, std::size_t future_len);

// Converts a [B*M*N, T*V*3] tensor into tracks indexed [b][m][n].
std::vector<std::vector<std::vector<Track>>> slots_to_tracks(const Tensor& abs, std::size_t scenes, std::size_t M,
                                                             std::size_t N, std::size_t frames, double fps);

// One scene: encode, decode M code sets, integrate.
PredictionSet forward(const std::vector<Track>& histories, const IntentBatch& intents, const Codebook& codebook,
                      const PredictorParams& p, std::size_t future_len);

}  // namespace dummf
