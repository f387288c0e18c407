#include "dummf/forecaster.hpp"

#include <algorithm>

#include "dummf/error.hpp"
#include "dummf/trainer.hpp"
#include "json.hpp"
#include "json_util.hpp"

namespace dummf {

ForecastModel forecast_model(const TrainState& state) {
  ForecastModel m;
  m.predictor = state.generator;
  m.codebook = state.codebook;
  m.future_len = state.config.future_len;
  const auto& hs = state.config.history_lengths;
  m.max_history = *std::max_element(hs.begin(), hs.end());
  return m;
}

ForecastModel load_forecast_model(const std::filesystem::path& checkpoint) {
  if (!std::filesystem::exists(checkpoint)) throw LoadError("checkpoint not found: " + checkpoint.string());
  return forecast_model(load_checkpoint(checkpoint));
}

namespace {

std::vector<Track> recent(const std::vector<Track>& tracks, std::size_t max_history) {
  std::vector<Track> out;
  out.reserve(tracks.size());
  for (const auto& t : tracks) {
    const std::size_t keep = std::min(t.size(), max_history);
    out.push_back(t.slice(t.size() - keep, keep));
  }
  return out;
}

// One batched expansion: every history gets M global-mode candidates drawn
// from its own rng.
std::vector<PredictionSet> expand(const std::vector<std::vector<Track>>& histories, const ForecastModel& model,
                                  std::size_t M, std::vector<Rng>& rngs) {
  NoGradGuard no_grad;
  const std::size_t B = histories.size(), N = histories.front().size(), d = model.codebook.dim();
  std::vector<std::vector<Track>> cropped;
  for (const auto& h : histories) cropped.push_back(recent(h, model.max_history));
  std::vector<double> cont;
  std::vector<std::size_t> idx;
  std::vector<IntentBatch> batches;
  for (std::size_t b = 0; b < B; ++b) {
    batches.push_back(sample_global(model.codebook, M, N, rngs[b]));
    cont.insert(cont.end(), batches.back().continuous.begin(), batches.back().continuous.end());
    const auto f = batches.back().flat_indices();
    idx.insert(idx.end(), f.begin(), f.end());
  }
  const SceneBatch sb = make_scene_batch(cropped);
  const EncodedScene enc = encode(model.predictor, sb);
  const Tensor codes = combine(Tensor::from({B * M * N, d}, std::move(cont)), model.codebook.entries, idx);
  const Tensor res = decode(model.predictor, enc, codes, M, model.future_len);
  const Tensor abs = integrate_slots(res, sb, M, model.future_len);
  auto tracks = slots_to_tracks(abs, B, M, N, model.future_len, sb.fps);
  std::vector<PredictionSet> out;
  for (std::size_t b = 0; b < B; ++b) out.emplace_back(std::move(tracks[b]), batches[b].discrete_indices);
  return out;
}

}  // namespace

PredictionSet forecast_window(const std::vector<Track>& history, const ForecastModel& model, std::size_t M, Rng& rng) {
  if (history.empty()) throw UsageError("forecast needs at least one person");
  if (M == 0) throw UsageError("intent count must be positive");
  std::vector<Rng> rngs{rng};
  auto out = expand({history}, model, M, rngs);
  rng = rngs[0];
  return std::move(out[0]);
}

std::uint64_t path_hash(const std::vector<std::size_t>& path) {
  std::uint64_t h = mix64(0x5eed0fb4a9c4ULL ^ path.size());
  for (auto i : path) h = mix64(h ^ (static_cast<std::uint64_t>(i) + 1));
  return h;
}

RolloutTree forecast_progressive(const std::vector<Track>& history, const ForecastModel& model,
                                 const RolloutOptions& opt, std::vector<std::string> ids) {
  if (opt.steps == 0) throw UsageError("steps must be >= 1");
  if (opt.M == 0) throw UsageError("intent count must be positive");
  if (opt.M > model.codebook.size())
    throw UsageError("requested " + std::to_string(opt.M) + " intents but the codebook has " +
                     std::to_string(model.codebook.size()));
  std::size_t total = 1;
  for (std::size_t k = 0; k < opt.steps; ++k) {
    if (total > opt.max_branches / opt.M) {
      total = opt.max_branches + 1;
      break;
    }
    total *= opt.M;
  }
  if (total > opt.max_branches)
    throw UsageError(std::to_string(opt.M) + "^" + std::to_string(opt.steps) + " branches exceed the cap of " +
                     std::to_string(opt.max_branches));
  if (history.empty()) throw UsageError("forecast needs at least one person");

  RolloutTree tree;
  tree.history_len = history.front().size();
  tree.future_len = model.future_len;
  tree.M = opt.M;
  tree.fps = history.front().fps();
  tree.ids = std::move(ids);
  if (tree.ids.empty())
    for (std::size_t n = 0; n < history.size(); ++n) tree.ids.push_back("p" + std::to_string(n));

  RolloutBranch root;
  root.tracks = history;
  std::vector<RolloutBranch> frontier{root};
  for (std::size_t k = 0; k < opt.steps; ++k) {
    std::vector<std::vector<Track>> hs;
    std::vector<Rng> rngs;
    for (const auto& b : frontier) {
      hs.push_back(b.tracks);
      rngs.push_back(Rng::stream(opt.seed, path_hash(b.intent_path)));
    }
    const auto sets = expand(hs, model, opt.M, rngs);
    std::vector<RolloutBranch> next;
    next.reserve(frontier.size() * opt.M);
    for (std::size_t p = 0; p < frontier.size(); ++p) {
      for (std::size_t m = 0; m < opt.M; ++m) {
        RolloutBranch c;
        c.parent = p;
        c.intent_path = frontier[p].intent_path;
        c.intent_path.push_back(sets[p].source_intents()[m].front());
        for (std::size_t n = 0; n < history.size(); ++n)
          c.tracks.push_back(frontier[p].tracks[n].concat(sets[p].at(m, n)));
        next.push_back(std::move(c));
      }
    }
    tree.steps.push_back(next);
    frontier = std::move(next);
  }
  return tree;
}

std::string predictions_to_json(const RolloutTree& tree, std::uint64_t seed) {
  const std::size_t steps = tree.steps.size();
  std::string out = "{\"fps\":";
  detail::append_number(out, tree.fps);
  out += ",\"history_len\":" + std::to_string(tree.history_len);
  out += ",\"future_len\":" + std::to_string(tree.future_len);
  out += ",\"intents\":" + std::to_string(tree.M);
  out += ",\"steps\":" + std::to_string(steps);
  out += ",\"seed\":" + std::to_string(seed);
  out += ",\"branches\":[";
  const auto& leaves = tree.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (i) out.push_back(',');
    out += "{\"intent_path\":[";
    for (std::size_t k = 0; k < leaves[i].intent_path.size(); ++k) {
      if (k) out.push_back(',');
      out += std::to_string(leaves[i].intent_path[k]);
    }
    out += "],\"persons\":[";
    for (std::size_t n = 0; n < leaves[i].tracks.size(); ++n) {
      if (n) out.push_back(',');
      out += "{\"id\":";
      detail::append_string(out, tree.ids.at(n));
      out += ",\"frames\":";
      detail::append_frames(out, leaves[i].tracks[n].slice(tree.history_len, steps * tree.future_len));
      out.push_back('}');
    }
    out += "]}";
  }
  out += "]}\n";
  return out;
}

PredictionFile predictions_from_json(std::string_view text) {
  using nlohmann::json;
  PredictionFile f;
  try {
    const json j = json::parse(text);
    f.fps = j.at("fps").get<double>();
    f.history_len = j.at("history_len").get<std::size_t>();
    f.future_len = j.at("future_len").get<std::size_t>();
    f.intents = j.at("intents").get<std::size_t>();
    f.steps = j.at("steps").get<std::size_t>();
    f.seed = j.value("seed", std::uint64_t{0});
    if (!(f.fps > 0)) throw ParseError("fps must be positive");
    if (f.future_len == 0 || f.steps == 0) throw ParseError("future_len and steps must be positive");
    const auto& branches = j.at("branches");
    if (!branches.is_array() || branches.empty()) throw ParseError("branches must be a non-empty array");
    for (const auto& b : branches) {
      PredictionBranch pb;
      pb.intent_path = b.at("intent_path").get<std::vector<std::size_t>>();
      if (pb.intent_path.size() != f.steps)
        throw ParseError("intent_path length " + std::to_string(pb.intent_path.size()) + " != steps " +
                         std::to_string(f.steps));
      for (const auto& p : b.at("persons")) {
        pb.persons.push_back(detail::track_from_json(p.at("frames"), f.fps));
        if (pb.persons.back().size() != f.steps * f.future_len)
          throw ParseError("branch frames must cover steps * future_len");
      }
      if (pb.persons.empty()) throw ParseError("branch has no persons");
      if (!f.branches.empty() && pb.persons.size() != f.branches.front().persons.size())
        throw ParseError("branches disagree on person count");
      f.branches.push_back(std::move(pb));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("predictions JSON: ") + e.what());
  }
  return f;
}

PredictionFile to_prediction_file(const RolloutTree& tree, std::uint64_t seed) {
  PredictionFile f;
  f.fps = tree.fps;
  f.history_len = tree.history_len;
  f.future_len = tree.future_len;
  f.intents = tree.M;
  f.steps = tree.steps.size();
  f.seed = seed;
  for (const auto& leaf : tree.leaves()) {
    PredictionBranch b;
    b.intent_path = leaf.intent_path;
    for (const auto& t : leaf.tracks) b.persons.push_back(t.slice(tree.history_len, f.steps * tree.future_len));
    f.branches.push_back(std::move(b));
  }
  return f;
}

PredictionFile prediction_file_from_scene(const Scene& scene) {
  if (scene.future_len() == 0) throw UsageError("scene has no future frames to use as a prediction");
  PredictionFile f;
  f.fps = scene.fps();
  f.history_len = scene.history_len();
  f.future_len = scene.future_len();
  f.intents = 1;
  f.steps = 1;
  f.branches.push_back(PredictionBranch{{0}, scene.futures()});
  return f;
}

}  // namespace dummf
