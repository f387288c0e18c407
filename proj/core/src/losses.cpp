#include "dummf/losses.hpp"

#include <limits>

#include "dummf/error.hpp"
#include "json.hpp"

namespace dummf {

void LossConfig::validate() const {
  if (!(alpha > 0) || !(beta > 0)) throw ConfigError("loss.alpha and loss.beta must be positive");
  if (!(eps_pseudo >= 0)) throw ConfigError("loss.eps_pseudo must be non-negative");
  const auto& w = weights;
  for (double x : {w.local_recon, w.limb, w.multimodal, w.diversity, w.local_gan, w.global_recon, w.global_gan})
    if (!(x >= 0)) throw ConfigError("loss weights must be non-negative");
}

std::string LossConfig::to_json() const {
  nlohmann::ordered_json j;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["eps_pseudo"] = eps_pseudo;
  j["max_pseudo"] = max_pseudo;
  j["weights"] = {{"lR", weights.local_recon},  {"L", weights.limb},         {"mmR", weights.multimodal},
                  {"D", weights.diversity},     {"lGAN", weights.local_gan}, {"gR", weights.global_recon},
                  {"gGAN", weights.global_gan}};
  return j.dump();
}

LossConfig LossConfig::from_json(std::string_view text) {
  LossConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    if (j.contains("eps_pseudo") && j["eps_pseudo"].is_string() && j["eps_pseudo"] == "inf")
      c.eps_pseudo = std::numeric_limits<double>::infinity();
    else
      c.eps_pseudo = j.value("eps_pseudo", c.eps_pseudo);
    c.max_pseudo = j.value("max_pseudo", c.max_pseudo);
    if (j.contains("weights")) {
      const auto& w = j["weights"];
      static const std::map<std::string, double LossWeights::*> keys = {
          {"lR", &LossWeights::local_recon}, {"L", &LossWeights::limb},           {"mmR", &LossWeights::multimodal},
          {"D", &LossWeights::diversity},    {"lGAN", &LossWeights::local_gan},   {"gR", &LossWeights::global_recon},
          {"gGAN", &LossWeights::global_gan}};
      for (auto it = w.begin(); it != w.end(); ++it) {
        auto k = keys.find(it.key());
        if (k == keys.end()) throw ConfigError("unknown loss weight '" + it.key() + "'");
        c.weights.*(k->second) = it.value().get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("loss config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

Tensor row_sq(const Tensor& a, const Tensor& b) { return sum_axis(squared_error(a, b), 1); }

void check_pred(const char* op, const Tensor& pred, const SlotLayout& L) {
  if (pred.rank() != 2 || pred.dim(0) != L.slots())
    throw ShapeError(std::string(op) + ": expected " + std::to_string(L.slots()) + " prediction rows, got " +
                     shape_str(pred.shape()));
}

void check_target(const char* op, const Tensor& pred, const Tensor& target, const SlotLayout& L) {
  check_pred(op, pred, L);
  if (target.rank() != 2 || target.dim(0) != L.scenes * L.persons || target.dim(1) != pred.dim(1))
    throw ShapeError(std::string(op) + ": target " + shape_str(target.shape()) + " does not match predictions " +
                     shape_str(pred.shape()));
}

// Squared distance of every slot to its own person's target, [S].
Tensor slot_errors(const Tensor& pred, const Tensor& target, const SlotLayout& L) {
  std::vector<std::size_t> owner(L.slots());
  for (std::size_t s = 0; s < owner.size(); ++s) owner[s] = L.owner(s);
  return row_sq(pred, index_rows(target, owner));
}

}  // namespace

Tensor loss_local_recon(const Tensor& pred, const Tensor& target, const SlotLayout& L) {
  check_target("loss_local_recon", pred, target, L);
  const Tensor d = reshape(slot_errors(pred, target, L), {L.slots(), 1});
  std::vector<std::size_t> order;
  order.reserve(L.slots());
  for (std::size_t b = 0; b < L.scenes; ++b)
    for (std::size_t n = 0; n < L.persons; ++n)
      for (std::size_t m = 0; m < L.M; ++m) order.push_back(L.slot(b, m, n));
  const Tensor per_person = reshape(index_rows(d, order), {L.scenes * L.persons, L.M});
  return mean(min_index_select(per_person).values);
}

Tensor loss_global_recon(const Tensor& pred, const Tensor& target, const SlotLayout& L) {
  check_target("loss_global_recon", pred, target, L);
  const Tensor d = reshape(slot_errors(pred, target, L), {L.scenes * L.M, L.persons});
  const Tensor per_candidate = scale(sum_axis(d, 1), 1.0 / static_cast<double>(L.persons));
  return mean(min_index_select(reshape(per_candidate, {L.scenes, L.M})).values);
}

Tensor loss_multimodal_recon(const Tensor& pred, const PseudoTargets& pseudo, const SlotLayout& L) {
  check_pred("loss_multimodal_recon", pred, L);
  const std::size_t R = pseudo.owner.size();
  if (R == 0) return Tensor::scalar(0.0);
  if (pseudo.residuals.rank() != 2 || pseudo.residuals.dim(0) != R || pseudo.residuals.dim(1) != pred.dim(1))
    throw ShapeError("loss_multimodal_recon: pseudo targets " + shape_str(pseudo.residuals.shape()) +
                     " do not match predictions " + shape_str(pred.shape()));
  std::vector<std::size_t> count(L.scenes * L.persons, 0);
  for (auto o : pseudo.owner) {
    if (o >= count.size()) throw ShapeError("loss_multimodal_recon: pseudo owner out of range");
    ++count[o];
  }
  std::vector<std::size_t> rows;
  rows.reserve(R * L.M);
  std::vector<double> w(R);
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t o = pseudo.owner[r];
    const std::size_t b = o / L.persons, n = o % L.persons;
    for (std::size_t m = 0; m < L.M; ++m) rows.push_back(L.slot(b, m, n));
    w[r] = 1.0 / (static_cast<double>(L.scenes * L.persons) * static_cast<double>(count[o]));
  }
  const Tensor d = row_sq(index_rows(pred, rows), repeat_rows(pseudo.residuals, L.M));
  const Tensor best = min_index_select(reshape(d, {R, L.M})).values;
  return sum(mul(best, Tensor::from({R}, std::move(w))));
}

Tensor loss_limb(const Tensor& abs, const std::vector<std::vector<double>>& target_lengths, const SlotLayout& L,
                 std::size_t frames, const SkeletonSpec& skel) {
  check_pred("loss_limb", abs, L);
  const std::size_t V = skel.joint_count(), E = skel.edges().size(), S = L.slots();
  if (abs.dim(1) != frames * V * 3) throw ShapeError("loss_limb: row width does not match frames x joints");
  if (target_lengths.size() != L.scenes * L.persons) throw ShapeError("loss_limb: one target length set per person");
  std::vector<std::size_t> ia, ib;
  std::vector<double> tgt;
  ia.reserve(S * frames * E);
  ib.reserve(S * frames * E);
  tgt.reserve(S * frames * E);
  for (std::size_t s = 0; s < S; ++s) {
    const auto& lens = target_lengths[L.owner(s)];
    if (lens.size() != E) throw ShapeError("loss_limb: target length count differs from edge count");
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t e = 0; e < E; ++e) {
        ia.push_back((s * frames + t) * V + skel.edges()[e].a);
        ib.push_back((s * frames + t) * V + skel.edges()[e].b);
        tgt.push_back(lens[e]);
      }
  }
  const Tensor pts = reshape(abs, {S * frames * V, 3});
  const Tensor len = sqrt(sum_axis(square(sub(index_rows(pts, ia), index_rows(pts, ib))), 1));
  const auto n = tgt.size();
  return scale(sum(squared_error(len, Tensor::from({n}, std::move(tgt)))), 1.0 / static_cast<double>(S));
}

Tensor loss_diversity(const Tensor& abs, const SlotLayout& L, std::size_t frames, const SkeletonSpec& skel,
                      double alpha, double beta) {
  check_pred("loss_diversity", abs, L);
  const std::size_t V = skel.joint_count();
  if (abs.dim(1) != frames * V * 3) throw ShapeError("loss_diversity: row width does not match frames x joints");
  if (L.M < 2) return Tensor::scalar(0.0);
  std::vector<std::size_t> ia, ib;
  for (std::size_t b = 0; b < L.scenes; ++b)
    for (std::size_t n = 0; n < L.persons; ++n)
      for (std::size_t m = 0; m < L.M; ++m)
        for (std::size_t k = m + 1; k < L.M; ++k) {
          ia.push_back(L.slot(b, m, n));
          ib.push_back(L.slot(b, k, n));
        }
  const std::size_t P = ia.size();
  const Tensor diff3 = reshape(sub(index_rows(abs, ia), index_rows(abs, ib)), {P * frames * V, 3});
  std::vector<std::size_t> root_rows(P * frames), spread(P * frames * V);
  for (std::size_t r = 0; r < P * frames; ++r) {
    root_rows[r] = r * V + skel.root_index();
    for (std::size_t v = 0; v < V; ++v) spread[r * V + v] = r;
  }
  const Tensor root = index_rows(diff3, root_rows);
  const Tensor local = sub(diff3, index_rows(root, spread));
  const Tensor dg2 = sum_axis(reshape(square(root), {P, frames * 3}), 1);
  const Tensor dl2 = sum_axis(reshape(square(local), {P, frames * V * 3}), 1);
  const Tensor terms = add(exp(scale(dg2, -1.0 / alpha)), exp(scale(dl2, -1.0 / beta)));
  const double norm = static_cast<double>(L.scenes * L.persons * L.M * (L.M - 1));
  return scale(sum(terms), 1.0 / norm);
}

Tensor lsgan_generator(const Tensor& fake_scores) { return mean(square(add_scalar(fake_scores, -1.0))); }

Tensor lsgan_discriminator(const Tensor& fake_scores, const Tensor& real_scores) {
  return add(mean(square(fake_scores)), mean(square(add_scalar(real_scores, -1.0))));
}

GanTerms lsgan_terms(const Tensor& fake_scores, const Tensor& real_scores) {
  return {lsgan_generator(fake_scores), lsgan_discriminator(fake_scores, real_scores)};
}

}  // namespace dummf
