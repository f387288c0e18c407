// Acceptance suite. Prints one PASS/FAIL line per criterion; exit status is
// non-zero if any selected criterion fails.
//
//   dummf_acceptance            all criteria
//   dummf_acceptance 2 7        only criteria 2 and 7

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dummf/asf.hpp"
#include "dummf/error.hpp"
#include "dummf/forecaster.hpp"
#include "dummf/gradcheck_suite.hpp"
#include "dummf/intents.hpp"
#include "dummf/losses.hpp"
#include "dummf/metrics.hpp"
#include "dummf/predictor.hpp"
#include "dummf/scene_io.hpp"
#include "dummf/synth.hpp"
#include "dummf/trainer.hpp"
#include "metric_oracle.hpp"

namespace fs = std::filesystem;
using namespace dummf;

namespace {

// ---- pinned tolerances and budgets -----------------------------------------

constexpr double kGradRelTol = 1e-5;
constexpr double kGradBudgetS = 120;
constexpr double kMetricTol = 1e-12;
constexpr double kMetricBudgetS = 60;
constexpr double kPermutationTol = 1e-9;
constexpr double kLimbZeroTol = 1e-24;
constexpr double kLossRatioMax = 0.5;
constexpr double kBestOfGainMin = 0.10;
constexpr double kFpdMin = 0.01;
constexpr double kDriftFactor = 2.0;
constexpr double kSmokeBudgetS = 15 * 60;
constexpr double kFkTol = 1e-9;
constexpr int kTrials = 100;
constexpr int kMetricInstances = 200;
constexpr int kLossInstances = 1000;
constexpr std::size_t kTestScenes = 96;

// ---- helpers ---------------------------------------------------------------

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok && pass_) {
      pass_ = false;
      first_failure_ = what;
    }
  }
  bool pass() const { return pass_; }
  const std::string& failure() const { return first_failure_; }

 private:
  bool pass_ = true;
  std::string first_failure_;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path data_path(const std::string& name) { return fs::path(DUMMF_DATA_DIR) / name; }

Tensor random_tensor(Rng& rng, Shape shape, bool grad) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-1, 1);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

Track random_track(Rng& rng, std::size_t T, double s = 1.0) {
  std::vector<Pose> f;
  for (std::size_t t = 0; t < T; ++t) {
    Joints j(15, 3);
    for (Eigen::Index i = 0; i < j.size(); ++i) j.data()[i] = rng.uniform(-s, s);
    f.emplace_back(j);
  }
  return Track(std::move(f), 15.0);
}

double track_diff(const Track& a, const Track& b) {
  double d = 0;
  for (std::size_t t = 0; t < a.size(); ++t) d = std::max(d, (a[t].joints() - b[t].joints()).cwiseAbs().maxCoeff());
  return d;
}

std::vector<Track> synthetic_histories(std::uint64_t seed, std::size_t N, std::size_t T) {
  SyntheticSpec s;
  s.scene_count = 1;
  s.branches = 1;
  s.persons = N;
  s.history_len = T;
  s.future_len = 1;
  s.jitter_std = 0.01;
  return synthetic_dataset(s, seed).front().histories();
}

PredictorConfig small_predictor(GlobalVariant g) {
  PredictorConfig c;
  c.layers = 2;
  c.d_model = 16;
  c.code_dim = 16;
  c.heads = 2;
  c.ff_dim = 24;
  c.global_variant = g;
  return c;
}

// ---- 1: gradient integrity -------------------------------------------------

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  std::size_t cases = 0, checked = 0, skipped = 0;
  double worst = 0;
  std::set<std::string> groups;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const auto& k : run_gradcheck_suite(seed)) {
      ++cases;
      groups.insert(k.group);
      checked += k.result.checked;
      skipped += k.result.skipped;
      worst = std::max(worst, k.result.max_rel_error);
      c.require(k.result.checked > 0, k.name + " checked no coordinates");
      c.require(k.result.max_rel_error < kGradRelTol,
                k.name + " seed " + std::to_string(seed) + " rel " + fmt("%.3e", k.result.max_rel_error));
    }
  }
  for (const char* g : {"op", "loss", "model"}) c.require(groups.count(g) == 1, std::string("no ") + g + " checks");
  const double s = seconds_since(t0);
  c.require(s < kGradBudgetS, "runtime " + fmt("%.1f s", s));
  return {c.pass(), c.pass() ? std::to_string(cases) + " cases over 3 seeds, max rel " + fmt("%.2e", worst) + ", " +
                                   std::to_string(checked) + " coords checked, " + std::to_string(skipped) +
                                   " kink-adjacent skipped, " + fmt("%.1f s", s)
                             : c.failure()};
}

// ---- 2: metric oracles -----------------------------------------------------

using Raw3 = std::vector<std::vector<std::vector<double>>>;
Raw3 raw(const Track& t) {
  Raw3 out;
  for (const auto& p : t.frames()) {
    std::vector<std::vector<double>> f;
    for (std::size_t v = 0; v < p.joint_count(); ++v) f.push_back({p.joint(v).x(), p.joint(v).y(), p.joint(v).z()});
    out.push_back(f);
  }
  return out;
}

Outcome criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& skel = SkeletonSpec::canonical();
  const std::size_t r = skel.root_index();
  Check c;
  double worst = 0;
  auto near = [&](double a, double b, const std::string& what) {
    worst = std::max(worst, std::abs(a - b));
    c.require(std::abs(a - b) <= kMetricTol, what + " " + fmt("%.3e", std::abs(a - b)));
  };
  for (int i = 0; i < kMetricInstances; ++i) {
    Rng rng(static_cast<std::uint64_t>(i) + 5000);
    const std::size_t M = 1 + rng.below(4), N = 1 + rng.below(3), T = 1 + rng.below(5);
    // a compact scale so that collisions and foot contacts actually occur
    const double s = rng.uniform(0.2, 1.0);
    std::vector<Track> gt;
    Candidates pred(M);
    for (std::size_t n = 0; n < N; ++n) gt.push_back(random_track(rng, T, s));
    for (auto& row : pred)
      for (std::size_t n = 0; n < N; ++n) row.push_back(random_track(rng, T, s));
    oracle::Coords P;
    oracle::Truth G;
    for (const auto& t : gt) G.push_back(raw(t));
    for (const auto& row : pred) {
      P.emplace_back();
      for (const auto& t : row) P.back().push_back(raw(t));
    }
    const auto a = ade_fde(pred, gt);
    const auto oa = oracle::ade_fde(P, G);
    near(a.average, oa.average, "ADE");
    near(a.final, oa.final, "FDE");
    const auto l = lade_lfde(pred, gt);
    const auto ol = oracle::lade_lfde(P, G);
    near(l.average, ol.average, "lADE");
    near(l.final, ol.final, "lFDE");
    near(fpd(pred), oracle::fpd(P), "FPD");
    const auto v = aligned_variants(pred, gt, skel);
    const auto ro = oracle::ade_fde(oracle::root_part(P, r), oracle::truth_part(G, r, true));
    const auto po = oracle::ade_fde(oracle::pose_part(P, r), oracle::truth_part(G, r, false));
    near(v.root_ade, ro.average, "rootADE");
    near(v.root_fde, ro.final, "rootFDE");
    near(v.pose_ade, po.average, "poseADE");
    near(v.pose_fde, po.final, "poseFDE");
    near(v.root_fpd, oracle::fpd(oracle::root_part(P, r)), "rootFPD");
    near(v.pose_fpd, oracle::fpd(oracle::pose_part(P, r)), "poseFPD");
    const double cd = rng.uniform(0.1, 1.5);
    near(tcr(pred, skel, cd), oracle::tcr(P, r, cd), "TCR");
    near(ahd(pred), oracle::ahd(P), "AHD");
    const double ground = rng.uniform(-s, 0), dist = rng.uniform(0.1, 1.0), speed = rng.uniform(0.5, 10);
    const auto& feet = skel.foot_indices();
    for (std::size_t n = 0; n < N; ++n)
      near(fsr(pred[0][n], skel, ground, dist, speed), oracle::fsr(P[0][n], 15.0, feet[0], feet[1], ground, dist, speed),
           "FSR");
  }
  const double s = seconds_since(t0);
  c.require(s < kMetricBudgetS, "runtime " + fmt("%.1f s", s));
  return {c.pass(), c.pass() ? std::to_string(kMetricInstances) + " instances, 14 metrics, max |diff| " +
                                   fmt("%.1e", worst) + ", " + fmt("%.2f s", s)
                             : c.failure()};
}

// ---- 3: mode semantics -----------------------------------------------------

Outcome criterion3() {
  Check c;
  // (a) global mode shares the discrete code
  for (int t = 0; t < kTrials; ++t) {
    Rng rng(static_cast<std::uint64_t>(t) + 100);
    const std::size_t K = 2 + rng.below(8), M = 1 + rng.below(K), N = 1 + rng.below(5);
    const Codebook cb = Codebook::init(K, 8, rng);
    const auto ib = sample_global(cb, M, N, rng);
    std::set<std::size_t> rows;
    for (const auto& m : ib.discrete_indices) {
      for (std::size_t n = 1; n < N; ++n) c.require(m[n] == m[0], "(a) global code differs across persons");
      rows.insert(m[0]);
    }
    c.require(rows.size() == M, "(a) global candidates reuse a code");
  }
  // (b) code locality, exact
  for (int t = 0; t < kTrials; ++t) {
    Rng rng(static_cast<std::uint64_t>(t) + 200);
    const auto p = init_predictor(small_predictor(t % 2 ? GlobalVariant::maxpool : GlobalVariant::attention), rng);
    const std::size_t N = 2 + rng.below(3);
    const auto enc = encode(p, make_scene_batch({synthetic_histories(300 + t, N, 3 + rng.below(6))}));
    const Tensor z = random_tensor(rng, {N, 16}, false);
    const Tensor base = decode(p, enc, z, 4);
    const std::size_t k = rng.below(N), F = base.dim(1);
    std::vector<double> zp(z.data().begin(), z.data().end());
    for (std::size_t d = 0; d < 16; ++d) zp[k * 16 + d] += rng.normal();
    const Tensor out = decode(p, enc, Tensor::from(z.shape(), zp), 4);
    for (std::size_t n = 0; n < N; ++n) {
      bool same = true;
      for (std::size_t f = 0; f < F; ++f) same = same && out.at(n * F + f) == base.at(n * F + f);
      if (n == k) c.require(!same, "(b) perturbed person unchanged");
      else c.require(same, "(b) person " + std::to_string(n) + " changed by code " + std::to_string(k));
    }
  }
  // (c) person-permutation equivariance
  double worst = 0;
  for (int t = 0; t < kTrials; ++t) {
    Rng rng(static_cast<std::uint64_t>(t) + 400);
    const auto p = init_predictor(small_predictor(t % 2 ? GlobalVariant::maxpool : GlobalVariant::attention), rng);
    const std::size_t N = 2 + rng.below(3), M = 1 + rng.below(3);
    const Codebook cb = Codebook::init(M + 1, 16, rng);
    const auto h = synthetic_histories(500 + t, N, 3 + rng.below(6));
    std::vector<std::size_t> perm(N);
    for (std::size_t i = 0; i < N; ++i) perm[i] = i;
    for (std::size_t i = N - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<Track> hp;
    for (auto i : perm) hp.push_back(h[i]);
    const auto intents = t % 3 ? sample_local(cb, M, N, rng) : sample_global(cb, M, N, rng);
    IntentBatch ip = intents;
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t n = 0; n < N; ++n) {
        ip.discrete_indices[m][n] = intents.discrete_indices[m][perm[n]];
        for (std::size_t d = 0; d < 16; ++d)
          ip.continuous[(m * N + n) * 16 + d] = intents.continuous[(m * N + perm[n]) * 16 + d];
      }
    const auto a = forward(h, intents, cb, p, 4);
    const auto b = forward(hp, ip, cb, p, 4);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t n = 0; n < N; ++n) worst = std::max(worst, track_diff(a.at(m, perm[n]), b.at(m, n)));
  }
  c.require(worst <= kPermutationTol, "(c) permutation error " + fmt("%.3e", worst));
  // (d) winner-takes-all gradients
  for (int t = 0; t < kTrials; ++t) {
    Rng rng(static_cast<std::uint64_t>(t) + 600);
    const SlotLayout L{1 + rng.below(3), 2 + rng.below(3), 1 + rng.below(3)};
    const std::size_t F = 3 + rng.below(6), O = L.scenes * L.persons;
    const Tensor target = random_tensor(rng, {O, F}, false);
    auto row_dist = [&](const Tensor& pred, std::size_t slot, const Tensor& tg, std::size_t row) {
      double s = 0;
      for (std::size_t f = 0; f < F; ++f) s += std::pow(pred.at(slot * F + f) - tg.at(row * F + f), 2);
      return s;
    };
    auto grad_rows = [&](const Tensor& pred) {
      std::vector<bool> nz(L.slots(), false);
      const auto g = pred.grad();
      for (std::size_t s = 0; s < L.slots(); ++s)
        for (std::size_t f = 0; f < F; ++f) nz[s] = nz[s] || g[s * F + f] != 0;
      return nz;
    };
    {
      const Tensor pred = random_tensor(rng, {L.slots(), F}, true);
      backward(loss_local_recon(pred, target, L));
      const auto nz = grad_rows(pred);
      for (std::size_t b = 0; b < L.scenes; ++b)
        for (std::size_t n = 0; n < L.persons; ++n) {
          std::size_t win = 0;
          for (std::size_t m = 1; m < L.M; ++m)
            if (row_dist(pred, L.slot(b, m, n), target, b * L.persons + n) <
                row_dist(pred, L.slot(b, win, n), target, b * L.persons + n))
              win = m;
          for (std::size_t m = 0; m < L.M; ++m)
            if (m != win) c.require(!nz[L.slot(b, m, n)], "(d) local loser has gradient");
        }
    }
    {
      const Tensor pred = random_tensor(rng, {L.slots(), F}, true);
      backward(loss_global_recon(pred, target, L));
      const auto nz = grad_rows(pred);
      for (std::size_t b = 0; b < L.scenes; ++b) {
        std::size_t win = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < L.M; ++m) {
          double s = 0;
          for (std::size_t n = 0; n < L.persons; ++n) s += row_dist(pred, L.slot(b, m, n), target, b * L.persons + n);
          if (s < best) best = s, win = m;
        }
        for (std::size_t m = 0; m < L.M; ++m)
          for (std::size_t n = 0; n < L.persons; ++n)
            if (m != win) c.require(!nz[L.slot(b, m, n)], "(d) global loser has gradient");
      }
    }
    {
      std::vector<std::size_t> owner;
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t k = 0, P = 1 + rng.below(3); k < P; ++k) owner.push_back(o);
      const PseudoTargets pseudo{random_tensor(rng, {owner.size(), F}, false), owner};
      const Tensor pred = random_tensor(rng, {L.slots(), F}, true);
      backward(loss_multimodal_recon(pred, pseudo, L));
      const auto nz = grad_rows(pred);
      std::set<std::size_t> winners;
      for (std::size_t r = 0; r < owner.size(); ++r) {
        const std::size_t b = owner[r] / L.persons, n = owner[r] % L.persons;
        std::size_t win = 0;
        for (std::size_t m = 1; m < L.M; ++m)
          if (row_dist(pred, L.slot(b, m, n), pseudo.residuals, r) < row_dist(pred, L.slot(b, win, n), pseudo.residuals, r))
            win = m;
        winners.insert(L.slot(b, win, n));
      }
      for (std::size_t s = 0; s < L.slots(); ++s)
        if (!winners.count(s)) c.require(!nz[s], "(d) multimodal loser has gradient");
    }
  }
  return {c.pass(), c.pass() ? "(a)-(d) over " + std::to_string(kTrials) + " trials each, permutation error " +
                                   fmt("%.1e", worst)
                             : c.failure()};
}

// ---- 4: loss structure -----------------------------------------------------

Tensor tracks_tensor(const std::vector<Track>& tracks) {
  std::vector<double> v;
  for (const auto& t : tracks)
    for (const auto& p : t.frames()) v.insert(v.end(), p.flat().begin(), p.flat().end());
  return Tensor::from({tracks.size(), tracks.front().size() * 45}, std::move(v), true);
}

Outcome criterion4() {
  const auto& skel = SkeletonSpec::canonical();
  Check c;
  std::size_t strict = 0;
  for (int i = 0; i < kLossInstances; ++i) {
    Rng rng(static_cast<std::uint64_t>(i) + 7000);
    const SlotLayout L{1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(3)};
    const std::size_t F = 1 + rng.below(8);
    const Tensor pred = random_tensor(rng, {L.slots(), F}, false);
    const Tensor target = random_tensor(rng, {L.scenes * L.persons, F}, false);
    const double l = loss_local_recon(pred, target, L).item(), g = loss_global_recon(pred, target, L).item();
    c.require(g >= l * (1 - 1e-14), "L_gR < L_lR on instance " + std::to_string(i));
    if (g > l * (1 + 1e-9)) ++strict;
  }
  c.require(strict > 0, "no strict L_gR > L_lR instance");

  // diversity: every step increases pairwise distances
  for (int t = 0; t < kTrials; ++t) {
    Rng rng(static_cast<std::uint64_t>(t) + 8000);
    const std::size_t M = 2 + rng.below(3), T = 1 + rng.below(3);
    const SlotLayout L{1, M, 1};
    std::vector<Track> cands;
    for (std::size_t m = 0; m < M; ++m) cands.push_back(random_track(rng, T, 0.3));
    const double alpha = rng.uniform(0.5, 5), beta = rng.uniform(0.5, 10);
    const int mode = t % 3;  // 0: spread everything, 1: roots only, 2: poses only
    auto spread = [&](double s) {
      std::vector<Track> out;
      for (std::size_t m = 0; m < M; ++m) {
        std::vector<Pose> f;
        for (std::size_t k = 0; k < T; ++k) {
          Joints mean = Joints::Zero(15, 3);
          for (std::size_t q = 0; q < M; ++q) mean += cands[q][k].joints();
          mean /= static_cast<double>(M);
          const Joints dev = cands[m][k].joints() - mean;
          Joints j;
          if (mode == 0) {
            j = mean + s * dev;
          } else {
            const Eigen::RowVector3d root = dev.row(0);
            const Joints local = dev.rowwise() - root;
            j = mode == 1 ? Joints((mean + local).rowwise() + s * root) : Joints((mean + s * local).rowwise() + root);
          }
          f.emplace_back(j);
        }
        out.emplace_back(f, 15.0);
      }
      return loss_diversity(tracks_tensor(out), L, T, skel, alpha, beta).item();
    };
    double prev = spread(1.0);
    for (double s : {1.2, 1.5, 2.0, 3.0}) {
      const double v = spread(s);
      c.require(v < prev, "diversity did not decrease (trial " + std::to_string(t) + ")");
      prev = v;
    }
  }

  // limb loss: zero when lengths match, positive when any one differs
  for (int t = 0; t < kTrials; ++t) {
    Rng rng(static_cast<std::uint64_t>(t) + 9000);
    const std::size_t M = 1 + rng.below(3), T = 1 + rng.below(3);
    std::vector<Track> tr;
    for (std::size_t m = 0; m < M; ++m) tr.push_back(random_track(rng, 1));
    // every frame of a candidate is a rigid motion of its first pose
    std::vector<Track> moving;
    for (const auto& c0 : tr) {
      std::vector<Pose> f;
      for (std::size_t k = 0; k < T; ++k) {
        const double a = rng.uniform(-3, 3);
        Eigen::Matrix3d R = Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix();
        Joints j = (c0[0].joints() * R.transpose()).rowwise() + Eigen::RowVector3d(rng.normal(), 0, rng.normal());
        f.emplace_back(j);
      }
      moving.emplace_back(f, 15.0);
    }
    // one person; every candidate shares the first candidate's limb lengths
    std::vector<Track> same(M, moving[0]);
    const auto target = limb_lengths(moving[0][0], skel);
    const SlotLayout L{1, M, 1};
    const double zero = loss_limb(tracks_tensor(same), {target}, L, T, skel).item();
    c.require(zero <= kLimbZeroTol, "limb loss " + fmt("%.3e", zero) + " with matching lengths");
    auto off = target;
    off[rng.below(off.size())] += 1e-3;
    c.require(loss_limb(tracks_tensor(same), {off}, L, T, skel).item() > 0, "limb loss zero with a wrong length");
  }
  return {c.pass(), c.pass() ? std::to_string(kLossInstances) + " recon instances (" + std::to_string(strict) +
                                   " strict), diversity and limb checks over " + std::to_string(kTrials) + " trials"
                             : c.failure()};
}

// ---- 5 and 6: training smoke and ablation ----------------------------------

struct SmokeResult {
  double lr_first = 0, lr_final = 0, bo5 = 0, bo1 = 0, fpd = 0, drift = 0, jitter = 0, seconds = 0;
};

SmokeResult smoke(std::uint64_t seed, TrainVariant variant) {
  const auto t0 = std::chrono::steady_clock::now();
  const SyntheticSpec spec = SyntheticSpec::from_json(read_text_file(data_path("synthetic.json")));
  TrainConfig cfg = TrainConfig::from_json(read_text_file(data_path("train_smoke.json")));
  cfg.rng_seed = seed;
  cfg.variant = variant;
  TrainState st = init_train_state(cfg);
  const TrainingData data = prepare_training_data(synthetic_dataset(spec, 1), cfg);
  const TrainReport rep = train(st, data);

  SyntheticSpec ts = spec;
  ts.scene_count = kTestScenes;
  const auto test = synthetic_dataset(ts, 1000);
  ts.jitter_std = 0;
  const auto clean = synthetic_dataset(ts, 1000);
  const ForecastModel model = forecast_model(st);
  const auto& skel = SkeletonSpec::canonical();
  SmokeResult r;
  r.lr_first = rep.steps.front().L_lR;
  r.lr_final = rep.epochs.back().L_lR;
  double drift = 0, jitter = 0;
  std::size_t nd = 0, nj = 0;
  for (std::size_t s = 0; s < test.size(); ++s) {
    Rng rng = Rng::stream(77, s);
    const auto ps = forecast_window(test[s].histories(), model, cfg.M, rng);
    const Candidates all = ps.predictions();
    const auto gt = test[s].futures();
    r.bo5 += ade_fde(all, gt).average;
    r.bo1 += ade_fde(Candidates{all[0]}, gt).average;
    r.fpd += fpd(all);
    for (std::size_t n = 0; n < gt.size(); ++n) {
      const auto ref = limb_lengths(clean[s].persons()[n][0], skel);
      for (const auto& row : all)
        for (const auto& p : row[n].frames()) {
          const auto l = limb_lengths(p, skel);
          for (std::size_t e = 0; e < l.size(); ++e, ++nd) drift += std::abs(l[e] - ref[e]);
        }
      for (const auto& p : gt[n].frames()) {
        const auto l = limb_lengths(p, skel);
        for (std::size_t e = 0; e < l.size(); ++e, ++nj) jitter += std::abs(l[e] - ref[e]);
      }
    }
  }
  const double S = static_cast<double>(test.size());
  r.bo5 /= S;
  r.bo1 /= S;
  r.fpd /= S;
  r.drift = drift / static_cast<double>(nd);
  r.jitter = jitter / static_cast<double>(nj);
  r.seconds = seconds_since(t0);
  return r;
}

Outcome criterion5() {
  const SmokeResult r = smoke(1, TrainVariant::dual);
  Check c;
  const double ratio = r.lr_final / r.lr_first, gain = 1 - r.bo5 / r.bo1;
  c.require(ratio <= kLossRatioMax, "(a) L_lR ratio " + fmt("%.3f", ratio));
  c.require(gain >= kBestOfGainMin, "(b) best-of-5 gain " + fmt("%.3f", gain));
  c.require(r.fpd > kFpdMin, "(c) FPD " + fmt("%.4f", r.fpd));
  c.require(r.drift <= kDriftFactor * r.jitter, "(d) limb drift " + fmt("%.4f", r.drift) + " vs jitter " +
                                                    fmt("%.4f", r.jitter));
  c.require(r.seconds < kSmokeBudgetS, "runtime " + fmt("%.0f s", r.seconds));
  std::ostringstream d;
  d << "L_lR ratio " << fmt("%.3f", ratio) << ", ADE best-of-5 " << fmt("%.3f", r.bo5) << " vs best-of-1 "
    << fmt("%.3f", r.bo1) << " (" << fmt("%.1f", 100 * gain) << "% lower), FPD " << fmt("%.3f", r.fpd)
    << " m, limb drift " << fmt("%.4f", r.drift) << " vs jitter " << fmt("%.4f", r.jitter) << ", "
    << fmt("%.0f s", r.seconds);
  return {c.pass(), c.pass() ? d.str() : c.failure() + "; " + d.str()};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome criterion6() {
  std::vector<double> fd, fn, ad, an;
  std::ostringstream per;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto d = smoke(seed, TrainVariant::dual);
    const auto n = smoke(seed, TrainVariant::no_separation);
    fd.push_back(d.fpd);
    fn.push_back(n.fpd);
    ad.push_back(d.bo5);
    an.push_back(n.bo5);
    per << " seed " << seed << ": FPD " << fmt("%.3f", d.fpd) << "/" << fmt("%.3f", n.fpd) << " ADE "
        << fmt("%.3f", d.bo5) << "/" << fmt("%.3f", n.bo5) << ";";
  }
  const double mfd = median(fd), mfn = median(fn), mad = median(ad), man = median(an);
  Check c;
  c.require(mfd > mfn, "median FPD dual " + fmt("%.3f", mfd) + " not above no-separation " + fmt("%.3f", mfn));
  c.require(mad <= man, "median best-of-5 ADE dual " + fmt("%.3f", mad) + " worse than no-separation " +
                            fmt("%.3f", man));
  std::ostringstream d;
  d << "median FPD dual " << fmt("%.3f", mfd) << " vs " << fmt("%.3f", mfn) << ", median ADE dual "
    << fmt("%.3f", mad) << " vs " << fmt("%.3f", man) << " (dual/no-separation per" << per.str() << ")";
  return {c.pass(), c.pass() ? d.str() : c.failure() + "; " + d.str()};
}

// ---- 7: progressive inference arithmetic -----------------------------------

Outcome criterion7() {
  TrainConfig cfg;
  cfg.M = 5;
  cfg.rng_seed = 4;
  cfg.predictor = small_predictor(GlobalVariant::attention);
  cfg.predictor.layers = 1;
  cfg.discriminator = {1, 16, 2, 24};
  const ForecastModel model = forecast_model(init_train_state(cfg));
  const auto h = synthetic_histories(31, 2, 15);
  Check c;
  std::size_t total = 0;
  for (std::size_t M : {2, 3, 5})
    for (std::size_t steps : {1, 2, 3}) {
      RolloutOptions opt;
      opt.M = M;
      opt.steps = steps;
      opt.seed = 100 + M * 10 + steps;
      const auto tree = forecast_progressive(h, model, opt);
      const std::string tag = "M=" + std::to_string(M) + " steps=" + std::to_string(steps);
      c.require(tree.steps.size() == steps, tag + ": step count");
      c.require(tree.fps == 15.0 && tree.future_len == 15, tag + ": not 15-frame windows at 15 Hz");
      std::size_t expect = 1;
      for (std::size_t k = 1; k <= tree.steps.size(); ++k) {
        expect *= M;
        const auto& level = tree.steps[k - 1];
        c.require(level.size() == expect, tag + ": " + std::to_string(level.size()) + " branches at step " +
                                              std::to_string(k));
        std::set<std::vector<std::size_t>> paths;
        for (std::size_t i = 0; i < level.size(); ++i) {
          const auto& b = level[i];
          paths.insert(b.intent_path);
          c.require(b.intent_path.size() == k, tag + ": path length");
          for (const auto& t : b.tracks) c.require(t.size() == 15 + 15 * k, tag + ": frame count");
          if (k > 1) {
            const auto& parent = tree.steps[k - 2][b.parent];
            c.require(std::equal(parent.intent_path.begin(), parent.intent_path.end(), b.intent_path.begin()),
                      tag + ": path prefix");
            for (std::size_t n = 0; n < h.size(); ++n)
              c.require(track_diff(b.tracks[n].slice(0, parent.tracks[n].size()), parent.tracks[n]) == 0,
                        tag + ": frames not shared with parent");
          } else {
            for (std::size_t n = 0; n < h.size(); ++n)
              c.require(track_diff(b.tracks[n].slice(0, 15), h[n]) == 0, tag + ": history not kept");
          }
        }
        c.require(paths.size() == expect, tag + ": duplicate intent paths");
      }
      total += tree.leaves().size();
      const auto file = predictions_from_json(predictions_to_json(tree, opt.seed));
      c.require(file.branches.size() == expect, tag + ": serialised branch count");
    }
  return {c.pass(), c.pass() ? "M in {2,3,5} x steps in {1,2,3}: M^k branches at every step, prefixes shared (" +
                                   std::to_string(total) + " leaves)"
                             : c.failure()};
}

// ---- 8: determinism and persistence ----------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = "SOURCE_DATE_EPOCH=1700000000 '" + std::string(DUMMF_CLI_PATH) + "' " + args + " >> '" +
                          log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = read_text_file(e.path());
  return out;
}

Outcome criterion8() {
  Check c;
  const fs::path base = fs::temp_directory_path() / ("dummf_acceptance_" + std::to_string(::getpid()));
  const fs::path work = base / "run", log = base / "cli.log";
  fs::remove_all(base);
  fs::create_directories(base);
  auto pipeline = [&] {
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string scene = q(work / "scenes" / "scene_00000.json");
    bool ok = run_cli("synth --config " + q(data_path("synthetic_tiny.json")) + " --seed 9 --out " + q(work / "scenes"),
                      log) == 0;
    ok = ok && run_cli("train --data " + q(work / "scenes") + " --config " + q(data_path("train_tiny.json")) +
                           " --epochs 1 --out " + q(work / "model.bin"),
                       log) == 0;
    ok = ok && run_cli("forecast --ckpt " + q(work / "model.bin") + " --scene " + scene +
                           " --intents 3 --steps 2 --seed 5 --out " + q(work / "pred.json"),
                       log) == 0;
    ok = ok && run_cli("eval --pred " + q(work / "pred.json") + " --gt " + scene + " --out " + q(work / "report.json"),
                       log) == 0;
    c.require(ok, "pipeline command failed, see " + log.string());
    return snapshot(work);
  };
  const auto first = pipeline();
  const auto second = pipeline();
  c.require(first.size() >= 10, "pipeline produced only " + std::to_string(first.size()) + " files");
  for (const char* f : {"model.bin", "model.bin.log.jsonl", "pred.json", "report.json", "report.csv"})
    c.require(first.count(f) == 1, std::string("missing artifact ") + f);
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    c.require(it != second.end() && it->second == bytes, "artifact differs between runs: " + name);
  }
  c.require(first.size() == second.size(), "artifact sets differ");

  // library-level persistence
  TrainConfig cfg = TrainConfig::from_json(read_text_file(data_path("train_tiny.json")));
  cfg.epochs = 3;
  const SyntheticSpec spec = SyntheticSpec::from_json(read_text_file(data_path("synthetic_tiny.json")));
  const TrainingData data = prepare_training_data(synthetic_dataset(spec, 9), cfg);
  TrainState straight = init_train_state(cfg);
  train(straight, data);
  TrainState part = init_train_state(cfg);
  TrainOptions opt;
  opt.checkpoint_path = base / "ck.bin";
  opt.stop_after_epoch = 1;
  train(part, data, opt);
  TrainState resumed = load_checkpoint(base / "ck.bin");
  c.require(encode_tensor_table(checkpoint_table(resumed)) == encode_tensor_table(checkpoint_table(part)),
            "load does not restore the saved state");
  train(resumed, data);
  c.require(encode_tensor_table(checkpoint_table(resumed)) == encode_tensor_table(checkpoint_table(straight)),
            "resumed training differs from uninterrupted training");
  save_checkpoint(base / "a.bin", straight);
  save_checkpoint(base / "b.bin", load_checkpoint(base / "a.bin"));
  c.require(read_text_file(base / "a.bin") == read_text_file(base / "b.bin"), "save/load/save not byte-identical");
  const std::size_t files = first.size();
  fs::remove_all(base);
  return {c.pass(), c.pass() ? "synth -> train -> forecast -> eval twice: " + std::to_string(files) +
                                   " artifacts byte-identical; resume after epoch 1 of 3 bit-exact; save/load/save "
                                   "byte-identical"
                             : c.failure()};
}

// ---- 9: parser correctness -------------------------------------------------

Outcome criterion9() {
  Check c;
  const fs::path fx = data_path("fixtures");
  const auto skel = parse_asf(read_text_file(fx / "chain2.asf"));
  auto joint = [&](const std::string& amc, std::size_t frame, const std::string& name) {
    const auto raw = forward_kinematics(skel, parse_amc(read_text_file(fx / amc), skel));
    for (std::size_t i = 0; i < raw.joint_names.size(); ++i)
      if (raw.joint_names[i] == name) return Eigen::Vector3d(raw.track[frame].joint(i));
    c.require(false, "no joint " + name);
    return Eigen::Vector3d(Eigen::Vector3d::Zero());
  };
  struct Expect {
    const char* amc;
    std::size_t frame;
    const char* joint;
    Eigen::Vector3d pos;
  };
  // upper bone length 1 along +y, lower bone length 2 along +y
  const std::vector<Expect> cases = {
      {"chain2_rest.amc", 0, "root", {0, 0, 0}},         {"chain2_rest.amc", 0, "upper", {0, 1, 0}},
      {"chain2_rest.amc", 0, "lower", {0, 3, 0}},        {"chain2_translate.amc", 0, "root", {1, 2, 3}},
      {"chain2_translate.amc", 0, "upper", {1, 3, 3}},   {"chain2_translate.amc", 0, "lower", {1, 5, 3}},
      {"chain2_rotz.amc", 0, "upper", {-1, 0, 0}},       {"chain2_rotz.amc", 0, "lower", {-3, 0, 0}},
      {"chain2_3frames.amc", 1, "lower", {1, 5, 3}},     {"chain2_3frames.amc", 2, "upper", {-1, 0, 0}},
      {"chain2_3frames.amc", 2, "lower", {-1, 0, 2}},
  };
  double worst = 0;
  for (const auto& e : cases) {
    const double err = (joint(e.amc, e.frame, e.joint) - e.pos).norm();
    worst = std::max(worst, err);
    c.require(err <= kFkTol, std::string(e.amc) + " frame " + std::to_string(e.frame) + " " + e.joint + " off by " +
                                 fmt("%.3e", err));
  }
  auto line_of = [&](const std::function<void()>& f) -> std::size_t {
    try {
      f();
    } catch (const ParseError& e) {
      return e.line();
    } catch (const SemanticError& e) {
      const std::string w = e.what();
      const auto p = w.find("line ");
      return p == std::string::npos ? 0 : std::stoul(w.substr(p + 5));
    } catch (...) {
    }
    return 0;
  };
  const std::vector<std::pair<std::string, std::size_t>> bad_asf = {
      {"bad_length.asf", 31}, {"bad_dof.asf", 22}, {"bad_hierarchy.asf", 38}};
  for (const auto& [f, line] : bad_asf) {
    const std::size_t got = line_of([&] { parse_asf(read_text_file(fx / f)); });
    c.require(got == line, f + " reported line " + std::to_string(got) + ", expected " + std::to_string(line));
  }
  const std::vector<std::pair<std::string, std::size_t>> bad_amc = {
      {"bad_channel_count.amc", 6}, {"bad_number.amc", 6}, {"bad_missing_channel.amc", 7}};
  for (const auto& [f, line] : bad_amc) {
    const std::size_t got = line_of([&] { parse_amc(read_text_file(fx / f), skel); });
    c.require(got == line, f + " reported line " + std::to_string(got) + ", expected " + std::to_string(line));
  }
  return {c.pass(), c.pass() ? std::to_string(cases.size()) + " FK joint positions within " + fmt("%.0e", kFkTol) +
                                   " (max " + fmt("%.1e", worst) + "), 6 malformed fixtures at the expected lines"
                             : c.failure()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient integrity", criterion1},
      {"metric oracle equivalence", criterion2},
      {"mode-semantics invariants", criterion3},
      {"loss-structure properties", criterion4},
      {"training smoke", criterion5},
      {"dual-level ablation direction", criterion6},
      {"progressive-inference arithmetic", criterion7},
      {"pipeline determinism and persistence", criterion8},
      {"parser correctness", criterion9},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
      return 2;
    }
    selected.insert(k);
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(k)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d %s: %s  %s\n", k, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
