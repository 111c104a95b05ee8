// Copyright 2026 The simtrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include "metrics_oracle.hpp"
#include "simtrack/ablation.hpp"
#include "simtrack/io.hpp"
#include "simtrack/profile.hpp"
#include "simtrack/similarity.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

using namespace simtrack;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

synth::WorldConfig scenario(const std::string& name) {
  const std::string path = std::string(SIMTRACK_SOURCE_DIR) + "/scenarios/" + name + ".json";
  return parse_world_config(parse_json_text(io::read_file(path), path).at("world"));
}

// --- 1 ---------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  // 17 + 17 + 16 batches across the three dimensions.
  const std::vector<std::pair<int, int>> plan = {{4, 17}, {16, 17}, {64, 16}};
  double worst = 0.0;
  int batches = 0;
  for (const auto& [dim, count] : plan) {
    ablation::GradcheckConfig cfg;
    cfg.dims = {dim};
    cfg.key_size = 12;
    cfg.ref_size = 16;
    cfg.seeds.clear();
    for (int s = 0; s < count; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(100 + s));
    const auto r = ablation::gradcheck(cfg);
    worst = std::max(worst, r.max_rel_error);
    batches += r.batches;
  }
  const double secs = seconds_since(t0);
  return {batches == 50 && worst < 1e-6 && secs < 30.0,
          format("%d batches, max relative error %.3e (< 1e-6), %.2f s (< 30 s)", batches, worst, secs)};
}

// --- 2 ---------------------------------------------------------------------------

Outcome cross_entropy_identity() {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> negatives(0, 40), dims(2, 64);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int d = dims(rng);
    const Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(d, [&] { return g(rng); }).normalized() * 3.0;
    const Eigen::VectorXd pos = Eigen::VectorXd::NullaryExpr(d, [&] { return g(rng); }).normalized() * 3.0;
    std::vector<double> neg_logits(static_cast<std::size_t>(negatives(rng)));
    for (auto& n : neg_logits)
      n = v.dot(Eigen::VectorXd::NullaryExpr(d, [&] { return g(rng); }).normalized() * 3.0);
    const double eq1 = contrastive::infonce_cross_entropy(v.dot(pos), neg_logits);
    const double eq3 = contrastive::infonce_log_sum(v.dot(pos), neg_logits);
    worst = std::max(worst, std::abs(eq1 - eq3));
  }
  return {worst <= 1e-12, format("1000 instances, max |difference| %.3e (<= 1e-12)", worst)};
}

// --- 3 ---------------------------------------------------------------------------

Outcome bisoftmax_invariants() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> size(1, 30);
  bool in_range = true;
  double sum_err = 0.0, shift_err = 0.0;
  for (int t = 0; t < 500; ++t) {
    const int n = size(rng), m = size(rng), d = 16;
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(n, d, [&] { return g(rng); });
    const Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(m, d, [&] { return g(rng); });
    const Eigen::MatrixXd logits = a * b.transpose();
    const auto s = bisoftmax_from_logits(logits);
    in_range = in_range && (s.score.array() > 0.0).all() && (s.score.array() <= 1.0).all();
    sum_err = std::max(sum_err, (s.row.rowwise().sum().array() - 1.0).abs().maxCoeff());
    sum_err = std::max(sum_err, (s.col.colwise().sum().array() - 1.0).abs().maxCoeff());
    const double c = 50.0 * g(rng);
    const Eigen::MatrixXd shifted = (logits.array() + c).matrix();
    shift_err = std::max(shift_err, (bisoftmax_from_logits(shifted).score - s.score).cwiseAbs().maxCoeff());
  }
  bool single = true;
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(1, 8, [&] { return 100.0 * g(rng); });
    const Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(1, 8, [&] { return 100.0 * g(rng); });
    single = single && bisoftmax_matrix(a, b)(0, 0) == 1.0;
  }
  return {in_range && single && sum_err <= 1e-12 && shift_err <= 1e-12,
          format("entries in (0,1]: %s, 1x1 exactly 1: %s, softmax sum error %.2e, shift error %.2e "
                 "(<= 1e-12)",
                 in_range ? "yes" : "no", single ? "yes" : "no", sum_err, shift_err)};
}

// --- 4 ---------------------------------------------------------------------------

Outcome detection_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  synth::WorldConfig w = scenario("detection_oracle");
  const synth::Scenario sc = synth::detection_oracle(synth::generate(w), w.temperature);
  // Ground-truth boxes are never duplicates, so suppression is bypassed.
  TrackerConfig cfg;
  cfg.nms_threshold = 1.0;
  const auto s = ablation::score(sc, ablation::run_tracker(sc, cfg));
  const double secs = seconds_since(t0);
  return {s.mota == 1.0 && s.idf1 == 1.0 && s.idsw == 0 && secs < 10.0,
          format("%d identities x %d frames: MOTA %.6f, IDF1 %.6f, IDSW %ld, %.2f s (< 10 s)", w.identities,
                 w.frames, s.mota, s.idf1, s.idsw, secs)};
}

// --- 5 ---------------------------------------------------------------------------

Outcome metrics_oracle() {
  std::mt19937_64 rng(5);
  int checked = 0, agreed = 0;
  std::string first;
  for (int t = 0; checked < 400 && t < 5000; ++t) {
    auto [gt, pred] = oracle::random_instance(rng, 4, 5, t % 2 == 0);
    metrics::TrackSet g = gt, p = pred;
    metrics::remove_ignored(g, p, 0.5);
    if (g.size() == 0) continue;
    ++checked;
    const std::string diff = oracle::compare(gt, pred, 1e-12);
    if (diff.empty()) ++agreed;
    else if (first.empty()) first = diff;
  }
  return {checked >= 200 && agreed == checked,
          format("%d/%d random instances (<= 4 ids, <= 5 frames) agree exactly on counts, 1e-12 on ratios%s",
                 agreed, checked, first.empty() ? "" : ("; first difference: " + first).c_str())};
}

// --- 6 ---------------------------------------------------------------------------

std::vector<std::uint64_t> ten_seeds() { return {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}; }

Outcome association_ablation() {
  ablation::Sweep sweep =
      ablation::parse_sweep(nlohmann::json{{"metric", {"cosine", "bisoftmax"}}, {"backdrops", {"on", "off"}}});
  sweep.seeds = ten_seeds();
  const auto table = ablation::run_sweep(scenario("standard_noisy"), TrackerConfig{}, sweep);
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> mean;  // (idf1, idsw)
  for (const auto& r : table.rows) {
    auto& m = mean[{r.settings[0], r.settings[1]}];
    m.first += r.scores.idf1 / 10.0;
    m.second += static_cast<double>(r.scores.idsw) / 10.0;
  }
  const double bis = mean[{"bisoftmax", "on"}].first, cos = mean[{"cosine", "on"}].first;
  const double with = mean[{"bisoftmax", "on"}].second, without = mean[{"bisoftmax", "off"}].second;
  return {bis > cos && with < without,
          format("10 seeds: IDF1 bi-softmax %.4f > cosine %.4f; bi-softmax IDSW with backdrops %.1f < "
                 "without %.1f",
                 bis, cos, with, without)};
}

// --- 7 ---------------------------------------------------------------------------

Outcome loss_ablation() {
  const contrastive::ToyWorldConfig tc;  // 8 identities, 16-dimensional embeddings
  double eq1_sum = 0.0, eq4_sum = 0.0, diff_sum = 0.0;
  int wins = 0, ties = 0, losses = 0;
  for (std::uint64_t seed : ten_seeds()) {
    const contrastive::ToyWorld world(tc, seed);
    std::mt19937_64 rng(seed);
    const auto init = contrastive::EmbeddingHead::random(tc.embed_dim, tc.feature_dim, rng);
    auto train = [&](contrastive::LossVariant v) {
      contrastive::LossConfig lc;
      lc.variant = v;
      return contrastive::optimize_embeddings(world.stream(), lc, 200, 0.5, seed, init).head;
    };
    const double a1 = world.nn_identity_accuracy(train(contrastive::LossVariant::single_positive), 30, 1000 + seed);
    const double a4 = world.nn_identity_accuracy(train(contrastive::LossVariant::accumulated_multi), 30, 1000 + seed);
    eq1_sum += a1;
    eq4_sum += a4;
    diff_sum += a4 - a1;
    (a4 > a1 ? wins : a4 == a1 ? ties : losses) += 1;
  }
  const double eq1 = eq1_sum / 10.0, eq4 = eq4_sum / 10.0, diff = diff_sum / 10.0;
  return {diff >= 0.0 && eq4 >= 0.95,
          format("nearest-neighbor identity accuracy, 10 seeds, 200 steps at lr 0.5: accumulated multi-positive "
                 "%.4f, single positive %.4f, mean paired difference %+.4f (>= 0; %d wins, %d ties, %d losses), "
                 "floor 0.95",
                 eq4, eq1, diff, wins, ties, losses)};
}

// --- 8 ---------------------------------------------------------------------------

Outcome frame_rate() {
  ablation::Sweep sweep =
      ablation::parse_sweep(nlohmann::json{{"subsample", {1, 5, 30}}, {"baseline", {"appearance", "iou"}}});
  sweep.seeds = ten_seeds();
  const auto table = ablation::run_sweep(scenario("moving"), TrackerConfig{}, sweep);
  std::map<std::pair<std::string, std::string>, double> idf1;
  for (const auto& r : table.rows) idf1[{r.settings[0], r.settings[1]}] += r.scores.idf1 / 10.0;
  auto drop = [&](const std::string& k, const std::string& b) {
    return (idf1[{"1", b}] - idf1[{k, b}]) / idf1[{"1", b}];
  };
  const double app5 = drop("5", "appearance"), iou5 = drop("5", "iou");
  const double app30 = drop("30", "appearance"), iou30 = drop("30", "iou");
  const double app_at30 = idf1[{"30", "appearance"}], iou_at30 = idf1[{"30", "iou"}];
  return {app5 < iou5 && app30 < iou30 && iou_at30 < 0.2 && app_at30 > 0.8,
          format("relative IDF1 drop appearance vs IoU: 5x %.4f < %.4f, 30x %.4f < %.4f; IDF1 at 30x appearance "
                 "%.4f (> 0.8), IoU %.4f (< 0.2)",
                 app5, iou5, app30, iou30, app_at30, iou_at30)};
}

// --- 9 ---------------------------------------------------------------------------

std::string run_cli(const std::string& args, int* code) {
  const std::string cmd = std::string(SIMTRACK_CLI) + " " + args + " 2>/dev/null";
  std::string out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    *code = -1;
    return out;
  }
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = ::pclose(pipe);
  *code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("simtrack_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string cfg = std::string(SIMTRACK_SOURCE_DIR) + "/scenarios/standard_noisy.json";
  const std::string det = (dir / "det.txt").string(), sweep = (dir / "sweep.json").string();
  std::ofstream(sweep) << R"({"metric": ["cosine", "bisoftmax"], "loss": ["eq1", "eq4"], "seeds": [0, 1]})";

  int c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0;
  run_cli("--seed 17 --config " + cfg + " synth -o " + det, &c1);
  const std::string t1 = run_cli("--seed 17 --profile mot17 track -i " + det, &c2);
  const std::string t2 = run_cli("--seed 17 --profile mot17 track -i " + det, &c3);
  const std::string a1 = run_cli("--seed 17 --config " + cfg + " ablate --train-steps 50 --sweep " + sweep, &c4);
  const std::string a2 = run_cli("--seed 17 --config " + cfg + " ablate --train-steps 50 --sweep " + sweep, &c5);
  fs::remove_all(dir);
  const bool ok_codes = c1 == 0 && c2 == 0 && c3 == 0 && c4 == 0 && c5 == 0;
  return {ok_codes && !t1.empty() && t1 == t2 && !a1.empty() && a1 == a2,
          format("track: %zu bytes, identical %s; ablate: %zu bytes, identical %s", t1.size(),
                 t1 == t2 ? "yes" : "no", a1.size(), a1 == a2 ? "yes" : "no")};
}

// --- 10 --------------------------------------------------------------------------

Outcome throughput() {
  constexpr int kDim = 256, kCandidates = 500, kDetections = 100, kFrames = 300;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1800.0);
  std::vector<Detection> objects(kCandidates);
  for (auto& d : objects) {
    const double x = u(rng), y = u(rng) * 0.55;
    d.box = BoundingBox::from_xywh(x, y, 60, 120);
    d.score = 0.9;
    d.embedding = Eigen::VectorXd::NullaryExpr(kDim, [&] { return g(rng); }).normalized() * 10.0;
  }
  TrackerConfig cfg;
  cfg.memory_frames = kFrames + 1;  // every track stays a candidate
  cfg.backdrop_frames.reset();
  Tracker tracker(cfg);
  tracker.step(0, objects);

  std::vector<std::vector<Detection>> frames(kFrames);
  std::uniform_int_distribution<int> pick(0, kCandidates - 1);
  for (auto& f : frames) {
    for (int k = 0; k < kDetections; ++k) {
      Detection d = objects[static_cast<std::size_t>(pick(rng))];
      d.embedding += Eigen::VectorXd::NullaryExpr(kDim, [&] { return 0.05 * g(rng); });
      f.push_back(std::move(d));
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t matched = 0;
  for (int f = 0; f < kFrames; ++f) matched += tracker.step(f + 1, frames[static_cast<std::size_t>(f)]).size();
  const double fps = kFrames / seconds_since(t0);
  return {fps >= 100.0 && tracker.tracks().size() >= static_cast<std::size_t>(kCandidates),
          format("%d detections x %zu candidates, D=%d: %.0f frames/s (>= 100), %zu associations", kDetections,
                 tracker.tracks().size(), kDim, fps, matched)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_check},
      {"single-positive loss identity", cross_entropy_identity},
      {"bi-softmax invariants", bisoftmax_invariants},
      {"detection oracle", detection_oracle},
      {"metrics oracle equivalence", metrics_oracle},
      {"association ablation direction", association_ablation},
      {"loss variant ablation direction", loss_ablation},
      {"frame-rate robustness direction", frame_rate},
      {"CLI determinism", determinism},
      {"association throughput", throughput},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu %s: %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
