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

// Command-line front end: track, eval, synth, ablate, gradcheck.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 invariant failure.

#include "simtrack/ablation.hpp"
#include "simtrack/io.hpp"
#include "simtrack/profile.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using namespace simtrack;
using nlohmann::json;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInvariant = 3 };

struct Globals {
  std::uint64_t seed = 0;
  std::string profile;
  std::string config;
};

// The --config file holds optional "tracker" and "world" sections.
json config_section(const Globals& g, const char* section) {
  if (g.config.empty()) return json::object();
  const json doc = parse_json_text(io::read_file(g.config), g.config);
  if (!doc.is_object()) throw ConfigError(g.config + ": expected a JSON object");
  for (const auto& [key, value] : doc.items())
    if (key != "tracker" && key != "world")
      throw ConfigError(g.config + ": unknown section '" + key + "'");
  return doc.contains(section) ? doc.at(section) : json::object();
}

TrackerConfig tracker_config(const Globals& g) {
  TrackerConfig base = g.profile.empty() ? TrackerConfig{} : load_profile(g.profile);
  return parse_tracker_config(config_section(g, "tracker"), base);
}

synth::WorldConfig world_config(const Globals& g) {
  synth::WorldConfig w = parse_world_config(config_section(g, "world"));
  w.seed = g.seed;
  return w;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text << std::flush;
  else
    io::write_file_atomic(path, text);
}

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  return io::read_file(path);
}

// --- track ---------------------------------------------------------------------

struct TrackArgs {
  std::string input;
  std::string output;
};

int run_track(const Globals& g, const TrackArgs& a) {
  const TrackerConfig cfg = tracker_config(g);
  for (const auto& w : cfg.warnings()) std::cerr << "warning: " << w << "\n";
  std::istringstream in(read_input(a.input));
  const io::DetectionFile file = io::read_detections(in);

  const auto start = std::chrono::steady_clock::now();
  Tracker tracker(cfg);
  for (const auto& [frame, dets] : io::group_by_frame(file)) tracker.step(frame, dets);
  const auto histories = finalize(tracker);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  std::ostringstream out;
  io::write_mot(out, io::to_mot(histories));
  emit(a.output, out.str());
  std::fprintf(stderr, "tracked %zu tracks from %zu detections in %.1f ms\n", histories.size(),
               file.records.size(), ms);
  return kOk;
}

// --- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string gt;
  std::string pred;
  bool per_class = false;
  double iou = 0.5;
  std::string output;
};

int run_eval(const Globals&, const EvalArgs& a) {
  std::istringstream gin(read_input(a.gt)), pin(read_input(a.pred));
  const auto gt = io::to_track_set(io::read_mot(gin));
  const auto pred = io::to_track_set(io::read_mot(pin));
  if (!gt.frames.empty() && !pred.frames.empty()) {
    const bool disjoint = gt.frames.rbegin()->first < pred.frames.begin()->first ||
                          pred.frames.rbegin()->first < gt.frames.begin()->first;
    if (disjoint)
      std::cerr << "warning: ground-truth and prediction frame ranges are disjoint; "
                   "scoring over their union\n";
  }
  const auto report = a.per_class ? metrics::per_class_report(gt, pred, a.iou)
                                  : metrics::class_agnostic_report(gt, pred, a.iou);
  std::cout << report.to_text();
  if (!a.output.empty()) io::write_file_atomic(a.output, report.to_key_values());
  else std::cout << report.to_key_values();
  return kOk;
}

// --- synth ---------------------------------------------------------------------

struct SynthArgs {
  std::string detections;
  std::string gt;
};

int run_synth(const Globals& g, const SynthArgs& a) {
  const auto sc = synth::generate(world_config(g));
  std::ostringstream det, gt;
  io::write_detections(det, io::scenario_detections(sc));
  io::write_mot(gt, io::to_mot(sc.gt));
  emit(a.detections, det.str());
  if (!a.gt.empty()) io::write_file_atomic(a.gt, gt.str());
  return kOk;
}

// --- ablate --------------------------------------------------------------------

struct AblateArgs {
  std::string sweep;
  std::string output;
  int train_steps = 200;
  double learning_rate = 0.5;
};

int run_ablate(const Globals& g, const AblateArgs& a) {
  ablation::Sweep sweep = ablation::parse_sweep(parse_json_text(io::read_file(a.sweep), a.sweep));
  if (sweep.seeds.empty()) sweep.seeds = {g.seed};
  const TrackerConfig cfg = tracker_config(g);
  const synth::WorldConfig world = world_config(g);
  ablation::Options opt;
  opt.loss_train_steps = a.train_steps;
  opt.loss_learning_rate = a.learning_rate;
  const auto table = ablation::run_sweep(world, cfg, sweep, opt);
  emit(a.output, table.to_csv());
  return kOk;
}

// --- gradcheck -----------------------------------------------------------------

struct GradcheckArgs {
  std::vector<int> dims{4};
  int key_size = 8;
  int ref_size = 8;
  int seeds = 10;
  double embed_weight = 0.25;
  double aux_weight = 1.0;
  bool corrupt = false;
};

int run_gradcheck(const Globals& g, const GradcheckArgs& a) {
  ablation::GradcheckConfig cfg;
  cfg.dims = a.dims;
  cfg.key_size = a.key_size;
  cfg.ref_size = a.ref_size;
  cfg.seeds.clear();
  for (int s = 0; s < a.seeds; ++s) cfg.seeds.push_back(g.seed + static_cast<std::uint64_t>(s));
  cfg.embed_weight = a.embed_weight;
  cfg.aux_weight = a.aux_weight;
  cfg.variants = {contrastive::LossVariant::single_positive, contrastive::LossVariant::naive_multi,
                  contrastive::LossVariant::accumulated_multi};
  cfg.corrupt = a.corrupt;
  const auto report = ablation::gradcheck(cfg);
  std::cout << report.to_text();
  return report.passed ? kOk : kInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simtrack: appearance-embedding multi-object tracking toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--profile", g.profile,
                 "Tracker profile: mot17, mot20, dancetrack, bdd100k, waymo, tao, or a .json path");
  app.add_option("--config", g.config, "JSON file with optional 'tracker' and 'world' sections");

  TrackArgs ta;
  auto* track = app.add_subcommand("track", "Track a detection file, writing MOT rows");
  track->add_option("-i,--input", ta.input, "Detection file ('-' for stdin)")->required();
  track->add_option("-o,--output", ta.output, "Output MOT file (default stdout)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--gt", ea.gt, "Ground-truth MOT file")->required();
  eval->add_option("--pred", ea.pred, "Predicted MOT file")->required();
  eval->add_flag("--per-class", ea.per_class, "Report every class separately");
  eval->add_option("--iou", ea.iou, "IoU threshold for CLEAR-MOT and IDF1")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  eval->add_option("-o,--output", ea.output, "Write key=value metrics here");

  SynthArgs sa;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic scenario");
  syn->add_option("-o,--detections", sa.detections, "Detection file (default stdout)");
  syn->add_option("--gt", sa.gt, "Ground-truth MOT file");

  AblateArgs aa;
  auto* ablate = app.add_subcommand("ablate", "Run an ablation sweep, writing CSV");
  ablate->add_option("--sweep", aa.sweep, "Sweep JSON")->required();
  ablate->add_option("-o,--output", aa.output, "CSV file (default stdout)");
  ablate->add_option("--train-steps", aa.train_steps, "Optimization steps for loss variants")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ablate->add_option("--lr", aa.learning_rate, "Initial learning rate for loss variants")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  GradcheckArgs ga;
  auto* grad = app.add_subcommand("gradcheck", "Check loss gradients by finite differences");
  grad->add_option("--dims", ga.dims, "Embedding dimensions")->delimiter(',')->capture_default_str();
  grad->add_option("--key-size", ga.key_size)->check(CLI::PositiveNumber)->capture_default_str();
  grad->add_option("--ref-size", ga.ref_size)->check(CLI::PositiveNumber)->capture_default_str();
  grad->add_option("--seeds", ga.seeds, "Number of seeds, counting up from --seed")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad->add_option("--embed-weight", ga.embed_weight)->capture_default_str();
  grad->add_option("--aux-weight", ga.aux_weight)->capture_default_str();
  grad->add_flag("--corrupt", ga.corrupt, "Test hook: perturb one analytic gradient entry")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*track) return run_track(g, ta);
    if (*eval) return run_eval(g, ea);
    if (*syn) return run_synth(g, sa);
    if (*ablate) return run_ablate(g, aa);
    if (*grad) return run_gradcheck(g, ga);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const io::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return kInvariant;
  }
  return kUsage;
}
