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

// Ablation harness over synthetic scenarios, and the finite-difference
// gradient check for the contrastive losses.

#pragma once

#include "simtrack/contrastive.hpp"
#include "simtrack/metrics.hpp"
#include "simtrack/synth.hpp"
#include "simtrack/tracker.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace simtrack::ablation {

/// Runs the tracker over every frame of the scenario and returns the
/// finalized tracks.
metrics::TrackSet run_tracker(const synth::Scenario& scenario, const TrackerConfig& cfg);

metrics::TrackSet to_track_set(const std::vector<TrackHistory>& histories);

struct Scores {
  double mota = 0.0;
  double idf1 = 0.0;
  double hota = 0.0;
  long idsw = 0;
};

/// Aggregate scores of `pred` against the scenario ground truth.
Scores score(const synth::Scenario& scenario, const metrics::TrackSet& pred);

/// Sweep axes in their canonical order.
inline const std::vector<std::string> kSweepAxes = {"metric", "loss",     "backdrops",
                                                    "duplicate_removal", "subsample", "baseline"};

struct Sweep {
  // Values per axis, in the order of kSweepAxes; absent axes are empty.
  std::vector<std::vector<std::string>> values{kSweepAxes.size()};
  std::vector<std::uint64_t> seeds;

  bool has(const std::string& axis) const;
  std::size_t configurations() const;
};

/// Parses {"metric": ["cosine", "bisoftmax"], "seeds": [0, 1, 2], ...}.
/// Unknown keys and values are rejected here, before anything runs.
Sweep parse_sweep(const nlohmann::json& j);

struct Options {
  double iou_baseline_threshold = 0.3;
  int loss_train_steps = 200;
  double loss_learning_rate = 0.5;
  int max_lr_halvings = 4;  // retries after divergence, each at half the rate
  contrastive::ToyWorldConfig toy{};
};

struct Row {
  std::vector<std::string> settings;  // aligned with the swept axes
  std::uint64_t seed = 0;
  Scores scores;
};

struct Table {
  std::vector<std::string> axes;  // swept axes only
  std::vector<Row> rows;

  std::string to_csv() const;
  /// Mean of a score over the rows whose setting on `axis` equals `value`.
  double mean(const std::string& axis, const std::string& value,
              double Scores::*field) const;
  double mean_idsw(const std::string& axis, const std::string& value) const;
};

/// One row per (configuration, seed). The scenario seed of each row is the
/// row's seed; everything else comes from `world` and `tracker`.
Table run_sweep(const synth::WorldConfig& world, const TrackerConfig& tracker, const Sweep& sweep,
                const Options& options = {});

/// Embedding head trained on the toy region world with the given loss. A
/// diverging run is retried at half the learning rate, up to
/// `options.max_lr_halvings` times.
contrastive::EmbeddingHead train_head(const contrastive::ToyWorld& toy,
                                      contrastive::LossVariant variant, std::uint64_t seed,
                                      const Options& options);

/// Re-embeds the scenario through a trained head; embeddings are scaled to
/// the world's temperature.
synth::Scenario embed_with_head(const synth::Scenario& scenario, const contrastive::ToyWorld& toy,
                                const contrastive::EmbeddingHead& head, double temperature,
                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gradient check

struct GradcheckConfig {
  std::vector<int> dims{4};
  int key_size = 8;
  int ref_size = 8;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double step = 1e-5;
  double tolerance = 1e-6;
  double embed_weight = 0.25;
  double aux_weight = 1.0;
  std::vector<contrastive::LossVariant> variants{contrastive::LossVariant::accumulated_multi};
  bool corrupt = false;  // test hook: perturbs one analytic entry
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  int batches = 0;
  bool passed = false;
  std::string to_text() const;
};

/// Compares analytic gradients of loss_total against central differences.
/// Relative error per entry is |a - n| / max(1, |a|, |n|).
GradcheckReport gradcheck(const GradcheckConfig& cfg);

}  // namespace simtrack::ablation
