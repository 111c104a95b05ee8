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

// Deterministic synthetic tracking worlds: ground-truth trajectories, noisy
// detections and identity-conditioned embeddings.

#pragma once

#include "simtrack/metrics.hpp"
#include "simtrack/tracker.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace simtrack::synth {

enum class Motion { fixed, linear, random_walk };

struct Occlusion {
  int identity = 0;
  int first_frame = 0;
  int last_frame = 0;  // inclusive
};

struct WorldConfig {
  int identities = 10;
  int frames = 100;
  int classes = 1;  // class of identity i is i % classes
  double image_width = 1920.0;
  double image_height = 1080.0;
  Motion motion = Motion::linear;
  double speed = 4.0;        // pixels per frame
  double walk_sigma = 1.0;   // random-walk velocity noise
  bool lanes = false;        // one horizontal lane per identity, no crossings
  double min_box = 40.0;
  double max_box = 100.0;

  int dim = 32;
  double prototype_margin = 0.3;  // required 1 - cos between any two prototypes
  double embed_noise = 0.0;       // expected norm of the noise added to a prototype
  double temperature = 10.0;      // embedding norm; logits scale with its square

  double fn_rate = 0.0;
  double fp_rate = 0.0;  // per identity slot and frame
  double box_jitter = 0.0;
  double class_flip_rate = 0.0;
  double det_score_min = 0.7;
  double det_score_max = 1.0;
  double fp_score_min = 0.2;
  double fp_score_max = 0.5;

  std::vector<Occlusion> occlusions;
  double occlusion_rate = 0.0;  // chance per identity and frame to start an occlusion
  int occlusion_length = 5;

  // Recurring false positives with a fixed embedding close to a host identity.
  int distractors = 0;
  double distractor_similarity = 0.8;  // cosine to the host prototype
  double distractor_rate = 1.0;        // chance to fire in a frame
  double distractor_score_min = 0.36;
  double distractor_score_max = 0.48;

  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr int kFalsePositive = -1;

struct Scenario {
  int frame_count = 0;
  int dim = 0;
  metrics::TrackSet gt;                          // ids are identity + 1
  std::vector<std::vector<Detection>> detections;  // indexed by frame
  std::vector<std::vector<int>> truth;  // identity per detection, kFalsePositive otherwise
  Eigen::MatrixXd prototypes;           // identities x dim, unit rows
};

/// Places unit prototypes by iterative repulsion. Throws when the minimum
/// pairwise separation cannot be reached within the iteration budget.
Eigen::MatrixXd place_prototypes(int count, int dim, double margin, std::mt19937_64& rng);

Scenario generate(const WorldConfig& cfg);

/// Keeps frames 0, k, 2k, ... and renumbers them densely.
Scenario subsample(const Scenario& scenario, int keep_every);

/// Replaces every detection embedding with `embed(true identity, rng)`.
using EmbeddingSource = std::function<Embedding(int identity, std::mt19937_64& rng)>;
Scenario reembed(const Scenario& scenario, const EmbeddingSource& embed, std::uint64_t seed);

/// Location-only baseline: each detection (by descending score) continues the
/// previous-frame track of highest IoU above the threshold, else starts one.
metrics::TrackSet iou_baseline_track(const Scenario& scenario, double iou_match_threshold);

/// Detections associated by their true identity; false positives each get a
/// fresh id.
metrics::TrackSet tracking_oracle(const Scenario& scenario);

/// Ground-truth boxes turned into detections with noise-free prototype
/// embeddings.
Scenario detection_oracle(const Scenario& scenario, double temperature);

}  // namespace simtrack::synth
