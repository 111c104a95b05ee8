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

// Quasi-dense sample assignment and the contrastive embedding objective.
//
// A training pair consists of a key frame (anchor samples) and a reference
// frame (contrastive targets). Every key sample is compared with every
// reference sample; a pair is positive when both regions are positives of the
// same ground-truth instance.

#pragma once

#include "simtrack/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace simtrack::contrastive {

enum class Polarity { positive, negative, ignored };

struct GroundTruthBox {
  BoundingBox box;
  int identity{0};
};

struct RegionSample {
  BoundingBox box;
  std::optional<int> identity;
  Polarity polarity{Polarity::ignored};
  double max_iou{0.0};
};

/// Labels every region against its best-overlapping ground truth (ties go to
/// the lower ground-truth index): positive above `pos_iou`, negative below
/// `neg_iou`, ignored in between.
std::vector<RegionSample> assign_samples(std::span<const BoundingBox> regions,
                                         std::span<const GroundTruthBox> gts,
                                         double pos_iou = 0.7, double neg_iou = 0.3);

struct SamplerConfig {
  int key_size = 128;
  int ref_size = 256;
  double pos_neg_ratio = 1.0;  // positives : negatives in each drawn frame
  int iou_bins = 3;            // equal-width bins over [0, neg_iou)
  double neg_iou = 0.3;
};

using PositivityMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct SampleBatch {
  std::vector<RegionSample> key;
  std::vector<RegionSample> ref;
  // Index of each drawn sample in the caller's input list.
  std::vector<std::size_t> key_source;
  std::vector<std::size_t> ref_source;
  PositivityMatrix positivity;  // key.size() x ref.size()

  std::size_t positive_pairs() const { return static_cast<std::size_t>(positivity.count()); }
};

/// Recomputes the positivity matrix from the sample labels.
PositivityMatrix positivity_of(std::span<const RegionSample> key,
                               std::span<const RegionSample> ref);

/// Draws key and reference samples. Positives are subsampled uniformly;
/// negatives by IoU-balanced round-robin across non-empty IoU bins. Shortfalls
/// in either polarity are filled from the other. Throws when either frame has
/// no positive or no positive pair exists.
SampleBatch sample_batch(std::span<const RegionSample> key_samples,
                         std::span<const RegionSample> ref_samples, std::uint64_t seed,
                         const SamplerConfig& cfg = {});

// ---------------------------------------------------------------------------
// Objective

enum class LossVariant {
  single_positive,    // softmax cross-entropy, averaged over the key's positives
  naive_multi,        // sum of per-positive cross-entropies
  accumulated_multi,  // log[1 + sum_{k+} sum_{k-} exp(v.k- - v.k+)]
};

struct LossConfig {
  double embed_weight = 0.25;
  double aux_weight = 1.0;
  int aux_neg_ratio = 3;
  LossVariant variant = LossVariant::accumulated_multi;
};

/// -log(exp(pos) / (exp(pos) + sum exp(negs))), evaluated in softmax form.
double infonce_cross_entropy(double pos_logit, std::span<const double> neg_logits);
/// log(1 + sum exp(neg - pos)), the same quantity in log-sum form.
double infonce_log_sum(double pos_logit, std::span<const double> neg_logits);

/// Mean over key samples with at least one positive of the per-key loss.
double loss_embed(const SampleBatch& batch, const Eigen::MatrixXd& key_emb,
                  const Eigen::MatrixXd& ref_emb, LossVariant variant);

/// Pairs entering the auxiliary L2 cosine loss: every positive pair plus the
/// `neg_ratio` x |positives| negative pairs of highest cosine.
struct AuxPairs {
  std::vector<std::pair<int, int>> positives;
  std::vector<std::pair<int, int>> negatives;
};

AuxPairs select_aux_pairs(const SampleBatch& batch, const Eigen::MatrixXd& key_emb,
                          const Eigen::MatrixXd& ref_emb, int neg_ratio = 3);

double loss_aux(const SampleBatch& batch, const Eigen::MatrixXd& key_emb,
                const Eigen::MatrixXd& ref_emb, int neg_ratio = 3);

struct LossResult {
  double value = 0.0;
  double embed = 0.0;
  double aux = 0.0;
  Eigen::MatrixXd key_grad;
  Eigen::MatrixXd ref_grad;
};

/// embed_weight * loss_embed + aux_weight * loss_aux with its exact gradient.
/// The hard-negative set is a discrete choice; pass `frozen` to evaluate with
/// a fixed selection (the gradient is always taken with the selection fixed).
LossResult loss_total(const SampleBatch& batch, const Eigen::MatrixXd& key_emb,
                      const Eigen::MatrixXd& ref_emb, const LossConfig& cfg,
                      const AuxPairs* frozen = nullptr);

// ---------------------------------------------------------------------------
// Desk-scale optimization

/// Linear embedding head: embedding = weight * feature.
struct EmbeddingHead {
  Eigen::MatrixXd weight;  // embed_dim x feature_dim

  Eigen::MatrixXd embed(const Eigen::MatrixXd& features) const {
    return features * weight.transpose();
  }
  static EmbeddingHead random(int embed_dim, int feature_dim, std::mt19937_64& rng);
};

/// A sampled batch together with the region features its samples came from.
struct TrainingPair {
  SampleBatch batch;
  Eigen::MatrixXd key_features;  // rows aligned with batch.key
  Eigen::MatrixXd ref_features;  // rows aligned with batch.ref
};

using BatchStream = std::function<TrainingPair(std::mt19937_64&)>;

struct TracePoint {
  int step = 0;
  double loss = 0.0;
};

struct OptimizeResult {
  EmbeddingHead head;
  Eigen::MatrixXd key_embeddings;  // embeddings of the last drawn pair
  Eigen::MatrixXd ref_embeddings;
  std::vector<TracePoint> trace;
};

/// Raised when the optimized loss exceeds 1e9 or turns non-finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, const std::string& what) : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Plain gradient descent on loss_total, chained through the linear head.
/// Throws DivergenceError naming the step when the loss blows up.
OptimizeResult optimize_embeddings(const BatchStream& stream, const LossConfig& cfg, int steps,
                                   double lr, std::uint64_t seed, EmbeddingHead init);

/// Synthetic region world for the optimization demo: identities carry feature
/// prototypes, each frame perturbs them, and a region's feature blends its
/// best ground truth's appearance with background clutter by overlap.
struct ToyWorldConfig {
  int identities = 8;
  int objects_per_frame = 6;
  int feature_dim = 32;
  int embed_dim = 16;
  double appearance_noise = 0.35;  // per-frame, per-object feature jitter
  // Identity-independent nuisance (pose, lighting) living in a fixed random
  // subspace; a head has to learn to project it out.
  int nuisance_rank = 8;
  double nuisance_scale = 1.5;
  double region_noise = 0.1;
  int regions_per_object = 24;
  int background_regions = 48;
  double image_width = 640.0;
  double image_height = 480.0;
  SamplerConfig sampler{};
  double pos_iou = 0.7;
  double neg_iou = 0.3;
};

class ToyWorld {
 public:
  ToyWorld(const ToyWorldConfig& cfg, std::uint64_t seed);

  const ToyWorldConfig& config() const { return cfg_; }
  const Eigen::MatrixXd& prototypes() const { return prototypes_; }

  TrainingPair draw(std::mt19937_64& rng) const;
  BatchStream stream() const;

  /// Object-level feature for one sighting of `identity`: prototype plus
  /// appearance and region noise. A negative identity yields pure clutter.
  Eigen::VectorXd observe(int identity, std::mt19937_64& rng) const;

  /// Fraction of key-frame objects whose nearest reference-frame object
  /// (by embedding dot product) has the same identity, over `pairs` fresh
  /// frame pairs drawn from `seed`.
  double nn_identity_accuracy(const EmbeddingHead& head, int pairs, std::uint64_t seed) const;

 private:
  struct Frame {
    std::vector<GroundTruthBox> objects;
    Eigen::MatrixXd appearance;  // one row per object
  };
  Frame draw_frame(std::mt19937_64& rng) const;
  Eigen::VectorXd appearance(int identity, std::mt19937_64& rng) const;
  Eigen::MatrixXd region_features(const Frame& frame, std::span<const BoundingBox> regions,
                                  std::mt19937_64& rng) const;

  ToyWorldConfig cfg_;
  Eigen::MatrixXd prototypes_;  // identities x feature_dim
  Eigen::MatrixXd nuisance_;    // feature_dim x nuisance_rank, orthonormal columns
};

/// Random batch with random labels and embeddings, for gradient checks.
struct RandomBatch {
  SampleBatch batch;
  Eigen::MatrixXd key_emb;
  Eigen::MatrixXd ref_emb;
};
RandomBatch make_random_batch(int key_size, int ref_size, int dim, std::mt19937_64& rng);

}  // namespace simtrack::contrastive
