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

#include "simtrack/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace simtrack::contrastive {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sum exp(values[idx])) over the listed indices, with sign applied.
double log_sum_exp(const Eigen::VectorXd& values, const std::vector<int>& idx, double sign) {
  double peak = -std::numeric_limits<double>::infinity();
  for (int j : idx) peak = std::max(peak, sign * values(j));
  double acc = 0.0;
  for (int j : idx) acc += std::exp(sign * values(j) - peak);
  return peak + std::log(acc);
}

std::vector<std::size_t> draw_frame(std::span<const RegionSample> samples, int total,
                                    const SamplerConfig& cfg, std::mt19937_64& rng) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].polarity == Polarity::positive) pos.push_back(i);
    if (samples[i].polarity == Polarity::negative) neg.push_back(i);
  }

  const int pos_target =
      static_cast<int>(std::lround(total * cfg.pos_neg_ratio / (1.0 + cfg.pos_neg_ratio)));
  std::shuffle(pos.begin(), pos.end(), rng);
  const std::size_t take_pos = std::min<std::size_t>(pos.size(), std::max(pos_target, 0));
  std::vector<std::size_t> chosen(pos.begin(), pos.begin() + static_cast<long>(take_pos));

  // IoU-balanced negatives: equal-width bins over [0, neg_iou), round-robin.
  const int bins = std::max(cfg.iou_bins, 1);
  std::vector<std::vector<std::size_t>> bucket(static_cast<std::size_t>(bins));
  for (std::size_t i : neg) {
    int b = cfg.neg_iou > 0.0
                ? static_cast<int>(std::floor(samples[i].max_iou / cfg.neg_iou * bins))
                : 0;
    b = std::clamp(b, 0, bins - 1);
    bucket[static_cast<std::size_t>(b)].push_back(i);
  }
  for (auto& b : bucket) std::shuffle(b.begin(), b.end(), rng);

  const std::size_t want = static_cast<std::size_t>(std::max(total, 0));
  std::vector<std::size_t> cursor(bucket.size(), 0);
  bool progressed = true;
  while (chosen.size() < want && progressed) {
    progressed = false;
    for (std::size_t b = 0; b < bucket.size() && chosen.size() < want; ++b) {
      if (cursor[b] < bucket[b].size()) {
        chosen.push_back(bucket[b][cursor[b]++]);
        progressed = true;
      }
    }
  }
  // Too few negatives: top up with the remaining positives.
  for (std::size_t k = take_pos; k < pos.size() && chosen.size() < want; ++k)
    chosen.push_back(pos[k]);

  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

void check_shapes(const SampleBatch& batch, const Eigen::MatrixXd& key_emb,
                  const Eigen::MatrixXd& ref_emb) {
  const auto v = static_cast<Eigen::Index>(batch.key.size());
  const auto k = static_cast<Eigen::Index>(batch.ref.size());
  if (key_emb.rows() != v || ref_emb.rows() != k || key_emb.cols() != ref_emb.cols() ||
      batch.positivity.rows() != v || batch.positivity.cols() != k) {
    throw std::invalid_argument("embedding matrices do not match the batch layout");
  }
}

// Embedding term and (optionally) its gradient accumulated with `weight`.
double embed_term(const SampleBatch& batch, const Eigen::MatrixXd& key_emb,
                  const Eigen::MatrixXd& ref_emb, LossVariant variant, double weight,
                  Eigen::MatrixXd* key_grad, Eigen::MatrixXd* ref_grad) {
  const Eigen::Index v = key_emb.rows();
  const Eigen::Index k = ref_emb.rows();
  double total = 0.0;
  int anchors = 0;
  std::vector<Eigen::VectorXd> dlogits;
  std::vector<Eigen::Index> anchor_rows;

  for (Eigen::Index i = 0; i < v; ++i) {
    std::vector<int> pos, neg;
    for (Eigen::Index j = 0; j < k; ++j)
      (batch.positivity(i, j) ? pos : neg).push_back(static_cast<int>(j));
    if (pos.empty()) continue;
    ++anchors;

    const Eigen::VectorXd logits = ref_emb * key_emb.row(i).transpose();
    Eigen::VectorXd ds = Eigen::VectorXd::Zero(k);
    if (neg.empty()) {
      anchor_rows.push_back(i);
      dlogits.push_back(ds);
      continue;
    }
    const double lse_neg = log_sum_exp(logits, neg, 1.0);

    if (variant == LossVariant::accumulated_multi) {
      const double a = lse_neg + log_sum_exp(logits, pos, -1.0);
      total += softplus(a);
      const double s = sigmoid(a);
      const double lse_pos = a - lse_neg;
      for (int j : neg) ds(j) = s * std::exp(logits(j) - lse_neg);
      for (int j : pos) ds(j) = -s * std::exp(-logits(j) - lse_pos);
    } else {
      const double scale =
          variant == LossVariant::single_positive ? 1.0 / static_cast<double>(pos.size()) : 1.0;
      for (int p : pos) {
        const double b = lse_neg - logits(p);
        total += scale * softplus(b);
        const double s = scale * sigmoid(b);
        ds(p) -= s;
        for (int j : neg) ds(j) += s * std::exp(logits(j) - lse_neg);
      }
    }
    anchor_rows.push_back(i);
    dlogits.push_back(std::move(ds));
  }

  if (anchors == 0) return 0.0;
  const double norm = 1.0 / anchors;
  if (key_grad != nullptr && ref_grad != nullptr && weight != 0.0) {
    for (std::size_t a = 0; a < anchor_rows.size(); ++a) {
      const Eigen::Index i = anchor_rows[a];
      const Eigen::VectorXd ds = dlogits[a] * (weight * norm);
      key_grad->row(i) += ds.transpose() * ref_emb;
      ref_grad->noalias() += ds * key_emb.row(i);
    }
  }
  return total * norm;
}

Eigen::MatrixXd cosine_of(const Eigen::MatrixXd& key_emb, const Eigen::MatrixXd& ref_emb,
                          Eigen::VectorXd& key_norm, Eigen::VectorXd& ref_norm) {
  key_norm = key_emb.rowwise().norm();
  ref_norm = ref_emb.rowwise().norm();
  for (Eigen::Index i = 0; i < key_norm.size(); ++i)
    if (!(key_norm(i) > 0.0))
      throw std::invalid_argument("zero-norm key embedding at index " + std::to_string(i));
  for (Eigen::Index j = 0; j < ref_norm.size(); ++j)
    if (!(ref_norm(j) > 0.0))
      throw std::invalid_argument("zero-norm reference embedding at index " + std::to_string(j));
  Eigen::MatrixXd cos = key_emb * ref_emb.transpose();
  cos.array().colwise() /= key_norm.array();
  cos.array().rowwise() /= ref_norm.transpose().array();
  return cos;
}

double aux_term(const Eigen::MatrixXd& key_emb, const Eigen::MatrixXd& ref_emb,
                const AuxPairs& pairs, double weight, Eigen::MatrixXd* key_grad,
                Eigen::MatrixXd* ref_grad) {
  if (pairs.positives.empty())
    throw std::invalid_argument("auxiliary loss needs at least one positive pair");
  Eigen::VectorXd kn, rn;
  const Eigen::MatrixXd cos = cosine_of(key_emb, ref_emb, kn, rn);
  const double count =
      static_cast<double>(pairs.positives.size() + pairs.negatives.size());

  double total = 0.0;
  auto visit = [&](const std::pair<int, int>& pr, double target) {
    const auto [i, j] = pr;
    const double c = cos(i, j);
    const double r = c - target;
    total += r * r;
    if (key_grad == nullptr || ref_grad == nullptr || weight == 0.0) return;
    const double g = weight * 2.0 * r / count;
    const auto v = key_emb.row(i);
    const auto k = ref_emb.row(j);
    key_grad->row(i) += g * (k / (kn(i) * rn(j)) - c * v / (kn(i) * kn(i)));
    ref_grad->row(j) += g * (v / (kn(i) * rn(j)) - c * k / (rn(j) * rn(j)));
  };
  for (const auto& pr : pairs.positives) visit(pr, 1.0);
  for (const auto& pr : pairs.negatives) visit(pr, 0.0);
  return total / count;
}

}  // namespace

std::vector<RegionSample> assign_samples(std::span<const BoundingBox> regions,
                                         std::span<const GroundTruthBox> gts, double pos_iou,
                                         double neg_iou) {
  if (neg_iou > pos_iou)
    throw std::invalid_argument("assign_samples: negative threshold exceeds positive threshold");
  std::vector<RegionSample> out;
  out.reserve(regions.size());
  for (const auto& region : regions) {
    RegionSample s;
    s.box = region;
    int best = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = iou(region, gts[g].box);
      if (best < 0 || o > s.max_iou) {
        best = static_cast<int>(g);
        s.max_iou = o;
      }
    }
    if (best >= 0 && s.max_iou > pos_iou) {
      s.polarity = Polarity::positive;
      s.identity = gts[static_cast<std::size_t>(best)].identity;
    } else if (s.max_iou < neg_iou) {
      s.polarity = Polarity::negative;
    } else {
      s.polarity = Polarity::ignored;
    }
    out.push_back(s);
  }
  return out;
}

PositivityMatrix positivity_of(std::span<const RegionSample> key,
                               std::span<const RegionSample> ref) {
  PositivityMatrix pos(static_cast<Eigen::Index>(key.size()),
                       static_cast<Eigen::Index>(ref.size()));
  for (std::size_t i = 0; i < key.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      pos(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          key[i].polarity == Polarity::positive && ref[j].polarity == Polarity::positive &&
          key[i].identity.has_value() && key[i].identity == ref[j].identity;
    }
  }
  return pos;
}

SampleBatch sample_batch(std::span<const RegionSample> key_samples,
                         std::span<const RegionSample> ref_samples, std::uint64_t seed,
                         const SamplerConfig& cfg) {
  auto has_positive = [](std::span<const RegionSample> s) {
    return std::any_of(s.begin(), s.end(),
                       [](const RegionSample& r) { return r.polarity == Polarity::positive; });
  };
  if (!has_positive(key_samples) || !has_positive(ref_samples))
    throw std::invalid_argument("batch has no positive pairs");

  std::mt19937_64 rng(seed);
  SampleBatch batch;
  batch.key_source = draw_frame(key_samples, cfg.key_size, cfg, rng);
  batch.ref_source = draw_frame(ref_samples, cfg.ref_size, cfg, rng);
  for (std::size_t i : batch.key_source) batch.key.push_back(key_samples[i]);
  for (std::size_t j : batch.ref_source) batch.ref.push_back(ref_samples[j]);
  batch.positivity = positivity_of(batch.key, batch.ref);
  if (batch.positive_pairs() == 0) throw std::invalid_argument("batch has no positive pairs");
  return batch;
}

double infonce_cross_entropy(double pos_logit, std::span<const double> neg_logits) {
  double peak = pos_logit;
  for (double n : neg_logits) peak = std::max(peak, n);
  double denom = std::exp(pos_logit - peak);
  for (double n : neg_logits) denom += std::exp(n - peak);
  const double log_prob = (pos_logit - peak) - std::log(denom);
  return -log_prob;
}

double infonce_log_sum(double pos_logit, std::span<const double> neg_logits) {
  if (neg_logits.empty()) return 0.0;
  double peak = -std::numeric_limits<double>::infinity();
  for (double n : neg_logits) peak = std::max(peak, n - pos_logit);
  double acc = 0.0;
  for (double n : neg_logits) acc += std::exp(n - pos_logit - peak);
  return softplus(peak + std::log(acc));
}

double loss_embed(const SampleBatch& batch, const Eigen::MatrixXd& key_emb,
                  const Eigen::MatrixXd& ref_emb, LossVariant variant) {
  check_shapes(batch, key_emb, ref_emb);
  return embed_term(batch, key_emb, ref_emb, variant, 0.0, nullptr, nullptr);
}

AuxPairs select_aux_pairs(const SampleBatch& batch, const Eigen::MatrixXd& key_emb,
                          const Eigen::MatrixXd& ref_emb, int neg_ratio) {
  check_shapes(batch, key_emb, ref_emb);
  Eigen::VectorXd kn, rn;
  const Eigen::MatrixXd cos = cosine_of(key_emb, ref_emb, kn, rn);

  AuxPairs pairs;
  std::vector<std::pair<int, int>> negatives;
  for (Eigen::Index i = 0; i < cos.rows(); ++i) {
    for (Eigen::Index j = 0; j < cos.cols(); ++j) {
      const std::pair<int, int> pr{static_cast<int>(i), static_cast<int>(j)};
      (batch.positivity(i, j) ? pairs.positives : negatives).push_back(pr);
    }
  }
  std::stable_sort(negatives.begin(), negatives.end(), [&](const auto& a, const auto& b) {
    return cos(a.first, a.second) > cos(b.first, b.second);
  });
  const std::size_t keep =
      std::min(negatives.size(), pairs.positives.size() * static_cast<std::size_t>(neg_ratio));
  pairs.negatives.assign(negatives.begin(), negatives.begin() + static_cast<long>(keep));
  return pairs;
}

double loss_aux(const SampleBatch& batch, const Eigen::MatrixXd& key_emb,
                const Eigen::MatrixXd& ref_emb, int neg_ratio) {
  const AuxPairs pairs = select_aux_pairs(batch, key_emb, ref_emb, neg_ratio);
  return aux_term(key_emb, ref_emb, pairs, 0.0, nullptr, nullptr);
}

LossResult loss_total(const SampleBatch& batch, const Eigen::MatrixXd& key_emb,
                      const Eigen::MatrixXd& ref_emb, const LossConfig& cfg,
                      const AuxPairs* frozen) {
  check_shapes(batch, key_emb, ref_emb);
  if (cfg.embed_weight < 0.0 || cfg.aux_weight < 0.0)
    throw std::invalid_argument("loss weights must be non-negative");
  LossResult r;
  r.key_grad = Eigen::MatrixXd::Zero(key_emb.rows(), key_emb.cols());
  r.ref_grad = Eigen::MatrixXd::Zero(ref_emb.rows(), ref_emb.cols());
  if (cfg.embed_weight != 0.0) {
    r.embed = embed_term(batch, key_emb, ref_emb, cfg.variant, cfg.embed_weight, &r.key_grad,
                         &r.ref_grad);
  }
  if (cfg.aux_weight != 0.0) {
    const AuxPairs pairs = frozen != nullptr
                               ? *frozen
                               : select_aux_pairs(batch, key_emb, ref_emb, cfg.aux_neg_ratio);
    r.aux = aux_term(key_emb, ref_emb, pairs, cfg.aux_weight, &r.key_grad, &r.ref_grad);
  }
  r.value = cfg.embed_weight * r.embed + cfg.aux_weight * r.aux;
  return r;
}

EmbeddingHead EmbeddingHead::random(int embed_dim, int feature_dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(feature_dim)));
  EmbeddingHead head;
  head.weight.resize(embed_dim, feature_dim);
  for (Eigen::Index r = 0; r < head.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < head.weight.cols(); ++c) head.weight(r, c) = gauss(rng);
  return head;
}

OptimizeResult optimize_embeddings(const BatchStream& stream, const LossConfig& cfg, int steps,
                                   double lr, std::uint64_t seed, EmbeddingHead init) {
  std::mt19937_64 rng(seed);
  OptimizeResult out;
  out.head = std::move(init);
  for (int step = 0; step < steps; ++step) {
    const TrainingPair pair = stream(rng);
    const Eigen::MatrixXd key_emb = out.head.embed(pair.key_features);
    const Eigen::MatrixXd ref_emb = out.head.embed(pair.ref_features);
    const LossResult r = loss_total(pair.batch, key_emb, ref_emb, cfg);
    if (!std::isfinite(r.value) || r.value > 1e9)
      throw DivergenceError(step, "embedding optimization diverged at step " + std::to_string(step));
    out.trace.push_back({step, r.value});
    const Eigen::MatrixXd dw =
        r.key_grad.transpose() * pair.key_features + r.ref_grad.transpose() * pair.ref_features;
    out.head.weight -= lr * dw;
    if (step + 1 == steps) {
      out.key_embeddings = out.head.embed(pair.key_features);
      out.ref_embeddings = out.head.embed(pair.ref_features);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// ToyWorld

namespace {

Eigen::VectorXd gaussian_vector(int dim, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, sigma);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = gauss(rng);
  return v;
}

BoundingBox jitter_box(const BoundingBox& b, double spread, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-spread, spread);
  const double w = b.width(), h = b.height();
  double x1 = b.x1() + u(rng) * w, x2 = b.x2() + u(rng) * w;
  double y1 = b.y1() + u(rng) * h, y2 = b.y2() + u(rng) * h;
  if (x2 < x1) std::swap(x1, x2);
  if (y2 < y1) std::swap(y1, y2);
  return BoundingBox(x1, y1, x2, y2);
}

}  // namespace

ToyWorld::ToyWorld(const ToyWorldConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.identities < 1 || cfg.objects_per_frame < 1 || cfg.feature_dim < 1 || cfg.embed_dim < 1)
    throw std::invalid_argument("ToyWorld: sizes must be positive");
  std::mt19937_64 rng(seed);
  prototypes_.resize(cfg.identities, cfg.feature_dim);
  for (int i = 0; i < cfg.identities; ++i)
    prototypes_.row(i) = gaussian_vector(cfg.feature_dim, 1.0, rng).normalized().transpose();
  const int rank = std::clamp(cfg.nuisance_rank, 0, cfg.feature_dim);
  Eigen::MatrixXd basis(cfg.feature_dim, rank);
  for (int c = 0; c < rank; ++c) basis.col(c) = gaussian_vector(cfg.feature_dim, 1.0, rng);
  nuisance_ = rank > 0 ? Eigen::MatrixXd(Eigen::HouseholderQR<Eigen::MatrixXd>(basis)
                                              .householderQ() *
                                          Eigen::MatrixXd::Identity(cfg.feature_dim, rank))
                       : Eigen::MatrixXd(cfg.feature_dim, 0);
}

Eigen::VectorXd ToyWorld::appearance(int identity, std::mt19937_64& rng) const {
  const double noise = cfg_.appearance_noise / std::sqrt(static_cast<double>(cfg_.feature_dim));
  Eigen::VectorXd x = prototypes_.row(identity).transpose();
  x += gaussian_vector(cfg_.feature_dim, noise, rng);
  if (nuisance_.cols() > 0) {
    const double scale = cfg_.nuisance_scale / std::sqrt(static_cast<double>(nuisance_.cols()));
    x += nuisance_ * gaussian_vector(static_cast<int>(nuisance_.cols()), scale, rng);
  }
  return x;
}

ToyWorld::Frame ToyWorld::draw_frame(std::mt19937_64& rng) const {
  std::vector<int> ids(static_cast<std::size_t>(cfg_.identities));
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(std::min(cfg_.objects_per_frame, cfg_.identities)));

  std::uniform_real_distribution<double> size(40.0, 120.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Frame f;
  f.appearance.resize(static_cast<Eigen::Index>(ids.size()), cfg_.feature_dim);
  for (std::size_t n = 0; n < ids.size(); ++n) {
    const double w = size(rng), h = size(rng);
    const double x = unit(rng) * (cfg_.image_width - w);
    const double y = unit(rng) * (cfg_.image_height - h);
    f.objects.push_back({BoundingBox::from_xywh(x, y, w, h), ids[n]});
    f.appearance.row(static_cast<Eigen::Index>(n)) = appearance(ids[n], rng).transpose();
  }
  return f;
}

Eigen::MatrixXd ToyWorld::region_features(const Frame& frame,
                                          std::span<const BoundingBox> regions,
                                          std::mt19937_64& rng) const {
  const double noise = cfg_.region_noise / std::sqrt(static_cast<double>(cfg_.feature_dim));
  const double clutter_sigma = 1.0 / std::sqrt(static_cast<double>(cfg_.feature_dim));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(regions.size()), cfg_.feature_dim);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    int best = -1;
    double q = 0.0;
    for (std::size_t g = 0; g < frame.objects.size(); ++g) {
      const double o = iou(regions[r], frame.objects[g].box);
      if (best < 0 || o > q) {
        best = static_cast<int>(g);
        q = o;
      }
    }
    Eigen::VectorXd feat = (1.0 - q) * gaussian_vector(cfg_.feature_dim, clutter_sigma, rng) +
                           gaussian_vector(cfg_.feature_dim, noise, rng);
    if (best >= 0 && q > 0.0) feat += q * frame.appearance.row(best).transpose();
    x.row(static_cast<Eigen::Index>(r)) = feat.transpose();
  }
  return x;
}

TrainingPair ToyWorld::draw(std::mt19937_64& rng) const {
  for (;;) {
    const Frame key = draw_frame(rng);
    // The reference frame shows mostly the same identities, displaced and
    // with fresh appearance noise; a few identities swap out.
    Frame ref = draw_frame(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> shift(0.0, 8.0);
    for (std::size_t n = 0; n < key.objects.size() && n < ref.objects.size(); ++n) {
      if (unit(rng) < 0.2) continue;
      const BoundingBox& b = key.objects[n].box;
      const double dx = std::clamp(shift(rng), -b.x1(), cfg_.image_width - b.x2());
      const double dy = std::clamp(shift(rng), -b.y1(), cfg_.image_height - b.y2());
      const int id = key.objects[n].identity;
      // Avoid duplicating an identity already drawn for the reference frame.
      bool taken = false;
      for (std::size_t m = 0; m < ref.objects.size(); ++m)
        if (m != n && ref.objects[m].identity == id) taken = true;
      if (taken) continue;
      ref.objects[n] = {BoundingBox(b.x1() + dx, b.y1() + dy, b.x2() + dx, b.y2() + dy), id};
      ref.appearance.row(static_cast<Eigen::Index>(n)) = appearance(id, rng).transpose();
    }

    auto regions_of = [&](const Frame& f) {
      std::vector<BoundingBox> regions;
      std::uniform_real_distribution<double> spread(0.0, 0.45);
      for (const auto& obj : f.objects)
        for (int r = 0; r < cfg_.regions_per_object; ++r)
          regions.push_back(jitter_box(obj.box, spread(rng), rng));
      std::uniform_real_distribution<double> size(20.0, 140.0);
      for (int r = 0; r < cfg_.background_regions; ++r) {
        const double w = size(rng), h = size(rng);
        regions.push_back(BoundingBox::from_xywh(unit(rng) * (cfg_.image_width - w),
                                                 unit(rng) * (cfg_.image_height - h), w, h));
      }
      return regions;
    };

    const auto key_regions = regions_of(key);
    const auto ref_regions = regions_of(ref);
    const auto key_samples = assign_samples(key_regions, key.objects, cfg_.pos_iou, cfg_.neg_iou);
    const auto ref_samples = assign_samples(ref_regions, ref.objects, cfg_.pos_iou, cfg_.neg_iou);
    const Eigen::MatrixXd key_all = region_features(key, key_regions, rng);
    const Eigen::MatrixXd ref_all = region_features(ref, ref_regions, rng);

    TrainingPair pair;
    try {
      pair.batch = sample_batch(key_samples, ref_samples, rng(), cfg_.sampler);
    } catch (const std::invalid_argument&) {
      continue;  // no shared identity in this draw
    }
    pair.key_features.resize(static_cast<Eigen::Index>(pair.batch.key.size()), cfg_.feature_dim);
    pair.ref_features.resize(static_cast<Eigen::Index>(pair.batch.ref.size()), cfg_.feature_dim);
    for (std::size_t i = 0; i < pair.batch.key_source.size(); ++i)
      pair.key_features.row(static_cast<Eigen::Index>(i)) =
          key_all.row(static_cast<Eigen::Index>(pair.batch.key_source[i]));
    for (std::size_t j = 0; j < pair.batch.ref_source.size(); ++j)
      pair.ref_features.row(static_cast<Eigen::Index>(j)) =
          ref_all.row(static_cast<Eigen::Index>(pair.batch.ref_source[j]));
    return pair;
  }
}

BatchStream ToyWorld::stream() const {
  return [this](std::mt19937_64& rng) { return draw(rng); };
}

Eigen::VectorXd ToyWorld::observe(int identity, std::mt19937_64& rng) const {
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.feature_dim));
  if (identity < 0) return gaussian_vector(cfg_.feature_dim, scale, rng);
  if (identity >= cfg_.identities) throw std::out_of_range("ToyWorld::observe: unknown identity");
  Eigen::VectorXd x = appearance(identity, rng);
  x += gaussian_vector(cfg_.feature_dim, cfg_.region_noise * scale, rng);
  return x;
}

double ToyWorld::nn_identity_accuracy(const EmbeddingHead& head, int pairs,
                                      std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  int correct = 0, total = 0;
  const double noise = cfg_.region_noise / std::sqrt(static_cast<double>(cfg_.feature_dim));
  for (int p = 0; p < pairs; ++p) {
    const Frame key = draw_frame(rng);
    const Frame ref = draw_frame(rng);
    auto features = [&](const Frame& f) {
      Eigen::MatrixXd x = f.appearance;
      for (Eigen::Index r = 0; r < x.rows(); ++r)
        x.row(r) += gaussian_vector(cfg_.feature_dim, noise, rng).transpose();
      return x;
    };
    const Eigen::MatrixXd ke = head.embed(features(key));
    const Eigen::MatrixXd re = head.embed(features(ref));
    const Eigen::MatrixXd dots = ke * re.transpose();
    for (std::size_t i = 0; i < key.objects.size(); ++i) {
      const int id = key.objects[i].identity;
      const bool present = std::any_of(ref.objects.begin(), ref.objects.end(),
                                       [id](const GroundTruthBox& g) { return g.identity == id; });
      if (!present) continue;
      Eigen::Index best = 0;
      dots.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
      ++total;
      if (ref.objects[static_cast<std::size_t>(best)].identity == id) ++correct;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

RandomBatch make_random_batch(int key_size, int ref_size, int dim, std::mt19937_64& rng) {
  if (key_size < 1 || ref_size < 1 || dim < 1)
    throw std::invalid_argument("make_random_batch: sizes must be positive");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> ident(0, 2);
  auto label = [&](RegionSample& s) {
    s.box = BoundingBox(0, 0, 1, 1);
    if (unit(rng) < 0.6) {
      s.polarity = Polarity::positive;
      s.identity = ident(rng);
      s.max_iou = 0.7 + 0.3 * unit(rng);
    } else {
      s.polarity = Polarity::negative;
      s.max_iou = 0.3 * unit(rng);
    }
  };
  RandomBatch rb;
  rb.batch.key.resize(static_cast<std::size_t>(key_size));
  rb.batch.ref.resize(static_cast<std::size_t>(ref_size));
  for (auto& s : rb.batch.key) label(s);
  for (auto& s : rb.batch.ref) label(s);
  // Guarantee a positive pair.
  for (auto* s : {&rb.batch.key.front(), &rb.batch.ref.front()}) {
    s->polarity = Polarity::positive;
    s->identity = 0;
    s->max_iou = 0.9;
  }
  rb.batch.key_source.resize(rb.batch.key.size());
  rb.batch.ref_source.resize(rb.batch.ref.size());
  std::iota(rb.batch.key_source.begin(), rb.batch.key_source.end(), std::size_t{0});
  std::iota(rb.batch.ref_source.begin(), rb.batch.ref_source.end(), std::size_t{0});
  rb.batch.positivity = positivity_of(rb.batch.key, rb.batch.ref);

  const double sigma = 1.5 / std::sqrt(static_cast<double>(dim));
  std::normal_distribution<double> gauss(0.0, sigma);
  rb.key_emb.resize(key_size, dim);
  rb.ref_emb.resize(ref_size, dim);
  for (Eigen::Index r = 0; r < rb.key_emb.rows(); ++r)
    for (Eigen::Index c = 0; c < dim; ++c) rb.key_emb(r, c) = gauss(rng);
  for (Eigen::Index r = 0; r < rb.ref_emb.rows(); ++r)
    for (Eigen::Index c = 0; c < dim; ++c) rb.ref_emb(r, c) = gauss(rng);
  return rb;
}

}  // namespace simtrack::contrastive
