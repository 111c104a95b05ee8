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

#include "simtrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace simtrack::synth {

namespace {

Eigen::VectorXd gaussian(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n(rng);
  return v;
}

Eigen::VectorXd random_unit(int dim, std::mt19937_64& rng) {
  for (;;) {
    Eigen::VectorXd v = gaussian(dim, rng);
    const double norm = v.norm();
    if (norm > 1e-12) return v / norm;
  }
}

struct Mover {
  double cx = 0, cy = 0, w = 0, h = 0, vx = 0, vy = 0;

  BoundingBox box() const { return BoundingBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2); }
};

void bounce(Mover& m, double width, double height) {
  const double lo_x = m.w / 2, hi_x = width - m.w / 2;
  const double lo_y = m.h / 2, hi_y = height - m.h / 2;
  if (m.cx < lo_x) {
    m.cx = 2 * lo_x - m.cx;
    m.vx = std::abs(m.vx);
  }
  if (m.cx > hi_x) {
    m.cx = 2 * hi_x - m.cx;
    m.vx = -std::abs(m.vx);
  }
  if (m.cy < lo_y) {
    m.cy = 2 * lo_y - m.cy;
    m.vy = std::abs(m.vy);
  }
  if (m.cy > hi_y) {
    m.cy = 2 * hi_y - m.cy;
    m.vy = -std::abs(m.vy);
  }
  m.cx = std::clamp(m.cx, lo_x, hi_x);
  m.cy = std::clamp(m.cy, lo_y, hi_y);
}

}  // namespace

void WorldConfig::validate() const {
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
  };
  rate(fn_rate, "fn_rate");
  rate(fp_rate, "fp_rate");
  rate(class_flip_rate, "class_flip_rate");
  rate(occlusion_rate, "occlusion_rate");
  rate(distractor_rate, "distractor_rate");
  if (identities < 1 || frames < 0 || classes < 1 || dim < 1)
    throw std::invalid_argument("world sizes must be positive");
  if (!(embed_noise >= 0.0) || !(box_jitter >= 0.0) || !(walk_sigma >= 0.0) || !(speed >= 0.0))
    throw std::invalid_argument("noise scales must be non-negative");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(min_box > 0.0) || max_box < min_box) throw std::invalid_argument("invalid box size range");
  if (max_box > std::min(image_width, image_height))
    throw std::invalid_argument("boxes do not fit the image");
  if (distractors < 0) throw std::invalid_argument("distractors must be >= 0");
  if (!(distractor_similarity >= -1.0 && distractor_similarity <= 1.0))
    throw std::invalid_argument("distractor_similarity must lie in [-1, 1]");
}

Eigen::MatrixXd place_prototypes(int count, int dim, double margin, std::mt19937_64& rng) {
  Eigen::MatrixXd p(count, dim);
  for (int i = 0; i < count; ++i) p.row(i) = random_unit(dim, rng).transpose();
  const double max_cos = 1.0 - margin;

  auto worst = [&]() {
    if (count < 2) return -1.0;
    Eigen::MatrixXd g = p * p.transpose();
    g.diagonal().setConstant(-2.0);
    return g.maxCoeff();
  };

  constexpr int kBudget = 2000;
  double step = 0.5 / count;
  for (int iter = 0; iter < kBudget && worst() > max_cos; ++iter) {
    Eigen::MatrixXd force = Eigen::MatrixXd::Zero(count, dim);
    for (int i = 0; i < count; ++i)
      for (int j = 0; j < count; ++j) {
        if (i == j) continue;
        const Eigen::RowVectorXd d = p.row(i) - p.row(j);
        const double r = std::max(d.norm(), 1e-9);
        force.row(i) += d / (r * r * r);
      }
    p += step * force;
    p.rowwise().normalize();
    if (iter % 200 == 199) step *= 0.5;
  }
  if (worst() > max_cos + 1e-12)
    throw std::invalid_argument("prototype margin " + std::to_string(margin) +
                                " is unattainable for " + std::to_string(count) +
                                " identities in dimension " + std::to_string(dim));
  return p;
}

Scenario generate(const WorldConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> box_size(cfg.min_box, cfg.max_box);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Scenario sc;
  sc.frame_count = cfg.frames;
  sc.dim = cfg.dim;
  sc.prototypes = place_prototypes(cfg.identities, cfg.dim, cfg.prototype_margin, rng);
  sc.detections.resize(static_cast<std::size_t>(cfg.frames));
  sc.truth.resize(static_cast<std::size_t>(cfg.frames));

  std::vector<Mover> movers(static_cast<std::size_t>(cfg.identities));
  const double lane_h = cfg.image_height / cfg.identities;
  for (int i = 0; i < cfg.identities; ++i) {
    Mover& m = movers[static_cast<std::size_t>(i)];
    m.w = box_size(rng);
    m.h = box_size(rng);
    if (cfg.lanes) m.h = std::min(m.h, 0.8 * lane_h);
    m.cx = m.w / 2 + unit(rng) * (cfg.image_width - m.w);
    m.cy = cfg.lanes ? (i + 0.5) * lane_h : m.h / 2 + unit(rng) * (cfg.image_height - m.h);
    const double heading = cfg.lanes ? (unit(rng) < 0.5 ? 0.0 : M_PI) : unit(rng) * 2.0 * M_PI;
    if (cfg.motion != Motion::fixed) {
      m.vx = cfg.speed * std::cos(heading);
      m.vy = cfg.lanes ? 0.0 : cfg.speed * std::sin(heading);
    }
  }

  struct Distractor {
    Embedding embedding;
    BoundingBox box;
    int class_id = 0;
  };
  std::vector<Distractor> distractors;
  for (int d = 0; d < cfg.distractors; ++d) {
    const int host = d % cfg.identities;
    const Eigen::VectorXd p = sc.prototypes.row(host).transpose();
    Eigen::VectorXd orth = gaussian(cfg.dim, rng);
    orth -= orth.dot(p) * p;
    if (orth.norm() < 1e-12) orth = Eigen::VectorXd::Unit(cfg.dim, 0);
    orth.normalize();
    const double s = cfg.distractor_similarity;
    Distractor dd;
    dd.embedding = (s * p + std::sqrt(std::max(0.0, 1.0 - s * s)) * orth) * cfg.temperature;
    const double w = box_size(rng), h = box_size(rng);
    dd.box = BoundingBox::from_xywh(unit(rng) * (cfg.image_width - w),
                                    unit(rng) * (cfg.image_height - h), w, h);
    dd.class_id = host % cfg.classes;
    distractors.push_back(std::move(dd));
  }

  std::vector<std::set<int>> occluded(static_cast<std::size_t>(cfg.identities));
  for (const auto& o : cfg.occlusions) {
    if (o.identity < 0 || o.identity >= cfg.identities) continue;
    for (int f = o.first_frame; f <= o.last_frame; ++f) occluded[static_cast<std::size_t>(o.identity)].insert(f);
  }

  auto embed_identity = [&](int identity) {
    Eigen::VectorXd e = sc.prototypes.row(identity).transpose();
    if (cfg.embed_noise > 0.0)
      e += gaussian(cfg.dim, rng) * (cfg.embed_noise / std::sqrt(static_cast<double>(cfg.dim)));
    return Embedding(e.normalized() * cfg.temperature);
  };

  const double noise_sigma = cfg.box_jitter;
  for (int f = 0; f < cfg.frames; ++f) {
    auto& dets = sc.detections[static_cast<std::size_t>(f)];
    auto& truth = sc.truth[static_cast<std::size_t>(f)];

    for (int i = 0; i < cfg.identities; ++i) {
      Mover& m = movers[static_cast<std::size_t>(i)];
      if (f > 0) {
        if (cfg.motion == Motion::random_walk) {
          m.vx += cfg.walk_sigma * gauss(rng);
          if (!cfg.lanes) m.vy += cfg.walk_sigma * gauss(rng);
        }
        m.cx += m.vx;
        m.cy += m.vy;
        bounce(m, cfg.image_width, cfg.image_height);
      }
      auto& occ = occluded[static_cast<std::size_t>(i)];
      if (cfg.occlusion_rate > 0.0 && !occ.contains(f) && unit(rng) < cfg.occlusion_rate)
        for (int k = 0; k < cfg.occlusion_length; ++k) occ.insert(f + k);

      const bool visible = !occ.contains(f);
      const int class_id = i % cfg.classes;
      sc.gt.add(f, {i + 1, class_id, m.box(), visible});
      if (!visible) continue;
      if (unit(rng) < cfg.fn_rate) continue;

      Detection d;
      const BoundingBox b = m.box();
      double x1 = b.x1() + noise_sigma * gauss(rng), x2 = b.x2() + noise_sigma * gauss(rng);
      double y1 = b.y1() + noise_sigma * gauss(rng), y2 = b.y2() + noise_sigma * gauss(rng);
      if (x2 < x1) std::swap(x1, x2);
      if (y2 < y1) std::swap(y1, y2);
      d.box = BoundingBox(x1, y1, x2, y2);
      d.class_id = class_id;
      if (cfg.classes > 1 && unit(rng) < cfg.class_flip_rate) {
        std::uniform_int_distribution<int> other(1, cfg.classes - 1);
        d.class_id = (class_id + other(rng)) % cfg.classes;
      }
      d.score = cfg.det_score_min + unit(rng) * (cfg.det_score_max - cfg.det_score_min);
      d.embedding = embed_identity(i);
      dets.push_back(std::move(d));
      truth.push_back(i);
    }

    for (int s = 0; s < cfg.identities; ++s) {
      if (!(unit(rng) < cfg.fp_rate)) continue;
      Detection d;
      const double w = box_size(rng), h = box_size(rng);
      d.box = BoundingBox::from_xywh(unit(rng) * (cfg.image_width - w),
                                     unit(rng) * (cfg.image_height - h), w, h);
      std::uniform_int_distribution<int> cls(0, cfg.classes - 1);
      d.class_id = cls(rng);
      d.score = cfg.fp_score_min + unit(rng) * (cfg.fp_score_max - cfg.fp_score_min);
      d.embedding = random_unit(cfg.dim, rng) * cfg.temperature;
      dets.push_back(std::move(d));
      truth.push_back(kFalsePositive);
    }

    for (const auto& dd : distractors) {
      if (!(unit(rng) < cfg.distractor_rate)) continue;
      Detection d;
      d.box = dd.box;
      d.class_id = dd.class_id;
      d.score = cfg.distractor_score_min +
                unit(rng) * (cfg.distractor_score_max - cfg.distractor_score_min);
      d.embedding = dd.embedding;
      dets.push_back(std::move(d));
      truth.push_back(kFalsePositive);
    }
  }
  return sc;
}

Scenario subsample(const Scenario& scenario, int keep_every) {
  if (keep_every < 1) throw std::invalid_argument("subsample: keep_every must be >= 1");
  Scenario out;
  out.dim = scenario.dim;
  out.prototypes = scenario.prototypes;
  for (int f = 0; f < scenario.frame_count; f += keep_every) {
    const int nf = f / keep_every;
    out.detections.push_back(scenario.detections[static_cast<std::size_t>(f)]);
    out.truth.push_back(scenario.truth[static_cast<std::size_t>(f)]);
    const auto it = scenario.gt.frames.find(f);
    if (it != scenario.gt.frames.end()) out.gt.frames[nf] = it->second;
  }
  out.frame_count = static_cast<int>(out.detections.size());
  return out;
}

Scenario reembed(const Scenario& scenario, const EmbeddingSource& embed, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Scenario out = scenario;
  for (std::size_t f = 0; f < out.detections.size(); ++f)
    for (std::size_t k = 0; k < out.detections[f].size(); ++k)
      out.detections[f][k].embedding = embed(out.truth[f][k], rng);
  if (!out.detections.empty()) {
    for (const auto& frame : out.detections)
      if (!frame.empty()) {
        out.dim = static_cast<int>(frame.front().embedding.size());
        break;
      }
  }
  return out;
}

metrics::TrackSet iou_baseline_track(const Scenario& scenario, double iou_match_threshold) {
  struct Live {
    int id;
    int class_id;
    BoundingBox box;
  };
  metrics::TrackSet out;
  std::vector<Live> previous;
  int next_id = 1;
  for (int f = 0; f < scenario.frame_count; ++f) {
    const auto& dets = scenario.detections[static_cast<std::size_t>(f)];
    std::vector<std::size_t> order(dets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    std::vector<char> claimed(previous.size(), 0);
    std::vector<Live> current;
    for (std::size_t i : order) {
      const Detection& d = dets[i];
      int best = -1;
      double best_iou = iou_match_threshold;
      for (std::size_t t = 0; t < previous.size(); ++t) {
        if (claimed[t] || previous[t].class_id != d.class_id) continue;
        const double o = iou(previous[t].box, d.box);
        if (o > best_iou) {
          best_iou = o;
          best = static_cast<int>(t);
        }
      }
      int id;
      if (best >= 0) {
        claimed[static_cast<std::size_t>(best)] = 1;
        id = previous[static_cast<std::size_t>(best)].id;
      } else {
        id = next_id++;
      }
      current.push_back({id, d.class_id, d.box});
      out.add(f, {id, d.class_id, d.box, true});
    }
    previous = std::move(current);
  }
  return out;
}

metrics::TrackSet tracking_oracle(const Scenario& scenario) {
  metrics::TrackSet out;
  int next_fp_id = static_cast<int>(scenario.prototypes.rows()) + 1;
  for (int f = 0; f < scenario.frame_count; ++f) {
    const auto& dets = scenario.detections[static_cast<std::size_t>(f)];
    const auto& truth = scenario.truth[static_cast<std::size_t>(f)];
    std::set<int> used;
    for (std::size_t k = 0; k < dets.size(); ++k) {
      int id = truth[k] == kFalsePositive ? next_fp_id++ : truth[k] + 1;
      if (!used.insert(id).second) id = next_fp_id++;
      out.add(f, {id, dets[k].class_id, dets[k].box, true});
    }
  }
  return out;
}

Scenario detection_oracle(const Scenario& scenario, double temperature) {
  Scenario out;
  out.frame_count = scenario.frame_count;
  out.dim = scenario.dim;
  out.prototypes = scenario.prototypes;
  out.gt = scenario.gt;
  out.detections.resize(static_cast<std::size_t>(scenario.frame_count));
  out.truth.resize(static_cast<std::size_t>(scenario.frame_count));
  for (const auto& [f, objs] : scenario.gt.frames) {
    if (f < 0 || f >= scenario.frame_count) continue;
    for (const auto& o : objs) {
      if (!o.visible) continue;
      Detection d;
      d.box = o.box;
      d.class_id = o.class_id;
      d.score = 1.0;
      d.embedding = scenario.prototypes.row(o.id - 1).transpose() * temperature;
      out.detections[static_cast<std::size_t>(f)].push_back(std::move(d));
      out.truth[static_cast<std::size_t>(f)].push_back(o.id - 1);
    }
  }
  return out;
}

}  // namespace simtrack::synth
