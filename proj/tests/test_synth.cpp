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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "simtrack/synth.hpp"

#include <cmath>
#include <set>

using namespace simtrack;
using namespace simtrack::synth;

namespace {

bool same(const Scenario& a, const Scenario& b) {
  if (a.frame_count != b.frame_count || a.detections.size() != b.detections.size()) return false;
  for (std::size_t f = 0; f < a.detections.size(); ++f) {
    if (a.detections[f].size() != b.detections[f].size() || a.truth[f] != b.truth[f]) return false;
    for (std::size_t k = 0; k < a.detections[f].size(); ++k) {
      const auto& x = a.detections[f][k];
      const auto& y = b.detections[f][k];
      if (!(x.box == y.box) || x.score != y.score || x.class_id != y.class_id || x.embedding != y.embedding)
        return false;
    }
  }
  return a.prototypes == b.prototypes;
}

}  // namespace

TEST_CASE("world config validation") {
  WorldConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto mutate) {
    WorldConfig w;
    mutate(w);
    return w;
  };
  CHECK_THROWS_AS(bad([](WorldConfig& w) { w.fn_rate = 1.5; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](WorldConfig& w) { w.identities = 0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](WorldConfig& w) { w.temperature = 0.0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](WorldConfig& w) { w.min_box = 200.0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](WorldConfig& w) { w.box_jitter = -1.0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](WorldConfig& w) { w.distractor_similarity = 2.0; }).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate(bad([](WorldConfig& w) { w.frames = -3; })), std::invalid_argument);
}

TEST_CASE("prototypes are unit rows with the requested separation") {
  for (int dim : {8, 32, 128}) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(dim));
    const Eigen::MatrixXd p = place_prototypes(20, dim, 0.3, rng);
    CHECK(p.rows() == 20);
    for (int i = 0; i < 20; ++i) {
      CHECK(p.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
      for (int j = 0; j < i; ++j) CHECK(p.row(i).dot(p.row(j)) <= 0.7 + 1e-12);
    }
  }
}

TEST_CASE("an unattainable margin is reported") {
  std::mt19937_64 rng(1);
  // Three unit vectors in the plane reach a pairwise cosine of -0.5 at best.
  CHECK_THROWS_WITH_AS(place_prototypes(3, 2, 1.6, rng), doctest::Contains("unattainable"),
                       std::invalid_argument);
}

TEST_CASE("generation is deterministic per seed") {
  WorldConfig c;
  c.identities = 6;
  c.frames = 30;
  c.fp_rate = 0.2;
  c.fn_rate = 0.1;
  c.box_jitter = 2.0;
  c.embed_noise = 0.3;
  c.seed = 42;
  CHECK(same(generate(c), generate(c)));
  WorldConfig d = c;
  d.seed = 43;
  CHECK_FALSE(same(generate(c), generate(d)));
}

TEST_CASE("clean world: one detection per visible object with exact boxes") {
  WorldConfig c;
  c.identities = 5;
  c.frames = 40;
  c.classes = 2;
  c.seed = 3;
  const Scenario s = generate(c);
  CHECK(s.frame_count == 40);
  for (int f = 0; f < 40; ++f) {
    const auto& dets = s.detections[static_cast<std::size_t>(f)];
    const auto& gts = s.gt.frames.at(f);
    REQUIRE(dets.size() == gts.size());
    for (std::size_t k = 0; k < dets.size(); ++k) {
      const int id = s.truth[static_cast<std::size_t>(f)][k];
      const auto& g = gts[static_cast<std::size_t>(id)];
      CHECK(g.id == id + 1);
      CHECK(dets[k].box == g.box);
      CHECK(dets[k].class_id == id % 2);
      CHECK(dets[k].embedding.norm() == doctest::Approx(c.temperature));
      const double cosine = dets[k].embedding.normalized().dot(s.prototypes.row(id));
      CHECK(cosine == doctest::Approx(1.0));
      CHECK(g.box.x1() >= 0.0);
      CHECK(g.box.x2() <= c.image_width);
      CHECK(g.box.y1() >= 0.0);
      CHECK(g.box.y2() <= c.image_height);
    }
  }
}

TEST_CASE("linear motion moves at the configured speed") {
  WorldConfig c;
  c.identities = 1;
  c.frames = 3;
  c.speed = 5.0;
  c.image_width = 10000.0;
  c.image_height = 10000.0;
  c.seed = 11;
  const Scenario s = generate(c);
  const auto& a = s.gt.frames.at(0)[0].box;
  const auto& b = s.gt.frames.at(1)[0].box;
  CHECK(std::hypot(b.center_x() - a.center_x(), b.center_y() - a.center_y()) == doctest::Approx(5.0));
  c.motion = Motion::fixed;
  const Scenario still = generate(c);
  CHECK(still.gt.frames.at(0)[0].box == still.gt.frames.at(2)[0].box);
}

TEST_CASE("lanes never overlap") {
  WorldConfig c;
  c.identities = 8;
  c.frames = 50;
  c.lanes = true;
  c.speed = 40.0;
  c.seed = 5;
  const Scenario s = generate(c);
  for (const auto& [f, objs] : s.gt.frames)
    for (std::size_t i = 0; i < objs.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) CHECK(iou(objs[i].box, objs[j].box) == 0.0);
}

TEST_CASE("occlusions hide ground truth and suppress detections") {
  WorldConfig c;
  c.identities = 3;
  c.frames = 10;
  c.occlusions = {{1, 2, 4}};
  const Scenario s = generate(c);
  for (int f = 0; f < 10; ++f) {
    const bool hidden = f >= 2 && f <= 4;
    CHECK(s.gt.frames.at(f)[1].visible == !hidden);
    const auto& t = s.truth[static_cast<std::size_t>(f)];
    CHECK((std::find(t.begin(), t.end(), 1) == t.end()) == hidden);
  }
}

TEST_CASE("false positives and distractors are labeled as such") {
  WorldConfig c;
  c.identities = 4;
  c.frames = 20;
  c.fp_rate = 0.5;
  c.distractors = 2;
  c.seed = 9;
  const Scenario s = generate(c);
  int fps = 0, distractors = 0;
  for (std::size_t f = 0; f < s.detections.size(); ++f)
    for (std::size_t k = 0; k < s.detections[f].size(); ++k) {
      if (s.truth[f][k] != kFalsePositive) continue;
      const auto& d = s.detections[f][k];
      const Eigen::VectorXd u = d.embedding.normalized();
      const double host = u.dot(s.prototypes.row(0));
      const double host2 = u.dot(s.prototypes.row(1));
      if (std::abs(host - 0.8) < 1e-9 || std::abs(host2 - 0.8) < 1e-9) {
        ++distractors;
        CHECK(d.score >= c.distractor_score_min);
        CHECK(d.score <= c.distractor_score_max);
      } else {
        ++fps;
        CHECK(d.score >= c.fp_score_min);
        CHECK(d.score <= c.fp_score_max);
      }
    }
  CHECK(distractors == 2 * 20);
  CHECK(fps > 10);
}

TEST_CASE("subsampling keeps every k-th frame and renumbers") {
  WorldConfig c;
  c.identities = 3;
  c.frames = 10;
  const Scenario s = generate(c);
  const Scenario t = subsample(s, 3);
  CHECK(t.frame_count == 4);
  for (int nf = 0; nf < 4; ++nf) {
    CHECK(t.gt.frames.at(nf)[0].box == s.gt.frames.at(3 * nf)[0].box);
    CHECK(t.truth[static_cast<std::size_t>(nf)] == s.truth[static_cast<std::size_t>(3 * nf)]);
  }
  CHECK(same(subsample(s, 1), s));
  CHECK_THROWS_AS(subsample(s, 0), std::invalid_argument);
}

TEST_CASE("oracles score perfectly on a clean world") {
  WorldConfig c;
  c.identities = 6;
  c.frames = 30;
  c.seed = 21;
  const Scenario s = generate(c);
  const auto r = metrics::per_class_report(s.gt, tracking_oracle(s));
  CHECK(r.aggregate.clear.mota == 1.0);
  CHECK(r.aggregate.id.idf1 == 1.0);

  const Scenario d = detection_oracle(s, 10.0);
  for (std::size_t f = 0; f < d.detections.size(); ++f)
    for (std::size_t k = 0; k < d.detections[f].size(); ++k) {
      CHECK(d.detections[f][k].score == 1.0);
      CHECK(d.detections[f][k].embedding.norm() == doctest::Approx(10.0));
    }
  // Slow movers stay above the IoU threshold, so the location baseline is
  // also perfect here.
  const auto b = metrics::per_class_report(s.gt, iou_baseline_track(s, 0.3));
  CHECK(b.aggregate.id.idf1 == 1.0);
}

TEST_CASE("false positives get fresh ids in the tracking oracle") {
  WorldConfig c;
  c.identities = 2;
  c.frames = 5;
  c.fp_rate = 1.0;
  const Scenario s = generate(c);
  const auto t = tracking_oracle(s);
  std::set<int> fp_ids;
  for (const auto& [f, objs] : t.frames)
    for (const auto& o : objs)
      if (o.id > 2) CHECK(fp_ids.insert(o.id).second);
  CHECK(fp_ids.size() == 10);
}

TEST_CASE("reembed replaces embeddings from the truth labels") {
  WorldConfig c;
  c.identities = 3;
  c.frames = 4;
  const Scenario s = generate(c);
  const Scenario r = reembed(
      s, [](int id, std::mt19937_64&) { return Embedding(Eigen::VectorXd::Constant(5, id)); }, 0);
  CHECK(r.dim == 5);
  for (std::size_t f = 0; f < r.detections.size(); ++f)
    for (std::size_t k = 0; k < r.detections[f].size(); ++k)
      CHECK(r.detections[f][k].embedding(0) == s.truth[f][k]);
}
