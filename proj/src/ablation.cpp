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

#include "simtrack/ablation.hpp"

#include "simtrack/profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace simtrack::ablation {

using nlohmann::json;

metrics::TrackSet to_track_set(const std::vector<TrackHistory>& histories) {
  metrics::TrackSet out;
  for (const auto& h : histories)
    for (const auto& e : h.entries) out.add(e.frame, {h.track_id, h.class_id, e.box, true});
  return out;
}

metrics::TrackSet run_tracker(const synth::Scenario& scenario, const TrackerConfig& cfg) {
  Tracker tracker(cfg);
  for (int f = 0; f < scenario.frame_count; ++f)
    tracker.step(f, scenario.detections[static_cast<std::size_t>(f)]);
  return to_track_set(finalize(tracker));
}

Scores score(const synth::Scenario& scenario, const metrics::TrackSet& pred) {
  const auto report = metrics::per_class_report(scenario.gt, pred);
  const auto& a = report.aggregate;
  return {a.clear.mota, a.id.idf1, a.hota.hota_mean, a.clear.idsw};
}

// --- sweeps --------------------------------------------------------------------

namespace {

std::size_t axis_index(const std::string& axis) {
  const auto it = std::find(kSweepAxes.begin(), kSweepAxes.end(), axis);
  return static_cast<std::size_t>(it - kSweepAxes.begin());
}

const std::map<std::string, std::vector<std::string>>& allowed_values() {
  static const std::map<std::string, std::vector<std::string>> v = {
      {"metric", {"cosine", "bisoftmax"}},
      {"loss", {"eq1", "eq2", "eq4"}},
      {"backdrops", {"on", "off"}},
      {"duplicate_removal", {"on", "off"}},
      {"baseline", {"appearance", "iou"}},
  };
  return v;
}

std::string value_text(const json& v, const std::string& axis) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "on" : "off";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ConfigError("sweep axis '" + axis + "' has an unsupported value " + v.dump());
}

contrastive::LossVariant loss_variant(const std::string& name) {
  if (name == "eq1") return contrastive::LossVariant::single_positive;
  if (name == "eq2") return contrastive::LossVariant::naive_multi;
  return contrastive::LossVariant::accumulated_multi;
}

}  // namespace

bool Sweep::has(const std::string& axis) const { return !values[axis_index(axis)].empty(); }

std::size_t Sweep::configurations() const {
  std::size_t n = 1;
  for (const auto& v : values)
    if (!v.empty()) n *= v.size();
  return n;
}

Sweep parse_sweep(const json& j) {
  if (!j.is_object()) throw ConfigError("sweep must be a JSON object");
  Sweep sweep;
  for (const auto& [key, value] : j.items()) {
    if (key == "seeds") {
      if (!value.is_array() || value.empty())
        throw ConfigError("sweep 'seeds' must be a non-empty array");
      for (const auto& s : value) {
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
          throw ConfigError("sweep seeds must be non-negative integers");
        sweep.seeds.push_back(s.get<std::uint64_t>());
      }
      continue;
    }
    const std::size_t idx = axis_index(key);
    if (idx == kSweepAxes.size()) throw ConfigError("unknown sweep key '" + key + "'");
    const json list = value.is_array() ? value : json::array({value});
    if (list.empty()) throw ConfigError("sweep axis '" + key + "' is empty");
    for (const auto& v : list) {
      std::string text = value_text(v, key);
      if (key == "subsample") {
        if (!v.is_number_integer() || v.get<long long>() < 1)
          throw ConfigError("subsample factors must be positive integers");
      } else {
        const auto& ok = allowed_values().at(key);
        if (std::find(ok.begin(), ok.end(), text) == ok.end())
          throw ConfigError("sweep axis '" + key + "' does not accept '" + text + "'");
      }
      sweep.values[idx].push_back(std::move(text));
    }
  }
  return sweep;
}

contrastive::EmbeddingHead train_head(const contrastive::ToyWorld& toy,
                                      contrastive::LossVariant variant, std::uint64_t seed,
                                      const Options& options) {
  contrastive::LossConfig loss;
  loss.variant = variant;
  std::mt19937_64 rng(seed);
  auto init = contrastive::EmbeddingHead::random(toy.config().embed_dim, toy.config().feature_dim,
                                                 rng);
  // Variants differ in gradient scale, so one rate does not suit all of them;
  // a diverging run restarts from the same initialization at half the rate.
  double lr = options.loss_learning_rate;
  for (int attempt = 0;; ++attempt) {
    try {
      return contrastive::optimize_embeddings(toy.stream(), loss, options.loss_train_steps, lr, seed, init)
          .head;
    } catch (const contrastive::DivergenceError&) {
      if (attempt >= options.max_lr_halvings) throw;
      lr *= 0.5;
    }
  }
}

synth::Scenario embed_with_head(const synth::Scenario& scenario, const contrastive::ToyWorld& toy,
                                const contrastive::EmbeddingHead& head, double temperature,
                                std::uint64_t seed) {
  return synth::reembed(
      scenario,
      [&](int identity, std::mt19937_64& rng) -> Embedding {
        const Eigen::VectorXd e = head.weight * toy.observe(identity, rng);
        const double n = e.norm();
        return n > 0.0 ? Embedding(temperature * e / n) : Embedding(e);
      },
      seed);
}

Table run_sweep(const synth::WorldConfig& world, const TrackerConfig& tracker, const Sweep& sweep,
                const Options& options) {
  if (sweep.seeds.empty()) throw ConfigError("sweep has no seeds");
  Table table;
  std::vector<std::size_t> axes;
  for (std::size_t a = 0; a < kSweepAxes.size(); ++a)
    if (!sweep.values[a].empty()) {
      axes.push_back(a);
      table.axes.push_back(kSweepAxes[a]);
    }

  // Odometer over the swept axes, first axis slowest.
  std::vector<std::size_t> at(axes.size(), 0);
  for (std::size_t c = 0; c < sweep.configurations(); ++c) {
    std::vector<std::string> setting(kSweepAxes.size());
    std::vector<std::string> shown;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      setting[axes[k]] = sweep.values[axes[k]][at[k]];
      shown.push_back(setting[axes[k]]);
    }
    auto get = [&](const char* axis) -> const std::string& { return setting[axis_index(axis)]; };

    TrackerConfig cfg = tracker;
    if (get("metric") == "cosine") cfg.metric = SimilarityMetric::cosine;
    if (get("metric") == "bisoftmax") cfg.metric = SimilarityMetric::bisoftmax;
    if (get("backdrops") == "on") cfg.backdrop_frames = tracker.backdrop_frames.value_or(1);
    if (get("backdrops") == "off") cfg.backdrop_frames.reset();
    if (get("duplicate_removal") == "on") cfg.duplicate_removal = true;
    if (get("duplicate_removal") == "off") cfg.duplicate_removal = false;

    for (std::uint64_t seed : sweep.seeds) {
      synth::WorldConfig wc = world;
      wc.seed = seed;
      synth::Scenario sc = synth::generate(wc);
      if (!get("subsample").empty()) sc = synth::subsample(sc, std::stoi(get("subsample")));
      if (!get("loss").empty()) {
        contrastive::ToyWorldConfig tc = options.toy;
        tc.identities = std::max(wc.identities, 1);
        const contrastive::ToyWorld toy(tc, seed);
        const auto head = train_head(toy, loss_variant(get("loss")), seed, options);
        sc = embed_with_head(sc, toy, head, wc.temperature, seed);
      }
      metrics::TrackSet pred = get("baseline") == "iou"
                                   ? synth::iou_baseline_track(sc, options.iou_baseline_threshold)
                                   : run_tracker(sc, cfg);
      table.rows.push_back({shown, seed, score(sc, pred)});
    }

    for (std::size_t k = axes.size(); k-- > 0;) {
      if (++at[k] < sweep.values[axes[k]].size()) break;
      at[k] = 0;
    }
  }
  return table;
}

std::string Table::to_csv() const {
  std::ostringstream os;
  for (const auto& a : axes) os << a << ',';
  os << "seed,MOTA,IDF1,HOTA,IDSW\n";
  char buf[128];
  for (const auto& r : rows) {
    for (const auto& s : r.settings) os << s << ',';
    std::snprintf(buf, sizeof buf, "%llu,%.6f,%.6f,%.6f,%ld",
                  static_cast<unsigned long long>(r.seed), r.scores.mota, r.scores.idf1,
                  r.scores.hota, r.scores.idsw);
    os << buf << '\n';
  }
  return os.str();
}

double Table::mean(const std::string& axis, const std::string& value,
                   double Scores::*field) const {
  const auto it = std::find(axes.begin(), axes.end(), axis);
  if (it == axes.end()) throw std::invalid_argument("axis '" + axis + "' was not swept");
  const auto k = static_cast<std::size_t>(it - axes.begin());
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (r.settings[k] == value) {
      sum += r.scores.*field;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("no rows with " + axis + "=" + value);
  return sum / n;
}

double Table::mean_idsw(const std::string& axis, const std::string& value) const {
  const auto it = std::find(axes.begin(), axes.end(), axis);
  if (it == axes.end()) throw std::invalid_argument("axis '" + axis + "' was not swept");
  const auto k = static_cast<std::size_t>(it - axes.begin());
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (r.settings[k] == value) {
      sum += static_cast<double>(r.scores.idsw);
      ++n;
    }
  if (n == 0) throw std::invalid_argument("no rows with " + axis + "=" + value);
  return sum / n;
}

// --- gradient check --------------------------------------------------------------

std::string GradcheckReport::to_text() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "gradcheck %s: %d batches, max relative error %.3e\n",
                passed ? "PASS" : "FAIL", batches, max_rel_error);
  return buf;
}

GradcheckReport gradcheck(const GradcheckConfig& cfg) {
  if (cfg.dims.empty() || cfg.seeds.empty() || cfg.variants.empty())
    throw std::invalid_argument("gradcheck: dims, seeds and variants must be non-empty");
  if (!(cfg.step > 0.0)) throw std::invalid_argument("gradcheck: step must be positive");
  GradcheckReport report;
  for (int dim : cfg.dims)
    for (std::uint64_t seed : cfg.seeds)
      for (auto variant : cfg.variants) {
        std::mt19937_64 rng(seed * 1000003u + static_cast<std::uint64_t>(dim));
        auto rb = contrastive::make_random_batch(cfg.key_size, cfg.ref_size, dim, rng);
        contrastive::LossConfig lc;
        lc.embed_weight = cfg.embed_weight;
        lc.aux_weight = cfg.aux_weight;
        lc.variant = variant;
        const auto frozen =
            contrastive::select_aux_pairs(rb.batch, rb.key_emb, rb.ref_emb, lc.aux_neg_ratio);
        auto analytic = contrastive::loss_total(rb.batch, rb.key_emb, rb.ref_emb, lc, &frozen);
        if (cfg.corrupt) analytic.key_grad(0, 0) += 1e-3;

        auto check = [&](Eigen::MatrixXd& param, const Eigen::MatrixXd& grad) {
          for (Eigen::Index r = 0; r < param.rows(); ++r)
            for (Eigen::Index c = 0; c < param.cols(); ++c) {
              const double saved = param(r, c);
              param(r, c) = saved + cfg.step;
              const double up =
                  contrastive::loss_total(rb.batch, rb.key_emb, rb.ref_emb, lc, &frozen).value;
              param(r, c) = saved - cfg.step;
              const double down =
                  contrastive::loss_total(rb.batch, rb.key_emb, rb.ref_emb, lc, &frozen).value;
              param(r, c) = saved;
              const double numeric = (up - down) / (2.0 * cfg.step);
              const double a = grad(r, c);
              const double err =
                  std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
              report.max_rel_error = std::max(report.max_rel_error, err);
            }
        };
        check(rb.key_emb, analytic.key_grad);
        check(rb.ref_emb, analytic.ref_grad);
        ++report.batches;
      }
  report.passed = report.max_rel_error < cfg.tolerance;
  return report;
}

}  // namespace simtrack::ablation
