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

#include "simtrack/profile.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace simtrack {

using nlohmann::json;

namespace {

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("");
    } else {
      if (!v.is_string()) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + v.dump());
  }
}

template <typename Cfg>
using Setter = std::function<void(Cfg&, const json&, const std::string&)>;

template <typename Cfg>
void apply(const json& j, Cfg& cfg, const std::map<std::string, Setter<Cfg>>& setters,
           const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError(std::string("unknown ") + what + " key '" + key + "'");
    it->second(cfg, value, key);
  }
}

#define SIMTRACK_FIELD(Cfg, name, T) \
  {#name, [](Cfg& c, const json& v, const std::string& k) { c.name = get_as<T>(v, k); }}

MergeConfig parse_merge(const json& j) {
  static const std::map<std::string, Setter<MergeConfig>> setters = {
      SIMTRACK_FIELD(MergeConfig, window, int),
      SIMTRACK_FIELD(MergeConfig, threshold, double),
      SIMTRACK_FIELD(MergeConfig, max_distance, double),
  };
  MergeConfig m;
  apply(j, m, setters, "merge");
  return m;
}

}  // namespace

const std::vector<std::string>& builtin_profiles() {
  static const std::vector<std::string> names = {"mot17",   "mot20",  "dancetrack",
                                                 "bdd100k", "waymo", "tao"};
  return names;
}

json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

TrackerConfig parse_tracker_config(const json& j, TrackerConfig base) {
  using C = TrackerConfig;
  static const std::map<std::string, Setter<C>> setters = {
      SIMTRACK_FIELD(C, beta_obj, double),
      SIMTRACK_FIELD(C, beta_match, double),
      SIMTRACK_FIELD(C, beta_new, double),
      SIMTRACK_FIELD(C, memory_frames, int),
      {"backdrop_frames",
       [](C& c, const json& v, const std::string& k) {
         if (v.is_null()) c.backdrop_frames.reset();
         else c.backdrop_frames = get_as<int>(v, k);
       }},
      SIMTRACK_FIELD(C, momentum, double),
      SIMTRACK_FIELD(C, nms_threshold, double),
      SIMTRACK_FIELD(C, det_confidence, double),
      SIMTRACK_FIELD(C, same_class_only, bool),
      SIMTRACK_FIELD(C, duplicate_removal, bool),
      {"metric",
       [](C& c, const json& v, const std::string& k) {
         const auto s = get_as<std::string>(v, k);
         if (s == "bisoftmax") c.metric = SimilarityMetric::bisoftmax;
         else if (s == "cosine") c.metric = SimilarityMetric::cosine;
         else throw ConfigError("metric must be 'bisoftmax' or 'cosine', got '" + s + "'");
       }},
      {"distance_gate",
       [](C& c, const json& v, const std::string& k) {
         if (v.is_null()) c.distance_gate.reset();
         else c.distance_gate = get_as<double>(v, k);
       }},
      {"merge",
       [](C& c, const json& v, const std::string&) {
         if (v.is_null()) c.merge.reset();
         else c.merge = parse_merge(v);
       }},
      SIMTRACK_FIELD(C, interpolate, bool),
  };
  apply(j, base, setters, "tracker config");
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return base;
}

json to_json(const TrackerConfig& c) {
  json j = {{"beta_obj", c.beta_obj},
            {"beta_match", c.beta_match},
            {"beta_new", c.beta_new},
            {"memory_frames", c.memory_frames},
            {"backdrop_frames", c.backdrop_frames ? json(*c.backdrop_frames) : json(nullptr)},
            {"momentum", c.momentum},
            {"nms_threshold", c.nms_threshold},
            {"det_confidence", c.det_confidence},
            {"same_class_only", c.same_class_only},
            {"duplicate_removal", c.duplicate_removal},
            {"metric", c.metric == SimilarityMetric::bisoftmax ? "bisoftmax" : "cosine"},
            {"distance_gate", c.distance_gate ? json(*c.distance_gate) : json(nullptr)},
            {"interpolate", c.interpolate}};
  if (c.merge)
    j["merge"] = {{"window", c.merge->window},
                  {"threshold", c.merge->threshold},
                  {"max_distance", c.merge->max_distance}};
  else
    j["merge"] = nullptr;
  return j;
}

TrackerConfig load_profile(const std::string& name_or_path, const std::string& profile_dir) {
  namespace fs = std::filesystem;
  fs::path path;
  const auto& names = builtin_profiles();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end())
    path = fs::path(profile_dir) / (name_or_path + ".json");
  else if (name_or_path.find('/') != std::string::npos || name_or_path.ends_with(".json"))
    path = name_or_path;
  else
    throw ConfigError("unknown profile '" + name_or_path + "'");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read profile '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tracker_config(parse_json_text(ss.str(), path.string()));
}

synth::WorldConfig parse_world_config(const json& j, synth::WorldConfig base) {
  using W = synth::WorldConfig;
  static const std::map<std::string, Setter<W>> setters = {
      SIMTRACK_FIELD(W, identities, int),
      SIMTRACK_FIELD(W, frames, int),
      SIMTRACK_FIELD(W, classes, int),
      SIMTRACK_FIELD(W, image_width, double),
      SIMTRACK_FIELD(W, image_height, double),
      {"motion",
       [](W& c, const json& v, const std::string& k) {
         const auto s = get_as<std::string>(v, k);
         if (s == "fixed") c.motion = synth::Motion::fixed;
         else if (s == "linear") c.motion = synth::Motion::linear;
         else if (s == "random_walk") c.motion = synth::Motion::random_walk;
         else throw ConfigError("motion must be fixed, linear or random_walk, got '" + s + "'");
       }},
      SIMTRACK_FIELD(W, speed, double),
      SIMTRACK_FIELD(W, walk_sigma, double),
      SIMTRACK_FIELD(W, lanes, bool),
      SIMTRACK_FIELD(W, min_box, double),
      SIMTRACK_FIELD(W, max_box, double),
      SIMTRACK_FIELD(W, dim, int),
      SIMTRACK_FIELD(W, prototype_margin, double),
      SIMTRACK_FIELD(W, embed_noise, double),
      SIMTRACK_FIELD(W, temperature, double),
      SIMTRACK_FIELD(W, fn_rate, double),
      SIMTRACK_FIELD(W, fp_rate, double),
      SIMTRACK_FIELD(W, box_jitter, double),
      SIMTRACK_FIELD(W, class_flip_rate, double),
      SIMTRACK_FIELD(W, det_score_min, double),
      SIMTRACK_FIELD(W, det_score_max, double),
      SIMTRACK_FIELD(W, fp_score_min, double),
      SIMTRACK_FIELD(W, fp_score_max, double),
      {"occlusions",
       [](W& c, const json& v, const std::string& k) {
         if (!v.is_array()) throw ConfigError("'" + k + "' must be an array");
         c.occlusions.clear();
         for (const auto& o : v) {
           if (!o.is_array() || o.size() != 3)
             throw ConfigError("each occlusion is [identity, first_frame, last_frame]");
           c.occlusions.push_back(
               {get_as<int>(o[0], k), get_as<int>(o[1], k), get_as<int>(o[2], k)});
         }
       }},
      SIMTRACK_FIELD(W, occlusion_rate, double),
      SIMTRACK_FIELD(W, occlusion_length, int),
      SIMTRACK_FIELD(W, distractors, int),
      SIMTRACK_FIELD(W, distractor_similarity, double),
      SIMTRACK_FIELD(W, distractor_rate, double),
      SIMTRACK_FIELD(W, distractor_score_min, double),
      SIMTRACK_FIELD(W, distractor_score_max, double),
      SIMTRACK_FIELD(W, seed, std::uint64_t),
  };
  apply(j, base, setters, "world config");
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return base;
}

json to_json(const synth::WorldConfig& c) {
  const char* motion = c.motion == synth::Motion::fixed    ? "fixed"
                       : c.motion == synth::Motion::linear ? "linear"
                                                           : "random_walk";
  json occ = json::array();
  for (const auto& o : c.occlusions) occ.push_back({o.identity, o.first_frame, o.last_frame});
  return {{"identities", c.identities},
          {"frames", c.frames},
          {"classes", c.classes},
          {"image_width", c.image_width},
          {"image_height", c.image_height},
          {"motion", motion},
          {"speed", c.speed},
          {"walk_sigma", c.walk_sigma},
          {"lanes", c.lanes},
          {"min_box", c.min_box},
          {"max_box", c.max_box},
          {"dim", c.dim},
          {"prototype_margin", c.prototype_margin},
          {"embed_noise", c.embed_noise},
          {"temperature", c.temperature},
          {"fn_rate", c.fn_rate},
          {"fp_rate", c.fp_rate},
          {"box_jitter", c.box_jitter},
          {"class_flip_rate", c.class_flip_rate},
          {"det_score_min", c.det_score_min},
          {"det_score_max", c.det_score_max},
          {"fp_score_min", c.fp_score_min},
          {"fp_score_max", c.fp_score_max},
          {"occlusions", occ},
          {"occlusion_rate", c.occlusion_rate},
          {"occlusion_length", c.occlusion_length},
          {"distractors", c.distractors},
          {"distractor_similarity", c.distractor_similarity},
          {"distractor_rate", c.distractor_rate},
          {"distractor_score_min", c.distractor_score_min},
          {"distractor_score_max", c.distractor_score_max},
          {"seed", c.seed}};
}

}  // namespace simtrack
