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

// Tracker and synthetic-world configuration from JSON. Dataset profiles are
// plain JSON files under the profile directory; unknown keys are rejected.

#pragma once

#include "simtrack/synth.hpp"
#include "simtrack/tracker.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace simtrack {

/// Raised for unreadable or malformed configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Names of the profiles shipped with the library.
const std::vector<std::string>& builtin_profiles();

/// Applies the keys of `j` on top of `base`. Throws ConfigError on an unknown
/// key or a wrongly typed value, then validates the result.
TrackerConfig parse_tracker_config(const nlohmann::json& j, TrackerConfig base = {});
nlohmann::json to_json(const TrackerConfig& cfg);

/// Resolves `name_or_path` as a built-in profile name first, then as a path.
TrackerConfig load_profile(const std::string& name_or_path,
                           const std::string& profile_dir = SIMTRACK_PROFILE_DIR);

synth::WorldConfig parse_world_config(const nlohmann::json& j, synth::WorldConfig base = {});
nlohmann::json to_json(const synth::WorldConfig& cfg);

nlohmann::json parse_json_text(const std::string& text, const std::string& origin);

}  // namespace simtrack
