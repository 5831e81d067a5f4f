// Copyright 2026 The tpagt Authors. All Rights Reserved.
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

#pragma once

// Scenario specs as JSON. Either an explicit object list:
//   {"width": 640, "height": 480, "frames": 30,
//    "objects": [{"box": [l, t, w, h], "velocity": [vx, vy], "texture_seed": 3,
//                 "occlusions": [[10, 12]]}]}
// or a random family drawn with the CLI seed:
//   {"random": {"objects": 4, "frames": 30, "occlusions": 1}}

#include <tpagt/synth.hpp>

#include <json.hpp>

#include <string>

namespace tpagt {

namespace detail {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline RandomScenarioOptions random_options(const nlohmann::json& j) {
  RandomScenarioOptions o;
  maybe(j, "objects", o.objects);
  maybe(j, "frames", o.frames);
  maybe(j, "width", o.width);
  maybe(j, "height", o.height);
  maybe(j, "min_speed", o.min_speed);
  maybe(j, "max_speed", o.max_speed);
  maybe(j, "min_w", o.min_w);
  maybe(j, "max_w", o.max_w);
  maybe(j, "min_h", o.min_h);
  maybe(j, "max_h", o.max_h);
  maybe(j, "occlusions", o.occlusions);
  maybe(j, "occlusion_length", o.occlusion_length);
  maybe(j, "late_entries", o.late_entries);
  maybe(j, "lighting_gradient", o.lighting_gradient);
  maybe(j, "det_jitter", o.det_jitter);
  maybe(j, "det_drop", o.det_drop);
  return o;
}

inline SynthObject object_from_json(const nlohmann::json& j) {
  SynthObject o;
  const auto box = j.at("box").get<std::vector<double>>();
  if (box.size() != 4) throw Error(ErrorCode::ParseError, "object box needs 4 numbers");
  o.start = {box[0], box[1], box[2], box[3]};
  if (j.contains("velocity")) {
    const auto v = j.at("velocity").get<std::vector<double>>();
    if (v.size() != 2) throw Error(ErrorCode::ParseError, "object velocity needs 2 numbers");
    o.vx = v[0];
    o.vy = v[1];
  }
  maybe(j, "texture_seed", o.texture_seed);
  maybe(j, "brightness", o.brightness);
  maybe(j, "first_frame", o.first_frame);
  maybe(j, "last_frame", o.last_frame);
  if (j.contains("occlusions")) {
    for (const auto& r : j.at("occlusions")) {
      const auto p = r.get<std::vector<int>>();
      if (p.size() != 2 || p[0] > p[1]) throw Error(ErrorCode::ParseError, "occlusion must be [first, last]");
      o.occlusions.emplace_back(p[0], p[1]);
    }
  }
  return o;
}

}  // namespace detail

/// Builds a scenario from JSON text. Random families use seed.
inline SynthScenario parse_scenario(const std::string& text, std::uint64_t seed) {
  try {
    const auto j = nlohmann::json::parse(text);
    SynthScenario s;
    if (j.contains("random")) {
      s = random_scenario(seed, detail::random_options(j.at("random")));
    } else {
      for (const auto& o : j.at("objects")) s.objects.push_back(detail::object_from_json(o));
    }
    detail::maybe(j, "width", s.width);
    detail::maybe(j, "height", s.height);
    detail::maybe(j, "frames", s.frames);
    detail::maybe(j, "background_amplitude", s.background_amplitude);
    detail::maybe(j, "object_contrast", s.object_contrast);
    detail::maybe(j, "lighting_gradient", s.lighting_gradient);
    detail::maybe(j, "det_jitter", s.det_jitter);
    detail::maybe(j, "det_drop", s.det_drop);
    detail::maybe(j, "min_detect_visibility", s.min_detect_visibility);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("scenario: ") + e.what());
  }
}

}  // namespace tpagt
