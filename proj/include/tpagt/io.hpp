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

#include <tpagt/bytes.hpp>
#include <tpagt/core.hpp>
#include <tpagt/loss.hpp>
#include <tpagt/moteval.hpp>
#include <tpagt/tracker.hpp>
#include <tpagt/train.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace tpagt {

/// One line of a MOT Challenge text file.
struct MotRow {
  std::uint64_t frame = 1;
  std::int64_t id = -1;
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;
  double conf = 1.0;
  double x = -1.0;
  double y = -1.0;
  double z = -1.0;

  BBox bbox() const { return {left, top, width, height}; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view field, const std::string& where) {
  field = trim(field);
  T value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::ParseError, where + ": bad number '" + std::string(field) + "'");
  }
  return value;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, ptr};
}

inline std::string format_conf(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
  return {buf, ptr};
}

}  // namespace detail

/// Parses "frame,id,left,top,w,h,conf[,x,y,z]" lines. Blank lines are skipped;
/// every row must have frame >= 1 and a positive-size box.
inline std::vector<MotRow> parse_mot(std::string_view text, const std::string& source = "input") {
  std::vector<MotRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = detail::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;

    const std::string where = source + ":" + std::to_string(line_no);
    std::vector<std::string_view> f;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (f.size() < 7 || f.size() > 10) {
      throw Error(ErrorCode::ParseError, where + ": expected 7 to 10 fields, got " + std::to_string(f.size()));
    }
    MotRow r;
    const auto frame = detail::parse_number<std::int64_t>(f[0], where);
    if (frame < 1) throw Error(ErrorCode::ParseError, where + ": frame must be >= 1");
    r.frame = static_cast<std::uint64_t>(frame);
    r.id = static_cast<std::int64_t>(detail::parse_number<double>(f[1], where));
    r.left = detail::parse_number<double>(f[2], where);
    r.top = detail::parse_number<double>(f[3], where);
    r.width = detail::parse_number<double>(f[4], where);
    r.height = detail::parse_number<double>(f[5], where);
    r.conf = detail::parse_number<double>(f[6], where);
    if (f.size() > 7) r.x = detail::parse_number<double>(f[7], where);
    if (f.size() > 8) r.y = detail::parse_number<double>(f[8], where);
    if (f.size() > 9) r.z = detail::parse_number<double>(f[9], where);
    if (!r.bbox().valid()) {
      throw Error(ErrorCode::NonPositiveBox, where + ": box must have positive width and height");
    }
    rows.push_back(r);
  }
  return rows;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<MotRow> read_mot(const std::string& path) { return parse_mot(read_text(path), path); }

using DetectionsByFrame = std::map<std::uint64_t, std::vector<Detection>>;

/// Detections grouped by frame, in file order within a frame. Ids are ignored.
inline DetectionsByFrame group_detections(const std::vector<MotRow>& rows) {
  DetectionsByFrame out;
  for (const auto& r : rows) out[r.frame].push_back({r.bbox(), r.conf, r.frame});
  return out;
}

inline DetectionsByFrame parse_det(const std::string& path) { return group_detections(read_mot(path)); }

/// Ground truth as scoring boxes; rows with conf == 0 are flagged ignored
/// (the MOT "consider" column).
inline std::vector<TrackBox> to_gt_boxes(const std::vector<MotRow>& rows) {
  std::vector<TrackBox> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.frame, r.id, r.bbox(), r.conf == 0.0});
  return out;
}

inline std::vector<TrackBox> to_pred_boxes(const std::vector<MotRow>& rows) {
  std::vector<TrackBox> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.frame, r.id, r.bbox(), false});
  return out;
}

inline std::vector<MotRow> to_rows(const std::vector<TrackRow>& tracks) {
  std::vector<MotRow> rows;
  rows.reserve(tracks.size());
  for (const auto& t : tracks) {
    rows.push_back({t.frame, static_cast<std::int64_t>(t.id), t.bbox.left, t.bbox.top, t.bbox.width,
                    t.bbox.height, t.confidence});
  }
  return rows;
}

/// "frame,id,left,top,w,h,conf,-1,-1,-1" per row, sorted by (frame, id).
/// Coordinates use the shortest round-tripping decimal form, conf 6
/// significant digits.
inline std::string format_result(std::vector<MotRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const MotRow& a, const MotRow& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  std::string out;
  for (const auto& r : rows) {
    out += std::to_string(r.frame);
    out += ',';
    out += std::to_string(r.id);
    for (double v : {r.left, r.top, r.width, r.height}) {
      out += ',';
      out += detail::format_double(v);
    }
    out += ',';
    out += detail::format_conf(r.conf);
    out += ",-1,-1,-1\n";
  }
  return out;
}

inline void write_result(const std::vector<MotRow>& rows, const std::string& path) {
  write_file_atomic(path, format_result(rows));
}

// --- config -----------------------------------------------------------------

/// Settings shared by the CLI subcommands, loaded from `key = value` lines.
struct AppConfig {
  TrackerConfig tracker;
  LossWeights loss;
  LrSchedule schedule;
  int checkpoint_every = 100;
  std::uint32_t pool = 7;
  std::uint64_t seed = 0;
  double det_jitter = 1.0;
  double det_drop = 0.02;
};

namespace detail {

inline bool parse_bool(std::string_view v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::ParseError, where + ": expected a boolean, got '" + std::string(v) + "'");
}

}  // namespace detail

inline AppConfig parse_config(std::string_view text, const std::string& source = "config") {
  AppConfig c;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::ParseError, where + ": expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view val = detail::trim(line.substr(eq + 1));
    auto num = [&] { return detail::parse_number<double>(val, where); };
    auto integer = [&] { return detail::parse_number<std::int64_t>(val, where); };

    if (key == "margin") c.tracker.margin = num();
    else if (key == "k") c.tracker.k = static_cast<int>(integer());
    else if (key == "alpha") c.loss.alpha = num();
    else if (key == "beta") c.loss.beta = num();
    else if (key == "gamma") c.loss.gamma = num();
    else if (key == "delta") c.loss.delta = num();
    else if (key == "epsilon") c.loss.epsilon = num();
    else if (key == "window") c.tracker.flow.window = static_cast<int>(integer());
    else if (key == "levels") c.tracker.flow.levels = static_cast<int>(integer());
    else if (key == "flow_iters") c.tracker.flow.max_iters = static_cast<int>(integer());
    else if (key == "flow_eps") c.tracker.flow.eps = num();
    else if (key == "min_conf") c.tracker.min_conf = num();
    else if (key == "feature_dim") c.tracker.feature_dim = static_cast<std::uint32_t>(integer());
    else if (key == "realign_features") c.tracker.realign_features = detail::parse_bool(val, where);
    else if (key == "use_flow") c.tracker.use_flow = detail::parse_bool(val, where);
    else if (key == "checkpoint_every") c.checkpoint_every = static_cast<int>(integer());
    else if (key == "lr_max") c.schedule.lr_max = num();
    else if (key == "lr_min") c.schedule.lr_min = num();
    else if (key == "lr_period") c.schedule.period_epochs = static_cast<int>(integer());
    else if (key == "epochs") c.schedule.total_epochs = static_cast<int>(integer());
    else if (key == "pool") c.pool = static_cast<std::uint32_t>(integer());
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(integer());
    else if (key == "det_jitter") c.det_jitter = num();
    else if (key == "det_drop") c.det_drop = num();
    else throw Error(ErrorCode::ParseError, where + ": unknown key '" + key + "'");
  }
  c.tracker.validate();
  if (c.pool == 0 || c.tracker.feature_dim == 0) throw Error(ErrorCode::ParseError, source + ": pool and feature_dim must be positive");
  if (!c.schedule.valid()) throw Error(ErrorCode::ParseError, source + ": invalid learning-rate schedule");
  for (double w : {c.loss.alpha, c.loss.beta, c.loss.gamma, c.loss.delta, c.loss.epsilon}) {
    if (w < 0.0) throw Error(ErrorCode::ParseError, source + ": loss weights must be >= 0");
  }
  return c;
}

inline AppConfig read_config(const std::string& path) { return parse_config(read_text(path), path); }

}  // namespace tpagt
