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

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace tpagt {

enum class ErrorCode {
  InvalidArgument,
  TooSmall,
  OutOfBounds,
  EmptyMap,
  ShapeMismatch,
  StaleCache,
  EpochOutOfRange,
  EmptyBatch,
  TooManyRows,
  ZeroGroundTruth,
  InputLengthMismatch,
  ParseError,
  NonPositiveBox,
  IoError,
  ScenarioInfeasible,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::EmptyMap: return "EmptyMap";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::EpochOutOfRange: return "EpochOutOfRange";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::TooManyRows: return "TooManyRows";
    case ErrorCode::ZeroGroundTruth: return "ZeroGroundTruth";
    case ErrorCode::InputLengthMismatch: return "InputLengthMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonPositiveBox: return "NonPositiveBox";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ScenarioInfeasible: return "ScenarioInfeasible";
  }
  return "Unknown";
}

// Every failure in the library surfaces as this exception; code() tells the
// caller which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Row-per-object embedding block (M x D for detections, N x D for tracklets).
using FeatureMatrix = Matrix;
using FeatureVector = Vector;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box in MOT Challenge convention (left, top, width, height).
struct BBox {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;

  double right() const { return left + width; }
  double bottom() const { return top + height; }
  double area() const { return width * height; }

  bool valid() const {
    return std::isfinite(left) && std::isfinite(top) && std::isfinite(width) &&
           std::isfinite(height) && width > 0.0 && height > 0.0;
  }

  BBox translated(double dx, double dy) const { return {left + dx, top + dy, width, height}; }

  bool operator==(const BBox&) const = default;
};

inline BBox checked_box(double left, double top, double width, double height) {
  BBox b{left, top, width, height};
  if (!b.valid()) {
    throw Error(ErrorCode::NonPositiveBox, "box must have finite coordinates and positive size");
  }
  return b;
}

inline Point2 center(const BBox& b) { return {b.left + b.width / 2.0, b.top + b.height / 2.0}; }

/// Intersection over union. Symmetric, exactly 1 for identical boxes.
inline double iou(const BBox& a, const BBox& b) {
  if (a == b) return 1.0;
  const double iw = std::min(a.right(), b.right()) - std::max(a.left, b.left);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top, b.top);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

template <typename BoxesA, typename BoxesB>
Matrix iou_matrix(const BoxesA& rows, const BoxesB& cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = iou(rows[i], cols[j]);
    }
  }
  return out;
}

struct Detection {
  BBox bbox;
  double confidence = 1.0;
  std::uint64_t frame = 0;
};

struct Active {};
struct Lost {
  int frames = 1;  // consecutive unmatched frames, 1..k
};
struct Dead {};
using TrackletState = std::variant<Active, Lost, Dead>;

struct Tracklet {
  std::uint64_t id = 0;
  std::deque<std::pair<std::uint64_t, BBox>> history;  // strictly increasing frames
  FeatureVector last_feature;
  std::uint64_t last_seen = 0;
  TrackletState state = Active{};

  const BBox& last_box() const { return history.back().second; }
  bool alive() const { return !std::holds_alternative<Dead>(state); }
  int missed_frames() const {
    if (const auto* lost = std::get_if<Lost>(&state)) return lost->frames;
    return 0;
  }
};

}  // namespace tpagt
