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

#include <tpagt/core.hpp>

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace tpagt {

/// Rectangular Kuhn-Munkres (shortest augmenting paths with potentials).
/// Assigns every row of an M x K cost matrix (M <= K) to a distinct column
/// minimizing total cost. Returns the column of each row. Columns are scanned
/// in increasing order with strict comparisons, so ties go to the lowest index.
inline std::vector<Eigen::Index> hungarian_min(const Matrix& cost) {
  const Eigen::Index rows = cost.rows();
  const Eigen::Index cols = cost.cols();
  if (rows > cols) throw Error(ErrorCode::TooManyRows, "more rows than columns");
  if (!cost.allFinite()) throw Error(ErrorCode::InvalidArgument, "cost matrix must be finite");
  if (rows == 0) return {};

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual source.
  std::vector<double> u(static_cast<std::size_t>(rows + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(cols + 1), 0.0);
  std::vector<Eigen::Index> owner(static_cast<std::size_t>(cols + 1), 0);  // row matched to column
  std::vector<Eigen::Index> way(static_cast<std::size_t>(cols + 1), 0);

  for (Eigen::Index r = 1; r <= rows; ++r) {
    owner[0] = r;
    Eigen::Index col0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(cols + 1), kInf);
    std::vector<char> used(static_cast<std::size_t>(cols + 1), 0);
    do {
      used[static_cast<std::size_t>(col0)] = 1;
      const Eigen::Index r0 = owner[static_cast<std::size_t>(col0)];
      double delta = kInf;
      Eigen::Index col1 = 0;
      for (Eigen::Index c = 1; c <= cols; ++c) {
        const auto cs = static_cast<std::size_t>(c);
        if (used[cs]) continue;
        const double cur = cost(r0 - 1, c - 1) - u[static_cast<std::size_t>(r0)] - v[cs];
        if (cur < minv[cs]) {
          minv[cs] = cur;
          way[cs] = col0;
        }
        if (minv[cs] < delta) {
          delta = minv[cs];
          col1 = c;
        }
      }
      for (Eigen::Index c = 0; c <= cols; ++c) {
        const auto cs = static_cast<std::size_t>(c);
        if (used[cs]) {
          u[static_cast<std::size_t>(owner[cs])] += delta;
          v[cs] -= delta;
        } else {
          minv[cs] -= delta;
        }
      }
      col0 = col1;
    } while (owner[static_cast<std::size_t>(col0)] != 0);
    do {
      const Eigen::Index col1 = way[static_cast<std::size_t>(col0)];
      owner[static_cast<std::size_t>(col0)] = owner[static_cast<std::size_t>(col1)];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<Eigen::Index> assignment(static_cast<std::size_t>(rows), -1);
  for (Eigen::Index c = 1; c <= cols; ++c) {
    const Eigen::Index r = owner[static_cast<std::size_t>(c)];
    if (r != 0) assignment[static_cast<std::size_t>(r - 1)] = c - 1;
  }
  return assignment;
}

/// Maximum-total assignment of every row to a distinct column, as (row, col)
/// pairs in row order. Solved as minimization of (max - value).
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> hungarian_max(const Matrix& value) {
  if (value.rows() > value.cols()) throw Error(ErrorCode::TooManyRows, "more rows than columns");
  if (value.size() == 0) return {};
  if (!value.allFinite()) throw Error(ErrorCode::InvalidArgument, "matrix must be finite");
  const Matrix cost = value.maxCoeff() - value.array();
  const auto cols = hungarian_min(cost);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  out.reserve(cols.size());
  for (std::size_t r = 0; r < cols.size(); ++r) out.emplace_back(static_cast<Eigen::Index>(r), cols[r]);
  return out;
}

inline double assignment_total(const Matrix& value,
                               std::span<const std::pair<Eigen::Index, Eigen::Index>> pairs) {
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += value(r, c);
  return total;
}

struct DetectionOutcome {
  bool matched = false;
  Eigen::Index tracklet = -1;  // column index into S_out when matched
  std::uint64_t id = 0;        // reused tracklet id, or the freshly assigned one
};

struct AssignmentResult {
  std::vector<DetectionOutcome> detections;
  std::vector<bool> tracklet_matched;
  std::uint64_t next_id = 1;  // first id not yet handed out
};

/// [S_out | margin * 1_{MxM}] augmented matrix.
inline Matrix augment(const Matrix& s_out, double margin) {
  Matrix aug(s_out.rows(), s_out.cols() + s_out.rows());
  aug.leftCols(s_out.cols()) = s_out;
  aug.rightCols(s_out.rows()).setConstant(margin);
  return aug;
}

/// Detections landing on a real tracklet column inherit its id; those landing
/// on a margin column become new objects numbered next_id, next_id + 1, ... in
/// detection order.
inline AssignmentResult match(const Matrix& s_out, double margin, std::uint64_t next_id,
                              std::span<const std::uint64_t> tracklet_ids) {
  if (!(margin > 0.0 && margin < 1.0)) throw Error(ErrorCode::InvalidArgument, "margin must lie in (0,1)");
  if (static_cast<Eigen::Index>(tracklet_ids.size()) != s_out.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "one id per tracklet column required");
  }
  const Eigen::Index n = s_out.cols();
  AssignmentResult res;
  res.detections.resize(static_cast<std::size_t>(s_out.rows()));
  res.tracklet_matched.assign(static_cast<std::size_t>(n), false);
  res.next_id = next_id;
  if (s_out.rows() == 0) return res;

  for (const auto& [row, col] : hungarian_max(augment(s_out, margin))) {
    auto& out = res.detections[static_cast<std::size_t>(row)];
    if (col < n) {
      out.matched = true;
      out.tracklet = col;
      out.id = tracklet_ids[static_cast<std::size_t>(col)];
      res.tracklet_matched[static_cast<std::size_t>(col)] = true;
    }
  }
  for (auto& out : res.detections) {
    if (!out.matched) out.id = res.next_id++;
  }
  return res;
}

}  // namespace tpagt
