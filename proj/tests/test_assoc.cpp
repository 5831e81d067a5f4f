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

#include <tpagt/assoc.hpp>

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"

using namespace tpagt;
using oracle::code_of;
using Pairs = std::vector<std::pair<Eigen::Index, Eigen::Index>>;

namespace {

std::vector<std::uint64_t> ids_from(std::uint64_t first, Eigen::Index n) {
  std::vector<std::uint64_t> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), first);
  return ids;
}

// Rows 2 and 7 sit below 0.2 everywhere; row i of the rest peaks at column
// perm[i].
Matrix eight_by_ten(std::mt19937_64& rng) {
  Matrix s = oracle::random_matrix(rng, 8, 10, 0.0, 0.15);
  const int target[8] = {4, 0, -1, 9, 2, 7, 5, -1};
  for (int i = 0; i < 8; ++i) {
    if (target[i] >= 0) s(i, target[i]) = 0.6 + 0.04 * i;
  }
  return s;
}

}  // namespace

TEST(Hungarian, Identity) {
  const Matrix v = Matrix::Identity(2, 2);
  EXPECT_EQ(hungarian_max(v), (Pairs{{0, 0}, {1, 1}}));
}

TEST(Hungarian, AntiDiagonalWins) {
  Matrix v(2, 2);
  v << 0.9, 0.8, 0.85, 0.1;
  const auto p = hungarian_max(v);
  EXPECT_EQ(p, (Pairs{{0, 1}, {1, 0}}));
  EXPECT_NEAR(assignment_total(v, p), 1.65, 1e-15);
}

TEST(Hungarian, MatchesBruteForce) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 300; ++t) {
    const auto m = static_cast<Eigen::Index>(1 + rng() % 7);
    const auto k = m + static_cast<Eigen::Index>(rng() % 3);
    const Matrix v = oracle::random_matrix(rng, m, k, 0.0, 1.0);
    const auto p = hungarian_max(v);
    ASSERT_EQ(static_cast<Eigen::Index>(p.size()), m);
    std::set<Eigen::Index> cols;
    for (const auto& [r, c] : p) cols.insert(c);
    EXPECT_EQ(static_cast<Eigen::Index>(cols.size()), m);
    EXPECT_EQ(assignment_total(v, p), oracle::brute_force_max(v)) << "trial " << t;
  }
}

TEST(Hungarian, NegativeAndIntegerValues) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    Matrix v(4, 6);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<double>(rng() % 7) - 3.0;
    EXPECT_EQ(assignment_total(v, hungarian_max(v)), oracle::brute_force_max(v));
  }
}

TEST(Hungarian, TiesGoToLowestColumn) {
  EXPECT_EQ(hungarian_max(Matrix::Constant(1, 4, 0.5)), (Pairs{{0, 0}}));
}

TEST(Hungarian, Errors) {
  EXPECT_EQ(code_of([] { hungarian_max(Matrix::Zero(3, 2)); }), ErrorCode::TooManyRows);
  Matrix bad = Matrix::Zero(1, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(code_of([&] { hungarian_max(bad); }), ErrorCode::InvalidArgument);
  EXPECT_TRUE(hungarian_max(Matrix(0, 3)).empty());
}

TEST(Match, BelowMarginIsNew) {
  const auto ids = ids_from(4, 1);
  const auto r = match(Matrix::Constant(1, 1, 0.1), 0.2, 5, ids);
  EXPECT_FALSE(r.detections[0].matched);
  EXPECT_EQ(r.detections[0].id, 5u);
  EXPECT_FALSE(r.tracklet_matched[0]);
  EXPECT_EQ(r.next_id, 6u);
}

TEST(Match, AboveMarginMatches) {
  const auto ids = ids_from(4, 1);
  const auto r = match(Matrix::Constant(1, 1, 0.9), 0.2, 5, ids);
  EXPECT_TRUE(r.detections[0].matched);
  EXPECT_EQ(r.detections[0].tracklet, 0);
  EXPECT_EQ(r.detections[0].id, 4u);
  EXPECT_TRUE(r.tracklet_matched[0]);
  EXPECT_EQ(r.next_id, 5u);
}

TEST(Match, EightDetectionsTenTracklets) {
  std::mt19937_64 rng(8);
  const Matrix s = eight_by_ten(rng);
  const auto ids = ids_from(1, 10);
  const auto r = match(s, 0.2, 11, ids);
  const int target[8] = {4, 0, -1, 9, 2, 7, 5, -1};
  for (int i = 0; i < 8; ++i) {
    const auto& d = r.detections[static_cast<std::size_t>(i)];
    if (target[i] < 0) {
      EXPECT_FALSE(d.matched) << i;
    } else {
      EXPECT_TRUE(d.matched) << i;
      EXPECT_EQ(d.tracklet, target[i]);
      EXPECT_EQ(d.id, static_cast<std::uint64_t>(target[i] + 1));
    }
  }
  EXPECT_EQ(r.detections[2].id, 11u);
  EXPECT_EQ(r.detections[7].id, 12u);
  EXPECT_EQ(r.next_id, 13u);
  EXPECT_EQ(std::count(r.tracklet_matched.begin(), r.tracklet_matched.end(), true), 6);
}

TEST(Match, RowBelowMarginAlwaysNew) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 200; ++t) {
    const auto m = static_cast<Eigen::Index>(1 + rng() % 6);
    const auto n = static_cast<Eigen::Index>(1 + rng() % 6);
    const Matrix s = oracle::random_matrix(rng, m, n, 0.0, 1.0);
    const auto r = match(s, 0.3, 100, ids_from(1, n));
    std::set<Eigen::Index> used;
    std::uint64_t expect_new = 100;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& d = r.detections[static_cast<std::size_t>(i)];
      if (s.row(i).maxCoeff() < 0.3) {
        EXPECT_FALSE(d.matched);
      }
      if (d.matched) {
        EXPECT_TRUE(used.insert(d.tracklet).second);
      } else {
        EXPECT_EQ(d.id, expect_new++);
      }
    }
    EXPECT_EQ(r.next_id, expect_new);
  }
}

TEST(Match, PaddingColumnsChangeNothing) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto m = static_cast<Eigen::Index>(1 + rng() % 5);
    const auto n = static_cast<Eigen::Index>(1 + rng() % 5);
    const Matrix s = oracle::random_matrix(rng, m, n, 0.0, 1.0);
    Matrix padded(m, n + 3);
    padded.leftCols(n) = s;
    padded.rightCols(3) = oracle::random_matrix(rng, m, 3, 0.0, 0.19);
    const auto a = match(s, 0.2, 50, ids_from(1, n));
    const auto b = match(padded, 0.2, 50, ids_from(1, n + 3));
    ASSERT_EQ(a.detections.size(), b.detections.size());
    for (std::size_t i = 0; i < a.detections.size(); ++i) {
      EXPECT_EQ(a.detections[i].matched, b.detections[i].matched);
      EXPECT_EQ(a.detections[i].tracklet, b.detections[i].tracklet);
      EXPECT_EQ(a.detections[i].id, b.detections[i].id);
    }
    EXPECT_EQ(a.next_id, b.next_id);
  }
}

TEST(Match, NoDetections) {
  const auto r = match(Matrix(0, 3), 0.2, 7, ids_from(1, 3));
  EXPECT_TRUE(r.detections.empty());
  EXPECT_EQ(r.tracklet_matched, std::vector<bool>(3, false));
  EXPECT_EQ(r.next_id, 7u);
}

TEST(Match, NoTrackletsMakesEverythingNew) {
  const auto r = match(Matrix(3, 0), 0.2, 1, {});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.detections[i].id, i + 1);
}

TEST(Match, Errors) {
  const auto ids = ids_from(1, 2);
  EXPECT_EQ(code_of([&] { match(Matrix::Zero(1, 2), 0.0, 1, ids); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { match(Matrix::Zero(1, 2), 1.0, 1, ids); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { match(Matrix::Zero(1, 3), 0.2, 1, ids); }), ErrorCode::ShapeMismatch);
}
