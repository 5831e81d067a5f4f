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

#include <tpagt/loss.hpp>

#include <gtest/gtest.h>

#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace tpagt;

namespace {

LabelMatrix labels_from(Eigen::Index m, Eigen::Index n, std::initializer_list<std::pair<int, int>> ones) {
  LabelMatrix l = LabelMatrix::zeros(m, n);
  for (auto [i, j] : ones) l.values(i, j) = 1.0;
  return l;
}

}  // namespace

TEST(Masks, IdentityLabels) {
  const SampleMasks m = build_masks(LabelMatrix{Matrix::Identity(2, 2)});
  EXPECT_EQ(m.cont_pos, Matrix::Identity(2, 2));
  EXPECT_EQ(m.cont_neg, Matrix(Matrix::Ones(2, 2) - Matrix::Identity(2, 2)));
  EXPECT_EQ(m.fresh.sum(), 0.0);
  EXPECT_EQ(m.disap.sum(), 0.0);
}

TEST(Masks, SingleZeroIsNewAndDisappeared) {
  const SampleMasks m = build_masks(LabelMatrix::zeros(1, 1));
  EXPECT_EQ(m.fresh(0, 0), 1.0);
  EXPECT_EQ(m.disap(0, 0), 1.0);
  EXPECT_EQ(m.cont_pos(0, 0), 0.0);
  EXPECT_EQ(m.cont_neg(0, 0), 0.0);
}

TEST(Masks, EightDetectionsTenTracklets) {
  // Rows 3 and 8 (1-based) are new. Six one-to-one matches over ten
  // tracklets leave four empty columns.
  const LabelMatrix l = labels_from(8, 10, {{0, 0}, {1, 1}, {3, 2}, {4, 4}, {5, 6}, {6, 8}});
  ASSERT_TRUE(l.valid());
  const SampleMasks m = build_masks(l);
  for (int i = 0; i < 8; ++i) {
    const double expect = (i == 2 || i == 7) ? 1.0 : 0.0;
    for (int j = 0; j < 10; ++j) EXPECT_EQ(m.fresh(i, j), expect);
  }
  for (int j = 0; j < 10; ++j) {
    const double expect = (j == 3 || j == 5 || j == 7 || j == 9) ? 1.0 : 0.0;
    for (int i = 0; i < 8; ++i) EXPECT_EQ(m.disap(i, j), expect);
  }
}

TEST(Masks, CategoriesCoverEveryEntry) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const int m = 1 + static_cast<int>(rng() % 6), n = 1 + static_cast<int>(rng() % 6);
    LabelMatrix l = LabelMatrix::zeros(m, n);
    std::vector<int> cols(static_cast<std::size_t>(n));
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(cols.begin(), cols.end(), rng);
    for (int i = 0; i < std::min(m, n); ++i) {
      if (rng() % 3 != 0) l.values(i, cols[static_cast<std::size_t>(i)]) = 1.0;
    }
    const SampleMasks s = build_masks(l);
    const Matrix special = (s.fresh + s.disap).cwiseMin(1.0);
    EXPECT_EQ(s.cont_pos + s.cont_neg + special, Matrix(Matrix::Ones(m, n)));
    EXPECT_EQ(s.cont_pos.cwiseProduct(s.cont_neg).sum(), 0.0);
    for (int i = 0; i < m; ++i) EXPECT_EQ(s.fresh.row(i).minCoeff(), s.fresh.row(i).maxCoeff());
    for (int j = 0; j < n; ++j) EXPECT_EQ(s.disap.col(j).minCoeff(), s.disap.col(j).maxCoeff());
  }
}

TEST(Bmse, ExactPredictionLeavesRegularizer) {
  const LabelMatrix l = labels_from(2, 3, {{0, 1}});
  const auto v = bmse(l.values, l, build_masks(l), {}, 7.0);
  EXPECT_NEAR(v.loss, 0.07, 1e-15);
  EXPECT_EQ(v.d_pred.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Bmse, ContinuingPositive) {
  const LabelMatrix l = labels_from(1, 1, {{0, 0}});
  const auto v = bmse(Matrix::Constant(1, 1, 0.8), l, build_masks(l), {}, 0.0);
  EXPECT_NEAR(v.loss, 0.04, 1e-15);
}

TEST(Bmse, NewRow) {
  const LabelMatrix l = labels_from(2, 1, {{0, 0}});
  Matrix pred(2, 1);
  pred << 1.0, 0.3;
  const auto v = bmse(pred, l, build_masks(l), {}, 0.0);
  EXPECT_NEAR(v.loss, 4.5, 1e-12);
}

TEST(Bmse, CoefficientsAreSumOfTerms) {
  const LabelMatrix l = labels_from(3, 3, {{0, 0}});
  const SampleMasks m = build_masks(l);
  const LossWeights w{2.0, 3.0, 5.0, 7.0, 0.0};
  const Matrix c = loss_coefficients(m, w);
  EXPECT_EQ(c(0, 0), 3.0);   // continuing positive
  EXPECT_EQ(c(1, 0), 5.0);   // new row, live column
  EXPECT_EQ(c(0, 1), 7.0);   // live row, gone column
  EXPECT_EQ(c(1, 1), 12.0);  // both
  EXPECT_EQ(c, Matrix(w.alpha * m.cont_neg + w.beta * m.cont_pos + w.gamma * m.fresh + w.delta * m.disap));
}

TEST(Bmse, NonNegative) {
  std::mt19937_64 rng(9);
  const LabelMatrix l = labels_from(3, 4, {{0, 2}, {1, 0}});
  for (int t = 0; t < 100; ++t) {
    EXPECT_GE(bmse(oracle::random_matrix(rng, 3, 4, 0.0, 1.0), l, build_masks(l), {}, 1.0).loss, 0.0);
  }
}

TEST(Bmse, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) EXPECT_LT(gradcheck::bmse_max_rel_err(seed), 1e-6);
}

TEST(Bmse, ShapeMismatch) {
  const LabelMatrix l = labels_from(2, 2, {{0, 0}});
  try {
    bmse(Matrix::Zero(2, 3), l, build_masks(l), {}, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Labels, Validity) {
  EXPECT_TRUE(labels_from(2, 2, {{0, 1}}).valid());
  EXPECT_FALSE(labels_from(2, 2, {{0, 1}, {1, 1}}).valid());
  EXPECT_FALSE(labels_from(2, 2, {{0, 0}, {0, 1}}).valid());
  LabelMatrix half = LabelMatrix::zeros(1, 1);
  half.values(0, 0) = 0.5;
  EXPECT_FALSE(half.valid());
}
