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

namespace tpagt {

/// 0/1 ground-truth association matrix, at most one 1 per row and column.
struct LabelMatrix {
  Matrix values;

  static LabelMatrix zeros(Eigen::Index m, Eigen::Index n) { return {Matrix::Zero(m, n)}; }

  bool valid() const {
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      const double v = values.data()[i];
      if (v != 0.0 && v != 1.0) return false;
    }
    return (values.rowwise().sum().array() <= 1.0).all() &&
           (values.colwise().sum().array() <= 1.0).all();
  }
};

/// Coefficients of the balanced MSE loss.
struct LossWeights {
  double alpha = 25.0;   // continuing negatives
  double beta = 1.0;     // continuing positives
  double gamma = 50.0;   // new detections
  double delta = 50.0;   // disappeared tracklets
  double epsilon = 0.01; // weight decay
};

struct SampleMasks {
  Matrix cont_neg, cont_pos, fresh, disap;
};

/// Rows with no 1 are new objects, columns with no 1 are disappeared
/// tracklets; the continuing masks exclude both.
inline SampleMasks build_masks(const LabelMatrix& labels) {
  const Matrix& s = labels.values;
  const Eigen::Index m = s.rows();
  const Eigen::Index n = s.cols();
  SampleMasks k{Matrix::Zero(m, n), Matrix::Zero(m, n), Matrix::Zero(m, n), Matrix::Zero(m, n)};
  const Vector row_sum = s.rowwise().sum();
  const RowVector col_sum = s.colwise().sum();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool is_new = row_sum[i] == 0.0;
      const bool is_gone = col_sum[j] == 0.0;
      k.fresh(i, j) = is_new ? 1.0 : 0.0;
      k.disap(i, j) = is_gone ? 1.0 : 0.0;
      if (!is_new && !is_gone) {
        (s(i, j) == 1.0 ? k.cont_pos : k.cont_neg)(i, j) = 1.0;
      }
    }
  }
  return k;
}

/// Per-entry weight; where a new row crosses a disappeared column both the
/// gamma and delta terms apply.
inline Matrix loss_coefficients(const SampleMasks& masks, const LossWeights& wts) {
  return wts.alpha * masks.cont_neg + wts.beta * masks.cont_pos + wts.gamma * masks.fresh +
         wts.delta * masks.disap;
}

struct LossValue {
  double loss = 0.0;
  Matrix d_pred;  // dL/dS_hat
};

/// Balanced MSE plus epsilon * reg_norm_sq. The regularizer gradient is the
/// caller's business since it lives on the weight matrices.
inline LossValue bmse(const Matrix& pred, const LabelMatrix& labels, const SampleMasks& masks,
                      const LossWeights& wts, double reg_norm_sq) {
  const Matrix& s = labels.values;
  if (pred.rows() != s.rows() || pred.cols() != s.cols() || masks.fresh.rows() != s.rows() ||
      masks.fresh.cols() != s.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction, labels and masks must share a shape");
  }
  const Matrix coef = loss_coefficients(masks, wts);
  const Matrix resid = pred - s;
  LossValue out;
  out.loss = coef.cwiseProduct(resid.cwiseAbs2()).sum() + wts.epsilon * reg_norm_sq;
  out.d_pred = 2.0 * coef.cwiseProduct(resid);
  return out;
}

}  // namespace tpagt
