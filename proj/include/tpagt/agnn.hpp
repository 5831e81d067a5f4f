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
#include <tpagt/roifeat.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tpagt {

/// Trainable weights of the one-hidden-layer adaptive graph network.
struct AgnnParams {
  Matrix w1;  // D x D, self term
  Matrix w2;  // D x D, aggregated neighbour term
  Matrix wa;  // D x D, adaptive gate
  double w_raw = 0.0;  // logit of the IOU/appearance mixing weight

  Eigen::Index dim() const { return w1.rows(); }

  double mixing() const { return 1.0 / (1.0 + std::exp(-w_raw)); }

  /// uniform(-1/sqrt(D), 1/sqrt(D)) weights, mixing weight 0.5.
  static AgnnParams init(std::uint32_t dim, std::uint64_t seed) {
    AgnnParams p;
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (Matrix* m : {&p.w1, &p.w2, &p.wa}) {
      m->resize(dim, dim);
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = uni(rng);
    }
    p.w_raw = 0.0;
    return p;
  }

  bool consistent() const {
    const auto d = w1.rows();
    return d > 0 && w1.cols() == d && w2.rows() == d && w2.cols() == d && wa.rows() == d &&
           wa.cols() == d;
  }
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {
constexpr double kDistanceGuard = 1e-16;
constexpr double kNormGuard = 1e-12;
}  // namespace detail

/// Inverse-distance appearance similarity, each row scaled to unit L2 norm.
inline Matrix initial_similarity(const FeatureMatrix& fd, const FeatureMatrix& ft) {
  if (fd.rows() < 1 || ft.rows() < 1 || fd.cols() != ft.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "feature blocks must be non-empty with equal width");
  }
  Matrix s(fd.rows(), ft.rows());
  for (Eigen::Index i = 0; i < fd.rows(); ++i) {
    for (Eigen::Index j = 0; j < ft.rows(); ++j) {
      s(i, j) = 1.0 / ((fd.row(i) - ft.row(j)).norm() + detail::kDistanceGuard);
    }
    s.row(i) /= s.row(i).norm();
  }
  return s;
}

/// E = w * IOU + (1 - w) * S_ft.
inline Matrix prior_edges(const Matrix& s_ft, const Matrix& iou, double w) {
  if (s_ft.rows() != iou.rows() || s_ft.cols() != iou.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "IOU and similarity matrices differ in shape");
  }
  if (!(w >= 0.0 && w <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "mixing weight must lie in [0,1]");
  }
  return w * iou + (1.0 - w) * s_ft;
}

/// Intermediates of one forward pass. Holds a pointer to the parameters used,
/// which must stay alive and unmodified until backward() has run.
struct AgnnCache {
  const AgnnParams* params = nullptr;
  FeatureMatrix fd, ft;
  Matrix iou;
  Matrix dist;   // M x N pairwise distances
  Matrix inv;    // 1 / (dist + guard)
  Vector row_norm;
  Matrix s_ft;
  double w = 0.5;
  Matrix edges;
  Matrix t_agg, d_agg;  // E Ft, E^T Fd
  Matrix gate_d, gate_t;
  Matrix u_d, u_t;      // aggregated terms times W2
  Matrix pre_d, pre_t;  // pre-activations
  Matrix h_d, h_t;      // ReLU outputs
  Vector norm_d, norm_t;
  Matrix n_d, n_t;      // row-normalized hidden states
  Matrix s_out;
};

inline AgnnCache forward(const FeatureMatrix& fd, const FeatureMatrix& ft, const Matrix& iou,
                         const AgnnParams& params) {
  if (!params.consistent()) throw Error(ErrorCode::ShapeMismatch, "inconsistent AGNN parameters");
  if (fd.cols() != params.dim() || ft.cols() != params.dim()) {
    throw Error(ErrorCode::ShapeMismatch, "feature width differs from AGNN dimension");
  }
  if (iou.rows() != fd.rows() || iou.cols() != ft.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "IOU matrix must be M x N");
  }
  const Eigen::Index m = fd.rows();
  const Eigen::Index n = ft.rows();
  if (m < 1 || n < 1) throw Error(ErrorCode::ShapeMismatch, "need at least one detection and tracklet");

  AgnnCache c;
  c.params = &params;
  c.fd = fd;
  c.ft = ft;
  c.iou = iou;
  c.dist.resize(m, n);
  c.inv.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      c.dist(i, j) = (fd.row(i) - ft.row(j)).norm();
      c.inv(i, j) = 1.0 / (c.dist(i, j) + detail::kDistanceGuard);
    }
  }
  c.row_norm = c.inv.rowwise().norm();
  c.s_ft = c.inv.array().colwise() / c.row_norm.array();
  c.w = params.mixing();
  c.edges = c.w * iou + (1.0 - c.w) * c.s_ft;

  c.t_agg = c.edges * ft;
  c.d_agg = c.edges.transpose() * fd;
  c.gate_d = (fd * params.wa).unaryExpr([](double z) { return logistic(z); });
  c.gate_t = (ft * params.wa).unaryExpr([](double z) { return logistic(z); });
  c.u_d = c.t_agg * params.w2;
  c.u_t = c.d_agg * params.w2;
  c.pre_d = fd * params.w1 + c.gate_d.cwiseProduct(c.u_d);
  c.pre_t = ft * params.w1 + c.gate_t.cwiseProduct(c.u_t);
  c.h_d = c.pre_d.cwiseMax(0.0);
  c.h_t = c.pre_t.cwiseMax(0.0);
  c.norm_d = c.h_d.rowwise().norm().array() + detail::kNormGuard;
  c.norm_t = c.h_t.rowwise().norm().array() + detail::kNormGuard;
  c.n_d = c.h_d.array().colwise() / c.norm_d.array();
  c.n_t = c.h_t.array().colwise() / c.norm_t.array();
  c.s_out = c.n_d * c.n_t.transpose();
  return c;
}

struct AgnnGrads {
  Matrix w1, w2, wa;
  double w_raw = 0.0;
  Matrix fd, ft;
};

namespace detail {

// Backprop through h / (|h| + guard), row by row.
inline Matrix normalize_backward(const Matrix& h, const Vector& denom, const Matrix& d_out) {
  Matrix d_h(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    const double len = denom[i] - kNormGuard;
    d_h.row(i) = d_out.row(i) / denom[i];
    if (len > 0.0) {
      const double proj = h.row(i).dot(d_out.row(i));
      d_h.row(i) -= h.row(i) * (proj / (len * denom[i] * denom[i]));
    }
  }
  return d_h;
}

}  // namespace detail

/// Reverse-mode gradients of a scalar loss given dL/dS_out, through every
/// stage including the dependence of E on w and on the features via S_ft.
inline AgnnGrads backward(const AgnnCache& c, const Matrix& d_sout) {
  if (c.params == nullptr || d_sout.rows() != c.s_out.rows() || d_sout.cols() != c.s_out.cols() ||
      c.params->dim() != c.fd.cols()) {
    throw Error(ErrorCode::StaleCache, "gradient shape does not match the cached forward pass");
  }
  const AgnnParams& p = *c.params;
  const Eigen::Index m = c.fd.rows();
  const Eigen::Index n = c.ft.rows();

  const Matrix d_nd = d_sout * c.n_t;
  const Matrix d_nt = d_sout.transpose() * c.n_d;
  const Matrix d_hd = detail::normalize_backward(c.h_d, c.norm_d, d_nd);
  const Matrix d_ht = detail::normalize_backward(c.h_t, c.norm_t, d_nt);
  const Matrix d_pd = d_hd.cwiseProduct((c.pre_d.array() > 0.0).cast<double>().matrix());
  const Matrix d_pt = d_ht.cwiseProduct((c.pre_t.array() > 0.0).cast<double>().matrix());

  AgnnGrads g;
  g.w1 = c.fd.transpose() * d_pd + c.ft.transpose() * d_pt;
  g.fd = d_pd * p.w1.transpose();
  g.ft = d_pt * p.w1.transpose();

  const Matrix d_ud = d_pd.cwiseProduct(c.gate_d);
  const Matrix d_ut = d_pt.cwiseProduct(c.gate_t);
  const Matrix d_zd = d_pd.cwiseProduct(c.u_d).cwiseProduct(
      c.gate_d.cwiseProduct((1.0 - c.gate_d.array()).matrix()));
  const Matrix d_zt = d_pt.cwiseProduct(c.u_t).cwiseProduct(
      c.gate_t.cwiseProduct((1.0 - c.gate_t.array()).matrix()));

  g.w2 = c.t_agg.transpose() * d_ud + c.d_agg.transpose() * d_ut;
  g.wa = c.fd.transpose() * d_zd + c.ft.transpose() * d_zt;
  g.fd += d_zd * p.wa.transpose();
  g.ft += d_zt * p.wa.transpose();

  const Matrix d_tagg = d_ud * p.w2.transpose();
  const Matrix d_dagg = d_ut * p.w2.transpose();
  Matrix d_e = d_tagg * c.ft.transpose() + c.fd * d_dagg.transpose();
  g.ft += c.edges.transpose() * d_tagg;
  g.fd += c.edges * d_dagg;

  g.w_raw = d_e.cwiseProduct(c.iou - c.s_ft).sum() * c.w * (1.0 - c.w);
  const Matrix d_s = (1.0 - c.w) * d_e;

  // S_ft = inv / |inv row|, inv = 1 / (dist + guard), dist = |fd_i - ft_j|.
  for (Eigen::Index i = 0; i < m; ++i) {
    const double r = c.row_norm[i];
    const double dot = d_s.row(i).dot(c.inv.row(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d_inv = d_s(i, j) / r - c.inv(i, j) * dot / (r * r * r);
      const double d_dist = -d_inv * c.inv(i, j) * c.inv(i, j);
      if (c.dist(i, j) > 0.0) {
        const RowVector dir = (c.fd.row(i) - c.ft.row(j)) / c.dist(i, j);
        g.fd.row(i) += d_dist * dir;
        g.ft.row(j) -= d_dist * dir;
      }
    }
  }
  return g;
}

// --- checkpoints ----------------------------------------------------------

/// Everything a tracker needs to run: graph weights plus the embedding head.
struct Model {
  AgnnParams agnn;
  EmbedParams embed;

  static Model init(std::uint32_t channels, std::uint32_t pool, std::uint32_t dim,
                    std::uint64_t seed) {
    return {AgnnParams::init(dim, seed), EmbedParams::init(channels, pool, dim, seed ^ 0x9E3779B97F4A7C15ull)};
  }
};

namespace detail {

inline void put_matrix(ByteWriter& w, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);  // row-major storage
}

inline Matrix get_matrix(ByteReader& r, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
  return m;
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Model& model) {
  if (!model.agnn.consistent() || !model.embed.consistent()) {
    throw Error(ErrorCode::ShapeMismatch, "cannot save inconsistent parameters");
  }
  if (model.embed.dim != static_cast<std::uint32_t>(model.agnn.dim())) {
    throw Error(ErrorCode::ShapeMismatch, "embedding dimension differs from AGNN dimension");
  }
  ByteWriter w;
  w.magic("AGNN");
  w.u32(static_cast<std::uint32_t>(model.agnn.dim()));
  detail::put_matrix(w, model.agnn.w1);
  detail::put_matrix(w, model.agnn.w2);
  detail::put_matrix(w, model.agnn.wa);
  w.f64(model.agnn.w_raw);

  ByteWriter e;
  e.u32(model.embed.channels);
  e.u32(model.embed.pool);
  e.u32(model.embed.dim);
  detail::put_matrix(e, model.embed.projection);
  for (Eigen::Index i = 0; i < model.embed.bias.size(); ++i) e.f64(model.embed.bias[i]);
  w.u64(e.bytes().size());
  w.raw(e.bytes());
  return w.take();
}

inline Model decode_checkpoint(std::span<const unsigned char> bytes, const std::string& what = "AGNN") {
  ByteReader r(bytes, what);
  r.expect_magic("AGNN");
  const std::uint32_t d = r.u32();
  if (d == 0) throw Error(ErrorCode::ParseError, what + ": zero dimension");
  Model model;
  model.agnn.w1 = detail::get_matrix(r, d, d);
  model.agnn.w2 = detail::get_matrix(r, d, d);
  model.agnn.wa = detail::get_matrix(r, d, d);
  model.agnn.w_raw = r.f64();

  const std::uint64_t len = r.u64();
  if (len != r.remaining()) throw Error(ErrorCode::ParseError, what + ": embedding block length mismatch");
  ByteReader e(r.take(len), what + " embedding");
  model.embed.channels = e.u32();
  model.embed.pool = e.u32();
  model.embed.dim = e.u32();
  if (model.embed.dim != d || model.embed.channels == 0 || model.embed.pool == 0) {
    throw Error(ErrorCode::ParseError, what + ": bad embedding header");
  }
  model.embed.projection =
      detail::get_matrix(e, static_cast<Eigen::Index>(model.embed.input_size()), model.embed.dim);
  model.embed.bias.resize(model.embed.dim);
  for (Eigen::Index i = 0; i < model.embed.bias.size(); ++i) model.embed.bias[i] = e.f64();
  e.expect_end();
  return model;
}

inline Model read_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file_bytes(path), path);
}

inline void write_checkpoint(const std::string& path, const Model& model) {
  write_file_atomic(path, encode_checkpoint(model));
}

}  // namespace tpagt
