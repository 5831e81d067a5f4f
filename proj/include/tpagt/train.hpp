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

#include <tpagt/agnn.hpp>
#include <tpagt/core.hpp>
#include <tpagt/flow.hpp>
#include <tpagt/loss.hpp>
#include <tpagt/roifeat.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace tpagt {

// --- learning-rate schedule -------------------------------------------------

/// Single cosine arc from lr_max to lr_min over total_epochs, refreshed once
/// per period_epochs block (piecewise constant inside a block).
struct LrSchedule {
  double lr_max = 0.05;
  double lr_min = 2.5e-7;
  int period_epochs = 30;
  int total_epochs = 3000;

  bool valid() const {
    return lr_max > lr_min && lr_min > 0.0 && period_epochs >= 1 && total_epochs >= 1;
  }
};

inline double lr_at(int epoch, const LrSchedule& s) {
  if (!s.valid()) throw Error(ErrorCode::InvalidArgument, "invalid learning-rate schedule");
  if (epoch < 0 || epoch > s.total_epochs) {
    throw Error(ErrorCode::EpochOutOfRange, "epoch " + std::to_string(epoch) + " outside [0, " +
                                                std::to_string(s.total_epochs) + "]");
  }
  if (epoch == s.total_epochs) return s.lr_min;
  const int block_start = (epoch / s.period_epochs) * s.period_epochs;
  if (block_start == 0) return s.lr_max;
  const double phase = std::numbers::pi * block_start / s.total_epochs;
  return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + std::cos(phase));
}

// --- Adam -------------------------------------------------------------------

struct OptimState {
  std::vector<Vector> first;
  std::vector<Vector> second;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update across a list of flat parameter tensors.
/// Moment buffers are allocated lazily on the first call.
inline void adam_step(std::span<const std::span<double>> params,
                      std::span<const std::span<const double>> grads, OptimState& state, double lr) {
  if (params.size() != grads.size()) throw Error(ErrorCode::ShapeMismatch, "param/grad count differs");
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size())));
      state.second.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size())));
    }
  }
  if (state.first.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state has a different tensor count");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size() ||
        static_cast<Eigen::Index>(params[t].size()) != state.first[t].size()) {
      throw Error(ErrorCode::ShapeMismatch, "tensor " + std::to_string(t) + " shape mismatch");
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Vector& m = state.first[t];
    Vector& v = state.second[t];
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double g = grads[t][i];
      const auto k = static_cast<Eigen::Index>(i);
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      params[t][i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

/// Gradients for every trainable tensor of a Model.
struct ModelGrads {
  Matrix w1, w2, wa;
  double w_raw = 0.0;
  Matrix projection;
  Vector bias;
};

namespace detail {

template <typename M>
std::span<double> flat(M& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
template <typename M>
std::span<const double> flat_const(const M& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace detail

inline void adam_step(Model& model, const ModelGrads& g, OptimState& state, double lr) {
  const std::vector<std::span<double>> params{
      detail::flat(model.agnn.w1), detail::flat(model.agnn.w2), detail::flat(model.agnn.wa),
      std::span<double>(&model.agnn.w_raw, 1), detail::flat(model.embed.projection),
      detail::flat(model.embed.bias)};
  const std::vector<std::span<const double>> grads{
      detail::flat_const(g.w1), detail::flat_const(g.w2), detail::flat_const(g.wa),
      std::span<const double>(&g.w_raw, 1), detail::flat_const(g.projection),
      detail::flat_const(g.bias)};
  adam_step(params, grads, state, lr);
}

/// Squared Frobenius norm over the regularized weight matrices (W1, W2, Wa and
/// the embedding projection; the mixing logit and biases are excluded).
inline double reg_norm_sq(const Model& model) {
  return model.agnn.w1.squaredNorm() + model.agnn.w2.squaredNorm() + model.agnn.wa.squaredNorm() +
         model.embed.projection.squaredNorm();
}

// --- samples ----------------------------------------------------------------

/// One detection/tracklet frame pair with its pooled regions and labels.
struct FramePairSample {
  std::vector<BBox> det_boxes;
  std::vector<BBox> trk_boxes;
  Matrix det_regions;  // M x (C*P*P)
  Matrix trk_regions;  // N x (C*P*P)
  Matrix iou;
  LabelMatrix labels;
  SampleMasks masks;
};

inline FramePairSample make_sample(const FeatureMap& map, std::vector<BBox> det_boxes,
                                   std::vector<BBox> trk_boxes, LabelMatrix labels,
                                   std::uint32_t pool) {
  if (det_boxes.empty() || trk_boxes.empty()) {
    throw Error(ErrorCode::InvalidArgument, "a training pair needs detections and tracklets");
  }
  if (labels.values.rows() != static_cast<Eigen::Index>(det_boxes.size()) ||
      labels.values.cols() != static_cast<Eigen::Index>(trk_boxes.size()) || !labels.valid()) {
    throw Error(ErrorCode::ShapeMismatch, "labels must be a valid M x N matrix");
  }
  FramePairSample s;
  s.det_regions = pool_regions(map, det_boxes, pool);
  s.trk_regions = pool_regions(map, trk_boxes, pool);
  s.iou = iou_matrix(det_boxes, trk_boxes);
  s.masks = build_masks(labels);
  s.labels = std::move(labels);
  s.det_boxes = std::move(det_boxes);
  s.trk_boxes = std::move(trk_boxes);
  return s;
}

struct SampleEval {
  double loss = 0.0;
  ModelGrads grads;
};

/// Loss and full model gradient for one sample (embedding -> AGNN -> BMSE).
inline SampleEval evaluate_sample(const FramePairSample& s, const Model& model, const LossWeights& wts) {
  const FeatureMatrix fd = embed_rows(s.det_regions, model.embed);
  const FeatureMatrix ft = embed_rows(s.trk_regions, model.embed);
  const AgnnCache cache = forward(fd, ft, s.iou, model.agnn);
  const LossValue lv = bmse(cache.s_out, s.labels, s.masks, wts, reg_norm_sq(model));
  const AgnnGrads ag = backward(cache, lv.d_pred);
  const EmbedGrads ed = embed_backward(s.det_regions, ag.fd);
  const EmbedGrads et = embed_backward(s.trk_regions, ag.ft);

  SampleEval out;
  out.loss = lv.loss;
  const double decay = 2.0 * wts.epsilon;
  out.grads.w1 = ag.w1 + decay * model.agnn.w1;
  out.grads.w2 = ag.w2 + decay * model.agnn.w2;
  out.grads.wa = ag.wa + decay * model.agnn.wa;
  out.grads.w_raw = ag.w_raw;
  out.grads.projection = ed.projection + et.projection + decay * model.embed.projection;
  out.grads.bias = ed.bias + et.bias;
  return out;
}

inline double sample_loss(const FramePairSample& s, const Model& model, const LossWeights& wts) {
  const FeatureMatrix fd = embed_rows(s.det_regions, model.embed);
  const FeatureMatrix ft = embed_rows(s.trk_regions, model.embed);
  const AgnnCache cache = forward(fd, ft, s.iou, model.agnn);
  return bmse(cache.s_out, s.labels, s.masks, wts, reg_norm_sq(model)).loss;
}

/// One pass over the pairs with a parameter update per pair. Returns the mean
/// of the pre-update losses.
inline double train_epoch(std::span<const FramePairSample> pairs, Model& model, OptimState& state,
                          double lr, const LossWeights& wts = {}) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyBatch, "no training pairs");
  double total = 0.0;
  for (const auto& s : pairs) {
    const SampleEval ev = evaluate_sample(s, model, wts);
    total += ev.loss;
    adam_step(model, ev.grads, state, lr);
  }
  return total / static_cast<double>(pairs.size());
}

inline double mean_loss(std::span<const FramePairSample> pairs, const Model& model,
                        const LossWeights& wts = {}) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyBatch, "no pairs to evaluate");
  double total = 0.0;
  for (const auto& s : pairs) total += sample_loss(s, model, wts);
  return total / static_cast<double>(pairs.size());
}

struct TrainOptions {
  LrSchedule schedule;
  LossWeights weights;
  int epochs = 3000;
  int checkpoint_every = 100;
};

/// Runs epochs 0..epochs-1; on_epoch receives (epoch, lr, mean_loss) and may
/// write checkpoints or logs.
inline void fit(std::span<const FramePairSample> pairs, Model& model, const TrainOptions& opt,
                const std::function<void(int, double, double)>& on_epoch = {}) {
  OptimState state;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const double lr = lr_at(std::min(epoch, opt.schedule.total_epochs), opt.schedule);
    const double loss = train_epoch(pairs, model, state, lr, opt.weights);
    if (on_epoch) on_epoch(epoch, lr, loss);
  }
}

// --- pairs from labeled sequences -----------------------------------------

struct LabeledObject {
  std::uint64_t id = 0;
  BBox box;
};

/// Frames, feature maps and visible ground-truth boxes of one sequence.
struct LabeledSequence {
  std::vector<GrayFrame> frames;
  std::vector<FeatureMap> maps;
  std::vector<std::vector<LabeledObject>> objects;  // per frame
};

struct PairOptions {
  int k = 10;
  FlowConfig flow;
  std::uint32_t pool = 7;
};

/// Builds a training pair for every frame t >= 1 that has both detections and
/// live tracklets. Tracklets are the ids seen within the last k frames; ones
/// seen at t-1 get flow-predicted boxes, older ones keep their last box.
inline std::vector<FramePairSample> build_training_pairs(const LabeledSequence& seq,
                                                         const PairOptions& opt) {
  if (seq.frames.size() != seq.maps.size() || seq.frames.size() != seq.objects.size()) {
    throw Error(ErrorCode::InputLengthMismatch, "frames, maps and labels must align");
  }
  struct Seen {
    BBox box;
    std::size_t frame;
  };
  std::map<std::uint64_t, Seen> last;
  std::vector<FramePairSample> out;
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    if (t > 0) {
      std::optional<FlowPair> flow;
      std::vector<BBox> trk;
      std::vector<std::uint64_t> trk_ids;
      for (const auto& [id, seen] : last) {
        if (t - seen.frame > static_cast<std::size_t>(opt.k) + 1) continue;
        BBox box = seen.box;
        if (seen.frame == t - 1) {
          if (!flow) flow.emplace(seq.frames[t - 1], seq.frames[t], opt.flow);
          try {
            box = flow->predict(box).first;
          } catch (const Error&) {
          }
        }
        trk.push_back(box);
        trk_ids.push_back(id);
      }
      const auto& dets = seq.objects[t];
      if (!trk.empty() && !dets.empty()) {
        LabelMatrix labels = LabelMatrix::zeros(static_cast<Eigen::Index>(dets.size()),
                                                static_cast<Eigen::Index>(trk.size()));
        std::vector<BBox> det_boxes;
        for (std::size_t i = 0; i < dets.size(); ++i) {
          det_boxes.push_back(dets[i].box);
          for (std::size_t j = 0; j < trk_ids.size(); ++j) {
            if (trk_ids[j] == dets[i].id) {
              labels.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
            }
          }
        }
        out.push_back(make_sample(seq.maps[t], std::move(det_boxes), std::move(trk),
                                  std::move(labels), opt.pool));
      }
    }
    for (const auto& o : seq.objects[t]) last[o.id] = {o.box, t};
  }
  return out;
}

}  // namespace tpagt
