/**
 * @file losses.hpp
 * @brief Reference implementations of the detector training loss
 *        L_total = beta * L_box + L_obj + L_class, with analytic gradients.
 *
 * L_box: squared error on centers plus squared error on square roots of sizes,
 * averaged over positive slots. L_obj: focal loss over every (cell, anchor) slot,
 * alpha 1.0 for positives and 0.01 for negatives, gamma 2, probabilities clamped to
 * [1e-7, 1 - 1e-7], averaged over all slots. L_class: softmax cross-entropy averaged
 * over positives.
 */
#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "radkit/anchors.hpp"
#include "radkit/detect.hpp"

namespace radkit {

struct LossConfig {
  double beta = 0.1;
  double focal_alpha_pos = 1.0;
  double focal_alpha_neg = 0.01;
  double focal_gamma = 2.0;
  double prob_clamp = 1e-7;
};

struct LossBreakdown {
  double l_box = 0.0;
  double l_obj = 0.0;
  double l_class = 0.0;
  double l_total = 0.0;
  double beta = 0.1;
  double focal_alpha_neg = 0.01;
  double focal_gamma = 2.0;
};

void to_json(nlohmann::json& j, const LossBreakdown& b);

/// Mean over pairs of the center and sqrt-size squared errors. Throws negative_size.
double box_loss(std::span<const Box3D> pred, std::span<const Box3D> target);
double box_loss(std::span<const Box2D> pred, std::span<const Box2D> target);

/// Mean focal loss over all cells; `positive[i]` marks object cells.
double focal_objectness_loss(std::span<const double> probs, std::span<const std::uint8_t> positive,
                             const LossConfig& cfg = {});

/// Mean softmax cross-entropy; `logits` is row-major (n, n_classes).
double class_loss(std::span<const double> logits, std::size_t n_classes, std::span<const int> targets);

LossBreakdown total_loss(double l_box, double l_obj, double l_class, const LossConfig& cfg = {});

struct HeadLoss {
  LossBreakdown breakdown;
  std::vector<double> gradient;  // d l_total / d logit, same layout as the head tensor
  std::size_t positives = 0;
};

/// Loss of a 3D head given target boxes. Each target claims the cell holding its
/// center and the anchor chosen by assign_anchor; a slot already claimed keeps its
/// first target.
HeadLoss head_loss3d(const HeadLayout3D& layout, std::span<const double> logits, std::span<const Box3D> targets,
                     std::span<const BoxSize<3>> anchors, const LossConfig& cfg = {}, const RadarGeometry& geom = {});
HeadLoss head_loss3d(const TensorContainer& raw, std::span<const Box3D> targets, std::span<const BoxSize<3>> anchors,
                     const LossConfig& cfg = {}, const RadarGeometry& geom = {});

}  // namespace radkit
