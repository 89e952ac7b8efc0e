/**
 * @file detect.hpp
 * @brief Decoding of exported YOLO-style head tensors into boxes.
 *
 * 3D head: f32 tensor (G_r, G_a, G_d, A, 7 + C), channels
 *   (t_x, t_y, t_z, t_w, t_h, t_d, t_o, class logits...)
 * over range, azimuth and Doppler cells with strides grid/G per axis.
 *
 * 2D head: f32 tensor (G_w, G_x, A, 5 + C), rows over the lateral (z) axis and
 * columns over the forward (x) axis of the Cartesian grid, channels
 *   (t_x, t_z, t_w, t_l, t_o, class logits...).
 *
 * center = (cell + sigmoid(t)) * stride, size = anchor * exp(t), objectness =
 * sigmoid(t_o), class probabilities = softmax(class logits).
 */
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "radkit/anchors.hpp"
#include "radkit/geometry.hpp"
#include "radkit/tensorio.hpp"

namespace radkit {

inline constexpr double kObjectnessThreshold = 0.5;
inline constexpr double kNms3dThreshold = 0.1;
inline constexpr double kNms2dThreshold = 0.3;

template <typename Box>
struct Detection {
  Box box;  // box.score = objectness * class_prob
  double objectness = 0.0;
  double class_prob = 0.0;
};

using Detection3D = Detection<Box3D>;
using Detection2D = Detection<Box2D>;

struct HeadLayout3D {
  std::size_t grid_r = 16, grid_a = 16, grid_d = 4, anchors = 6, classes = 6;

  std::size_t channels() const { return 7 + classes; }
  std::vector<std::uint32_t> dims() const;
  std::size_t offset(std::size_t i, std::size_t j, std::size_t m, std::size_t q) const {
    return (((i * grid_a + j) * grid_d + m) * anchors + q) * channels();
  }
  /// Throws shape_mismatch if `tensor` is not an f32 5-D head tensor.
  static HeadLayout3D of(const TensorContainer& tensor);
};

struct HeadLayout2D {
  std::size_t grid_w = 32, grid_x = 16, anchors = 6, classes = 6;

  std::size_t channels() const { return 5 + classes; }
  std::vector<std::uint32_t> dims() const;
  std::size_t offset(std::size_t i, std::size_t j, std::size_t q) const {
    return ((i * grid_x + j) * anchors + q) * channels();
  }
  static HeadLayout2D of(const TensorContainer& tensor);
};

TensorContainer make_head3d(const HeadLayout3D& layout, float fill = 0.0f);
TensorContainer make_head2d(const HeadLayout2D& layout, float fill = 0.0f);

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

/// Throws shape_mismatch if the anchor count or channel count disagrees.
std::vector<Detection3D> decode3d(const TensorContainer& raw, std::span<const BoxSize<3>> anchors,
                                  double obj_threshold = kObjectnessThreshold, const RadarGeometry& geom = {});
std::vector<Detection2D> decode2d(const TensorContainer& raw, std::span<const BoxSize<2>> anchors,
                                  const CartesianGrid& grid, double obj_threshold = kObjectnessThreshold);

/// Writes logits for `box` into its cell with anchor `anchor_index`: exact inverse of
/// decode for the box parameters. Objectness and class logits are set to
/// `obj_logit` and a one-hot of `class_logit` on box.class_id.
void encode3d(TensorContainer& raw, const Box3D& box, std::size_t anchor_index, std::span<const BoxSize<3>> anchors,
              const RadarGeometry& geom = {}, float obj_logit = 10.0f, float class_logit = 10.0f);
void encode2d(TensorContainer& raw, const Box2D& box, std::size_t anchor_index, std::span<const BoxSize<2>> anchors,
              const CartesianGrid& grid, float obj_logit = 10.0f, float class_logit = 10.0f);

std::vector<Detection3D> postprocess(std::span<const Detection3D> dets, double nms_threshold = kNms3dThreshold,
                                     double doppler_period = 64.0);
std::vector<Detection2D> postprocess(std::span<const Detection2D> dets, double nms_threshold = kNms2dThreshold);

}  // namespace radkit
