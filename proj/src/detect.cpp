#include "radkit/detect.hpp"

#include <algorithm>
#include <cmath>

#include "radkit/error.hpp"

namespace radkit {
namespace {

struct ClassPick {
  int id = 0;
  double prob = 0.0;
};

ClassPick softmax_argmax(const float* logits, std::size_t n) {
  if (n == 0) return {0, 1.0};
  const double mx = *std::max_element(logits, logits + n);
  double total = 0.0;
  for (std::size_t c = 0; c < n; ++c) total += std::exp(logits[c] - mx);
  std::size_t best = 0;
  for (std::size_t c = 1; c < n; ++c)
    if (logits[c] > logits[best]) best = c;
  return {static_cast<int>(best), std::exp(logits[best] - mx) / total};
}

double logit(double p) {
  p = std::clamp(p, 1e-9, 1.0 - 1e-9);
  return std::log(p / (1.0 - p));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::shape_mismatch, what);
}

}  // namespace

std::vector<std::uint32_t> HeadLayout3D::dims() const {
  return {static_cast<std::uint32_t>(grid_r), static_cast<std::uint32_t>(grid_a), static_cast<std::uint32_t>(grid_d),
          static_cast<std::uint32_t>(anchors), static_cast<std::uint32_t>(channels())};
}

HeadLayout3D HeadLayout3D::of(const TensorContainer& t) {
  t.validate();
  require(t.dtype == DType::f32 && t.dims.size() == 5, "3D head must be an f32 tensor of rank 5");
  require(t.dims[4] >= 7, "3D head needs at least 7 channels");
  return {t.dims[0], t.dims[1], t.dims[2], t.dims[3], t.dims[4] - 7u};
}

std::vector<std::uint32_t> HeadLayout2D::dims() const {
  return {static_cast<std::uint32_t>(grid_w), static_cast<std::uint32_t>(grid_x), static_cast<std::uint32_t>(anchors),
          static_cast<std::uint32_t>(channels())};
}

HeadLayout2D HeadLayout2D::of(const TensorContainer& t) {
  t.validate();
  require(t.dtype == DType::f32 && t.dims.size() == 4, "2D head must be an f32 tensor of rank 4");
  require(t.dims[3] >= 5, "2D head needs at least 5 channels");
  return {t.dims[0], t.dims[1], t.dims[2], t.dims[3] - 5u};
}

TensorContainer make_head3d(const HeadLayout3D& layout, float fill) {
  TensorContainer t;
  t.dtype = DType::f32;
  t.dims = layout.dims();
  t.payload.assign(t.element_count(), fill);
  return t;
}

TensorContainer make_head2d(const HeadLayout2D& layout, float fill) {
  TensorContainer t;
  t.dtype = DType::f32;
  t.dims = layout.dims();
  t.payload.assign(t.element_count(), fill);
  return t;
}

std::vector<Detection3D> decode3d(const TensorContainer& raw, std::span<const BoxSize<3>> anchors,
                                  double obj_threshold, const RadarGeometry& geom) {
  const auto L = HeadLayout3D::of(raw);
  require(L.anchors == anchors.size(), "head has " + std::to_string(L.anchors) + " anchors, anchor set has " +
                                           std::to_string(anchors.size()));
  const double sr = static_cast<double>(geom.range_bins) / static_cast<double>(L.grid_r);
  const double sa = static_cast<double>(geom.azimuth_bins) / static_cast<double>(L.grid_a);
  const double sd = static_cast<double>(geom.doppler_bins) / static_cast<double>(L.grid_d);
  const double period = static_cast<double>(geom.doppler_bins);

  std::vector<Detection3D> out;
  for (std::size_t i = 0; i < L.grid_r; ++i)
    for (std::size_t j = 0; j < L.grid_a; ++j)
      for (std::size_t m = 0; m < L.grid_d; ++m)
        for (std::size_t q = 0; q < L.anchors; ++q) {
          const float* t = &raw.payload[L.offset(i, j, m, q)];
          const double obj = sigmoid(t[6]);
          if (!(obj >= obj_threshold)) continue;
          const auto cls = softmax_argmax(t + 7, L.classes);
          Detection3D d;
          d.objectness = obj;
          d.class_prob = cls.prob;
          double dc = (static_cast<double>(m) + sigmoid(t[2])) * sd;
          dc = std::fmod(dc, period);
          if (dc < 0) dc += period;
          d.box.center = {(static_cast<double>(i) + sigmoid(t[0])) * sr, (static_cast<double>(j) + sigmoid(t[1])) * sa,
                          dc};
          d.box.size = {anchors[q][0] * std::exp(double(t[3])), anchors[q][1] * std::exp(double(t[4])),
                        anchors[q][2] * std::exp(double(t[5]))};
          d.box.class_id = cls.id;
          d.box.score = obj * cls.prob;
          out.push_back(d);
        }
  return out;
}

std::vector<Detection2D> decode2d(const TensorContainer& raw, std::span<const BoxSize<2>> anchors,
                                  const CartesianGrid& grid, double obj_threshold) {
  grid.validate();
  const auto L = HeadLayout2D::of(raw);
  require(L.anchors == anchors.size(), "head has " + std::to_string(L.anchors) + " anchors, anchor set has " +
                                           std::to_string(anchors.size()));
  const double r_max = grid.max_range();
  const double sz = 2.0 * r_max / static_cast<double>(L.grid_w);
  const double sx = r_max / static_cast<double>(L.grid_x);

  std::vector<Detection2D> out;
  for (std::size_t i = 0; i < L.grid_w; ++i)
    for (std::size_t j = 0; j < L.grid_x; ++j)
      for (std::size_t q = 0; q < L.anchors; ++q) {
        const float* t = &raw.payload[L.offset(i, j, q)];
        const double obj = sigmoid(t[4]);
        if (!(obj >= obj_threshold)) continue;
        const auto cls = softmax_argmax(t + 5, L.classes);
        Detection2D d;
        d.objectness = obj;
        d.class_prob = cls.prob;
        d.box.center = {(static_cast<double>(j) + sigmoid(t[0])) * sx,
                        -r_max + (static_cast<double>(i) + sigmoid(t[1])) * sz};
        d.box.size = {anchors[q][0] * std::exp(double(t[2])), anchors[q][1] * std::exp(double(t[3]))};
        d.box.class_id = cls.id;
        d.box.score = obj * cls.prob;
        out.push_back(d);
      }
  return out;
}

namespace {

/// Cell index and fractional offset of coordinate `v` on an axis with `stride`.
std::pair<std::size_t, double> cell_of(double v, double stride, std::size_t cells) {
  const double u = v / stride;
  auto c = static_cast<long>(std::floor(u));
  c = std::clamp<long>(c, 0, static_cast<long>(cells) - 1);
  return {static_cast<std::size_t>(c), u - static_cast<double>(c)};
}

void write_classes(float* t, std::size_t classes, int class_id, float class_logit) {
  for (std::size_t c = 0; c < classes; ++c) t[c] = (static_cast<int>(c) == class_id) ? class_logit : 0.0f;
}

}  // namespace

void encode3d(TensorContainer& raw, const Box3D& box, std::size_t anchor_index, std::span<const BoxSize<3>> anchors,
              const RadarGeometry& geom, float obj_logit, float class_logit) {
  const auto L = HeadLayout3D::of(raw);
  require(anchor_index < L.anchors && L.anchors == anchors.size(), "anchor index out of range");
  const double sr = static_cast<double>(geom.range_bins) / static_cast<double>(L.grid_r);
  const double sa = static_cast<double>(geom.azimuth_bins) / static_cast<double>(L.grid_a);
  const double sd = static_cast<double>(geom.doppler_bins) / static_cast<double>(L.grid_d);
  double dc = std::fmod(box.center[2], static_cast<double>(geom.doppler_bins));
  if (dc < 0) dc += static_cast<double>(geom.doppler_bins);
  const auto [i, fr] = cell_of(box.center[0], sr, L.grid_r);
  const auto [j, fa] = cell_of(box.center[1], sa, L.grid_a);
  const auto [m, fd] = cell_of(dc, sd, L.grid_d);
  float* t = &raw.payload[L.offset(i, j, m, anchor_index)];
  const auto& a = anchors[anchor_index];
  t[0] = static_cast<float>(logit(fr));
  t[1] = static_cast<float>(logit(fa));
  t[2] = static_cast<float>(logit(fd));
  t[3] = static_cast<float>(std::log(box.size[0] / a[0]));
  t[4] = static_cast<float>(std::log(box.size[1] / a[1]));
  t[5] = static_cast<float>(std::log(box.size[2] / a[2]));
  t[6] = obj_logit;
  write_classes(t + 7, L.classes, box.class_id, class_logit);
}

void encode2d(TensorContainer& raw, const Box2D& box, std::size_t anchor_index, std::span<const BoxSize<2>> anchors,
              const CartesianGrid& grid, float obj_logit, float class_logit) {
  const auto L = HeadLayout2D::of(raw);
  require(anchor_index < L.anchors && L.anchors == anchors.size(), "anchor index out of range");
  const double r_max = grid.max_range();
  const double sz = 2.0 * r_max / static_cast<double>(L.grid_w);
  const double sx = r_max / static_cast<double>(L.grid_x);
  const auto [j, fx] = cell_of(box.center[0], sx, L.grid_x);
  const auto [i, fz] = cell_of(box.center[1] + r_max, sz, L.grid_w);
  float* t = &raw.payload[L.offset(i, j, anchor_index)];
  const auto& a = anchors[anchor_index];
  t[0] = static_cast<float>(logit(fx));
  t[1] = static_cast<float>(logit(fz));
  t[2] = static_cast<float>(std::log(box.size[0] / a[0]));
  t[3] = static_cast<float>(std::log(box.size[1] / a[1]));
  t[4] = obj_logit;
  write_classes(t + 5, L.classes, box.class_id, class_logit);
}

std::vector<Detection3D> postprocess(std::span<const Detection3D> dets, double nms_threshold, double doppler_period) {
  std::vector<Box3D> boxes;
  for (const auto& d : dets) boxes.push_back(d.box);
  std::vector<Detection3D> out;
  for (auto i : nms_indices(std::span<const Box3D>(boxes), nms_threshold,
                            [&](const Box3D& a, const Box3D& b) { return iou3d(a, b, doppler_period); }))
    out.push_back(dets[i]);
  return out;
}

std::vector<Detection2D> postprocess(std::span<const Detection2D> dets, double nms_threshold) {
  std::vector<Box2D> boxes;
  for (const auto& d : dets) boxes.push_back(d.box);
  std::vector<Detection2D> out;
  for (auto i : nms_indices(std::span<const Box2D>(boxes), nms_threshold, iou2d)) out.push_back(dets[i]);
  return out;
}

}  // namespace radkit
