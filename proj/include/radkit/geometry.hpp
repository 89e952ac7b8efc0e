/**
 * @file geometry.hpp
 * @brief Box algebra shared by annotation, decoding and evaluation.
 *
 * Conventions: range and azimuth are linear axes, Doppler is periodic. An RAD box
 * coordinate u corresponds to the physical bin value u - 0.5, so cell k (spanning
 * [k, k+1)) is centered on bin value k. Azimuth bin value a maps to
 * sin(theta) = a / (azimuth_bins / 2) - 1, i.e. boresight sits at azimuth_bins / 2.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "radkit/boxes.hpp"
#include "radkit/error.hpp"

namespace radkit {

/// Maps RAD bins to physical units. The meter and m/s scales are display constants.
struct RadarGeometry {
  std::size_t range_bins = 256;
  std::size_t azimuth_bins = 256;
  std::size_t doppler_bins = 64;
  double range_m_per_bin = 0.1953;
  double doppler_mps_per_bin = 0.4183;

  double max_range_m() const { return range_m_per_bin * static_cast<double>(range_bins); }
  double range_m(double bin_value) const { return bin_value * range_m_per_bin; }
  double sin_azimuth(double bin_value) const;
  double azimuth_rad(double bin_value) const;
  /// Fractional azimuth bin value for an angle, inverse of azimuth_rad.
  double azimuth_bin(double theta_rad) const;
  double doppler_mps(double bin_value) const {
    return (bin_value - static_cast<double>(doppler_bins) / 2.0) * doppler_mps_per_bin;
  }
};

/// Bird-eye-view raster: x forward in [0, R_max], z lateral in [-R_max, R_max].
/// Rows index z (width), columns index x (depth).
struct CartesianGrid {
  std::size_t depth_cells = 256;
  std::size_t width_cells = 512;
  double meters_per_cell = 0.1953;

  static CartesianGrid for_geometry(const RadarGeometry& geom, std::size_t depth_cells = 256);

  double max_range() const { return meters_per_cell * static_cast<double>(depth_cells); }
  double x_of_column(double col) const { return col * meters_per_cell; }
  double z_of_row(double row) const { return row * meters_per_cell - max_range(); }
  /// Throws invariant_violation unless width == 2 * depth and the cell size is positive.
  void validate() const;
};

/// Dense row-major real raster.
struct Map2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  static Map2D zeros(std::size_t rows, std::size_t cols) { return {rows, cols, std::vector<double>(rows * cols)}; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// (r, theta) -> (x forward, z lateral); theta in [-pi/2, pi/2].
std::array<double, 2> polar_to_cart(double r, double theta);
/// Inverse of polar_to_cart for x >= 0.
std::array<double, 2> cart_to_polar(double x, double z);

/// Bounding box (x_min, x_max, z_min, z_max) of the Cartesian image of RAD cell
/// (range_cell, azimuth_cell), i.e. of the annular sector it covers.
std::array<double, 4> cell_cartesian_bounds(std::size_t range_cell, std::size_t azimuth_cell,
                                            const RadarGeometry& geom);

/// Samples an (range, azimuth) map onto `grid` by bilinear interpolation; out of view -> 0.
Map2D resample_ra_to_cart(const Map2D& ra_map, const CartesianGrid& grid, const RadarGeometry& geom);

/// Length of [a_lo, a_hi] intersected with [b_lo, b_hi].
inline double interval_overlap(double a_lo, double a_hi, double b_lo, double b_hi) {
  return std::max(0.0, std::min(a_hi, b_hi) - std::max(a_lo, b_lo));
}

/// Measure of the intersection of two arcs on a circle of circumference `period`.
/// Arcs are given by center and length (length <= period).
double circular_overlap(double center_a, double len_a, double center_b, double len_b, double period);

double iou3d(const Box3D& a, const Box3D& b, double doppler_period = 64.0);
double iou2d(const Box2D& a, const Box2D& b);

/// Class-wise greedy NMS. Returns kept indices in selection order: highest score
/// first, ties to the lower input index. Boxes of the same class whose IoU with a
/// kept box exceeds `iou_threshold` are dropped.
template <typename Box, typename IouFn>
std::vector<std::size_t> nms_indices(std::span<const Box> boxes, double iou_threshold, IouFn&& iou) {
  for (const auto& b : boxes)
    if (!b.score) throw Error(ErrorCode::invariant_violation, "nms requires scored boxes");
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return *boxes[l].score > *boxes[r].score; });
  std::vector<char> dropped(boxes.size(), 0);
  std::vector<std::size_t> kept;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (dropped[i]) continue;
    kept.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!dropped[j] && boxes[j].class_id == boxes[i].class_id && iou(boxes[i], boxes[j]) > iou_threshold)
        dropped[j] = 1;
    }
  }
  return kept;
}

template <typename Box, typename IouFn>
std::vector<Box> nms(std::span<const Box> boxes, double iou_threshold, IouFn&& iou) {
  std::vector<Box> out;
  for (auto i : nms_indices(boxes, iou_threshold, iou)) out.push_back(boxes[i]);
  return out;
}

inline std::vector<Box3D> nms3d(std::span<const Box3D> boxes, double iou_threshold, double doppler_period = 64.0) {
  return nms(boxes, iou_threshold, [&](const Box3D& a, const Box3D& b) { return iou3d(a, b, doppler_period); });
}

inline std::vector<Box2D> nms2d(std::span<const Box2D> boxes, double iou_threshold) {
  return nms(boxes, iou_threshold, [](const Box2D& a, const Box2D& b) { return iou2d(a, b); });
}

}  // namespace radkit
