/**
 * @file annotate.hpp
 * @brief Instance-wise auto-annotation: bridge rigid-body patterns on the RD mask,
 *        lift detections into RAD cells, cluster them with DBSCAN, box the clusters,
 *        and transfer category labels from projected stereo instances.
 */
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "radkit/cfar.hpp"
#include "radkit/dsp.hpp"
#include "radkit/geometry.hpp"
#include "radkit/tensorio.hpp"

namespace radkit {

struct RadCell {
  std::uint32_t range = 0;
  std::uint32_t azimuth = 0;
  std::uint32_t doppler = 0;

  auto operator<=>(const RadCell&) const = default;
};

struct Instance {
  std::vector<RadCell> cells;  // sorted, unique
  std::optional<int> class_id;
  std::string frame_id;
};

struct DbscanConfig {
  double eps = 2.0;
  std::uint32_t min_pts = 3;
  std::array<double, 3> axis_scale{1.0, 1.0, 2.0};  // (range, azimuth, doppler)
  double doppler_period = 64.0;                     // in unscaled Doppler bins

  void validate() const;
};

void to_json(nlohmann::json& j, const DbscanConfig& c);
void from_json(const nlohmann::json& j, DbscanConfig& c);

/// Morphological closing with a (2g+1) x (2g+1) square; Doppler wraps, range clips
/// (dilation pads with 0, erosion with 1, so closing stays extensive and idempotent).
DetectionMask connect_patterns(const DetectionMask& mask, std::size_t half_width = 1);

inline constexpr int kNoise = -1;

/// DBSCAN on (range, azimuth, doppler) points, distance measured after per-axis
/// scaling with a circular Doppler difference. Points are visited in index order
/// and clusters are numbered in discovery order; neighbours include the point
/// itself. Returns one label per point, kNoise for noise.
std::vector<int> dbscan(std::span<const std::array<double, 3>> points, const DbscanConfig& cfg);

/// For every detected RD cell, marks azimuth bins within `azimuth_rel_threshold` of
/// that cell's azimuth peak magnitude, then clusters all marked RAD cells.
std::vector<Instance> extract_instances(const RadCube& rad, const DetectionMask& mask_rd,
                                        double azimuth_rel_threshold, const DbscanConfig& db,
                                        const std::string& frame_id = {});

/// Tightest RAD box (minimal circular Doppler cover) and the Cartesian box around
/// the images of all cells.
std::pair<Box3D, Box2D> instance_to_boxes(const Instance& inst, const RadarGeometry& geom = {});

/// Shortest circular interval [start, start + length) on Z_period covering `values`.
/// Ties go to the smallest start.
std::pair<std::uint32_t, std::uint32_t> minimal_circular_cover(std::span<const std::uint32_t> values,
                                                               std::uint32_t period);

/// Affine map from stereo-frame (x, y, z, 1) to radar bird-eye-view (x, z).
struct ProjectionMatrix {
  Eigen::Matrix<double, 2, 4> m = Eigen::Matrix<double, 2, 4>::Zero();

  std::array<double, 2> apply(const std::array<double, 3>& p) const;
};

struct ProjectionFit {
  ProjectionMatrix projection;
  double rms_residual = 0.0;  // sqrt(mean squared 2D residual norm)
};

/// Least-squares fit over point correspondences; throws rank_deficient with fewer
/// than four or degenerate correspondences.
ProjectionFit fit_projection(std::span<const std::array<double, 3>> stereo_pts,
                             std::span<const std::array<double, 2>> radar_pts);

struct LabeledPoint {
  std::array<double, 2> xz{};  // radar bird-eye-view frame, meters
  int class_id = 0;
};

/// Majority class of labeled points inside each instance's Box2D inflated by
/// `margin_m`; ties go to the class whose inside-point centroid is nearest the box
/// center. Instances with no points keep an empty class.
std::vector<Instance> transfer_labels(std::vector<Instance> instances, std::span<const LabeledPoint> points,
                                      const RadarGeometry& geom = {}, double margin_m = 0.5);

struct AnnotateConfig {
  CfarConfig cfar;
  std::size_t bridge_half_width = 1;
  double azimuth_rel_threshold = 0.5;
  DbscanConfig dbscan;
  double label_margin_m = 0.5;
  RadarGeometry geometry;
};

void to_json(nlohmann::json& j, const AnnotateConfig& c);
void from_json(const nlohmann::json& j, AnnotateConfig& c);

struct FrameAnnotation {
  AnnotationRecord record;
  std::vector<Instance> instances;
  RdMap rd;
  DetectionMask mask;  // after pattern connection
};

/// RD map -> CFAR -> pattern connection -> instances -> boxes -> labels for one frame.
FrameAnnotation annotate_frame(const RadCube& rad, const AnnotateConfig& cfg, std::span<const LabeledPoint> labels,
                               const std::string& frame_id);

}  // namespace radkit
