/**
 * @file pipeline.hpp
 * @brief Frame-parallel auto-annotation over a dataset directory.
 */
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radkit/config.hpp"

namespace radkit {

TensorContainer to_tensor(const Map2D& map);
Map2D map_from_tensor(const TensorContainer& tensor);

/// Stereo camera (x right, y down, z forward) to radar bird's-eye view (x forward,
/// z lateral), used when a label file carries no projection of its own.
ProjectionMatrix default_stereo_projection();

/// Labeled points for one frame. Accepts a list of {"xyz": [x, y, z], "class": c}
/// stereo points (projected to the radar frame) or {"xz": [x, z], "class": c} points
/// already in the radar frame, either bare or as {"points": [...], "projection":
/// [[4 values], [4 values]]}.
std::vector<LabeledPoint> read_labels(const std::filesystem::path& path);
std::vector<LabeledPoint> parse_labels(const nlohmann::json& doc);

struct FrameError {
  std::string frame_id;
  std::string message;
};

struct PipelineResult {
  std::vector<std::string> processed;  // in input order
  std::vector<FrameError> errors;      // in input order
  std::optional<NormalizationStats> stats;
};

/// ADC -> RAD -> RD -> CFAR -> pattern connection -> instances -> boxes -> labels for
/// each frame, on `jobs` workers (0: config default). Writes RD/RA maps, stats.json
/// and annos.jsonl. Records of frames outside `frame_ids` are kept; a rerun with the
/// same inputs rewrites identical files. A failing frame is reported in `errors` and
/// does not stop the others. An empty frame list writes nothing.
PipelineResult run_pipeline(const ProjectConfig& cfg, std::span<const std::string> frame_ids, unsigned jobs = 0);

}  // namespace radkit
