/**
 * @file eval.hpp
 * @brief Greedy detection matching, all-point interpolated AP, dataset-level
 *        reports at IoU 0.1/0.3/0.5/0.7 and class-stratified dataset splits.
 */
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "radkit/boxes.hpp"
#include "radkit/tensorio.hpp"

namespace radkit {

inline constexpr std::array<double, 4> kIouThresholds{0.1, 0.3, 0.5, 0.7};

enum class EvalMode { d3, d2 };

std::string to_string(EvalMode m);
EvalMode eval_mode_from_string(const std::string& s);

struct MatchResult {
  std::vector<std::size_t> order;  // detection indices, score descending, ties by index
  std::vector<std::uint8_t> tp;    // per entry of `order`: 1 = TP, 0 = FP
  std::size_t n_tp = 0;
  std::size_t n_fp = 0;
  std::size_t n_fn = 0;
};

/// Detections without a score rank as score 1.0.
double score_of(const Box3D& b);
double score_of(const Box2D& b);

/// Greedy matching: each detection, in score order, takes the unmatched GT of the
/// same class with the highest IoU >= threshold (first such GT on ties).
template <typename Box>
MatchResult match(std::span<const Box> dets, std::span<const Box> gts,
                  const std::function<double(const Box&, const Box&)>& iou, double threshold);

/// All-point interpolated AP from a score-ordered TP/FP sequence; nullopt if n_gt == 0.
std::optional<double> average_precision(std::span<const std::uint8_t> tp_sorted, std::size_t n_gt);

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t n_gt = 0;
};

struct EvalReport {
  EvalMode mode = EvalMode::d3;
  std::vector<std::string> class_names;
  std::vector<double> thresholds;
  std::vector<std::vector<std::optional<double>>> ap;  // [threshold][class], nullopt without GT
  std::vector<std::vector<MatchCounts>> counts;       // [threshold][class]
  std::vector<std::optional<double>> map;             // mean over classes with GT
  std::vector<std::optional<double>> pooled_ap;       // one PR curve over all classes
};

void to_json(nlohmann::json& j, const EvalReport& r);

/// Pooled over frames. `dets[f]` and `gts[f]` are the boxes of frame f. Boxes without
/// a class (-1) are ignored on both sides; other detection classes must be in range.
template <typename Box>
EvalReport evaluate_boxes(const std::vector<std::vector<Box>>& dets, const std::vector<std::vector<Box>>& gts,
                          const std::vector<std::string>& class_names, EvalMode mode,
                          std::span<const double> thresholds = kIouThresholds, double doppler_period = 64.0);

/// Frames are paired by frame_id; a GT frame with no detection record has no
/// detections. Throws class_list_mismatch if records disagree on class names.
EvalReport evaluate(const std::vector<AnnotationRecord>& dets, const std::vector<AnnotationRecord>& gts,
                    EvalMode mode, const std::vector<std::string>& class_names = default_class_names());

struct FrameClasses {
  std::string frame_id;
  std::vector<int> classes;  // one entry per object
};

struct SplitResult {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Groups frames by sorted class multiset and moves floor(n * test_ratio) of each
/// group to test. The remaining fractional shares are assigned one frame at a time to
/// the group whose move best evens out the per-class test shares, until the test set
/// holds round(N * test_ratio) frames. Deterministic per seed; sizes do not depend on it.
SplitResult split_dataset(std::span<const FrameClasses> frames, double test_ratio, std::uint64_t seed);

/// Object-count share of class c that landed in `subset`.
std::vector<double> class_shares(std::span<const FrameClasses> frames, const std::vector<std::string>& subset,
                                 std::size_t n_classes);

}  // namespace radkit
