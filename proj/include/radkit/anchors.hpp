/**
 * @file anchors.hpp
 * @brief K-means anchor fitting with the 1 - IoU distance between origin-centered boxes.
 */
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

namespace radkit {

template <std::size_t D>
using BoxSize = std::array<double, D>;

template <std::size_t D>
struct AnchorSet {
  std::vector<BoxSize<D>> anchors;
  double mean_error = 0.0;               // mean over boxes of 1 - IoU with the nearest anchor
  std::vector<double> error_history;     // mean_error after each accepted iteration
  std::uint32_t iterations = 0;

  std::uint32_t k() const { return static_cast<std::uint32_t>(anchors.size()); }
};

using AnchorSet3 = AnchorSet<3>;
using AnchorSet2 = AnchorSet<2>;

inline constexpr double kAnchorErrorThreshold = 0.10;
inline constexpr std::uint32_t kMaxKmeansIterations = 300;

/// IoU of two boxes sharing a center.
template <std::size_t D>
double centered_iou(const BoxSize<D>& a, const BoxSize<D>& b);

/// Index of the anchor with the smallest 1 - IoU; ties go to the lowest index.
template <std::size_t D>
std::size_t assign_anchor(const BoxSize<D>& size, std::span<const BoxSize<D>> anchors);

/// k-means++ seeded from `seed`, Lloyd iterations to an assignment fixed point (or
/// 300 iterations), centroid = per-dimension mean of members. The first update from the
/// seeds is always applied; a later update that would raise mean_error is rejected
/// and iteration stops, so error_history (recorded from the first update) is
/// non-increasing. `restarts` independent seedings are tried and the best kept.
/// Throws insufficient_boxes when fewer than k sizes are given. Sets `warned` when
/// the final mean_error exceeds 10%.
template <std::size_t D>
AnchorSet<D> fit_anchors(std::span<const BoxSize<D>> sizes, std::uint32_t k, std::uint64_t seed,
                         std::uint32_t restarts = 4, bool* warned = nullptr);

template <std::size_t D>
double mean_anchor_error(std::span<const BoxSize<D>> sizes, std::span<const BoxSize<D>> anchors);

template <std::size_t D>
void to_json(nlohmann::json& j, const AnchorSet<D>& a) {
  j = {{"dim", D}, {"k", a.k()}, {"anchors", a.anchors}, {"mean_error", a.mean_error}, {"iterations", a.iterations}};
}

template <std::size_t D>
void from_json(const nlohmann::json& j, AnchorSet<D>& a) {
  if (j.value("dim", D) != D) throw nlohmann::json::other_error::create(501, "anchor dimension mismatch", &j);
  a.anchors = j.at("anchors").get<std::vector<BoxSize<D>>>();
  a.mean_error = j.value("mean_error", 0.0);
  a.iterations = j.value("iterations", 0u);
}

}  // namespace radkit
