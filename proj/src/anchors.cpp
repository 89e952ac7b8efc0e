#include "radkit/anchors.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "radkit/error.hpp"

namespace radkit {

template <std::size_t D>
double centered_iou(const BoxSize<D>& a, const BoxSize<D>& b) {
  double inter = 1.0, va = 1.0, vb = 1.0;
  for (std::size_t i = 0; i < D; ++i) {
    inter *= std::min(a[i], b[i]);
    va *= a[i];
    vb *= b[i];
  }
  const double uni = va + vb - inter;
  return uni > 0 ? inter / uni : 0.0;
}

template <std::size_t D>
std::size_t assign_anchor(const BoxSize<D>& size, std::span<const BoxSize<D>> anchors) {
  if (anchors.empty()) throw Error(ErrorCode::invariant_violation, "empty anchor set");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double d = 1.0 - centered_iou(size, anchors[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

template <std::size_t D>
double mean_anchor_error(std::span<const BoxSize<D>> sizes, std::span<const BoxSize<D>> anchors) {
  if (sizes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : sizes) total += 1.0 - centered_iou(s, anchors[assign_anchor(s, anchors)]);
  return total / static_cast<double>(sizes.size());
}

namespace {

template <std::size_t D>
std::vector<BoxSize<D>> kmeanspp_init(std::span<const BoxSize<D>> sizes, std::uint32_t k, std::mt19937_64& rng) {
  std::vector<BoxSize<D>> centers;
  std::uniform_int_distribution<std::size_t> pick(0, sizes.size() - 1);
  centers.push_back(sizes[pick(rng)]);
  std::vector<double> d2(sizes.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, 1.0 - centered_iou(sizes[i], c));
      d2[i] = best * best;
      total += d2[i];
    }
    if (!(total > 0)) {
      // Every box already coincides with a center: pad with exact copies.
      while (centers.size() < k) centers.push_back(centers[centers.size() % centers.size()]);
      break;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    std::size_t chosen = sizes.size() - 1;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      target -= d2[i];
      if (target < 0 && d2[i] > 0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(sizes[chosen]);
  }
  return centers;
}

template <std::size_t D>
AnchorSet<D> lloyd(std::span<const BoxSize<D>> sizes, std::vector<BoxSize<D>> centers) {
  AnchorSet<D> out;
  std::vector<std::size_t> assign(sizes.size(), std::numeric_limits<std::size_t>::max());
  double err = mean_anchor_error<D>(sizes, centers);

  // The first update from the seeds is always taken; later ones must not raise the error.
  for (std::uint32_t it = 0; it < kMaxKmeansIterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const std::size_t a = assign_anchor<D>(sizes[i], centers);
      changed = changed || a != assign[i];
      assign[i] = a;
    }
    if (!changed) break;

    std::vector<BoxSize<D>> next = centers;
    std::vector<std::size_t> counts(centers.size(), 0);
    std::vector<BoxSize<D>> sums(centers.size(), BoxSize<D>{});
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      ++counts[assign[i]];
      for (std::size_t d = 0; d < D; ++d) sums[assign[i]][d] += sizes[i][d];
    }
    for (std::size_t c = 0; c < centers.size(); ++c)
      if (counts[c] > 0)
        for (std::size_t d = 0; d < D; ++d) next[c][d] = sums[c][d] / static_cast<double>(counts[c]);

    const double next_err = mean_anchor_error<D>(sizes, next);
    if (it > 0 && next_err > err) break;
    centers = std::move(next);
    err = next_err;
    out.error_history.push_back(err);
    ++out.iterations;
  }
  out.anchors = std::move(centers);
  out.mean_error = err;
  return out;
}

}  // namespace

template <std::size_t D>
AnchorSet<D> fit_anchors(std::span<const BoxSize<D>> sizes, std::uint32_t k, std::uint64_t seed,
                         std::uint32_t restarts, bool* warned) {
  if (k == 0 || sizes.size() < k)
    throw Error(ErrorCode::insufficient_boxes,
                "need at least k=" + std::to_string(k) + " boxes, got " + std::to_string(sizes.size()));
  for (const auto& s : sizes)
    for (double v : s)
      if (!(v > 0)) throw Error(ErrorCode::invariant_violation, "box sizes must be > 0");

  std::mt19937_64 rng(seed);
  AnchorSet<D> best;
  best.mean_error = std::numeric_limits<double>::infinity();
  for (std::uint32_t r = 0; r < std::max(1u, restarts); ++r) {
    auto candidate = lloyd<D>(sizes, kmeanspp_init<D>(sizes, k, rng));
    if (candidate.mean_error < best.mean_error) best = std::move(candidate);
  }
  const bool over = best.mean_error > kAnchorErrorThreshold;
  if (warned) *warned = over;
  return best;
}

template double centered_iou<2>(const BoxSize<2>&, const BoxSize<2>&);
template double centered_iou<3>(const BoxSize<3>&, const BoxSize<3>&);
template std::size_t assign_anchor<2>(const BoxSize<2>&, std::span<const BoxSize<2>>);
template std::size_t assign_anchor<3>(const BoxSize<3>&, std::span<const BoxSize<3>>);
template double mean_anchor_error<2>(std::span<const BoxSize<2>>, std::span<const BoxSize<2>>);
template double mean_anchor_error<3>(std::span<const BoxSize<3>>, std::span<const BoxSize<3>>);
template AnchorSet<2> fit_anchors<2>(std::span<const BoxSize<2>>, std::uint32_t, std::uint64_t, std::uint32_t, bool*);
template AnchorSet<3> fit_anchors<3>(std::span<const BoxSize<3>>, std::uint32_t, std::uint64_t, std::uint32_t, bool*);

}  // namespace radkit
