#include "radkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "radkit/error.hpp"

namespace radkit {

void to_json(nlohmann::json& j, const LossBreakdown& b) {
  j = {{"l_box", b.l_box},
       {"l_obj", b.l_obj},
       {"l_class", b.l_class},
       {"l_total", b.l_total},
       {"beta", b.beta},
       {"focal_alpha_neg", b.focal_alpha_neg},
       {"focal_gamma", b.focal_gamma}};
}

namespace {

template <typename Box>
double box_loss_impl(std::span<const Box> pred, std::span<const Box> target) {
  if (pred.size() != target.size()) throw Error(ErrorCode::shape_mismatch, "box_loss needs matched pairs");
  if (pred.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t d = 0; d < pred[i].center.size(); ++d) {
      if (pred[i].size[d] < 0 || target[i].size[d] < 0)
        throw Error(ErrorCode::negative_size, "box_loss got a negative size");
      const double dc = pred[i].center[d] - target[i].center[d];
      const double ds = std::sqrt(pred[i].size[d]) - std::sqrt(target[i].size[d]);
      total += dc * dc + ds * ds;
    }
  }
  return total / static_cast<double>(pred.size());
}

struct FocalTerm {
  double value = 0.0;
  double d_logit = 0.0;  // derivative w.r.t. the pre-sigmoid logit
};

FocalTerm focal_term(double p, bool positive, const LossConfig& cfg, bool want_grad) {
  const double lo = cfg.prob_clamp;
  const double hi = 1.0 - cfg.prob_clamp;
  const bool clamped = p < lo || p > hi;
  const double pc = std::clamp(p, lo, hi);
  const double g = cfg.focal_gamma;
  FocalTerm out;
  if (positive) {
    out.value = -cfg.focal_alpha_pos * std::pow(1 - pc, g) * std::log(pc);
    if (want_grad && !clamped) {
      const double df_dp = cfg.focal_alpha_pos * (g * std::pow(1 - pc, g - 1) * std::log(pc) - std::pow(1 - pc, g) / pc);
      out.d_logit = df_dp * pc * (1 - pc);
    }
  } else {
    out.value = -cfg.focal_alpha_neg * std::pow(pc, g) * std::log(1 - pc);
    if (want_grad && !clamped) {
      const double df_dp =
          -cfg.focal_alpha_neg * (g * std::pow(pc, g - 1) * std::log(1 - pc) - std::pow(pc, g) / (1 - pc));
      out.d_logit = df_dp * pc * (1 - pc);
    }
  }
  return out;
}

/// log-sum-exp cross-entropy of one row; fills softmax into `prob` when given.
double cross_entropy(const double* logits, std::size_t n, int target, double* prob) {
  if (target < 0 || static_cast<std::size_t>(target) >= n)
    throw Error(ErrorCode::invariant_violation, "class target outside the class list");
  const double mx = *std::max_element(logits, logits + n);
  double total = 0.0;
  for (std::size_t c = 0; c < n; ++c) total += std::exp(logits[c] - mx);
  if (prob)
    for (std::size_t c = 0; c < n; ++c) prob[c] = std::exp(logits[c] - mx) / total;
  return std::log(total) + mx - logits[target];
}

}  // namespace

double box_loss(std::span<const Box3D> pred, std::span<const Box3D> target) { return box_loss_impl(pred, target); }
double box_loss(std::span<const Box2D> pred, std::span<const Box2D> target) { return box_loss_impl(pred, target); }

double focal_objectness_loss(std::span<const double> probs, std::span<const std::uint8_t> positive,
                             const LossConfig& cfg) {
  if (probs.size() != positive.size()) throw Error(ErrorCode::shape_mismatch, "probs and mask differ in length");
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) total += focal_term(probs[i], positive[i] != 0, cfg, false).value;
  return total / static_cast<double>(probs.size());
}

double class_loss(std::span<const double> logits, std::size_t n_classes, std::span<const int> targets) {
  if (n_classes == 0 || logits.size() != targets.size() * n_classes)
    throw Error(ErrorCode::shape_mismatch, "class logits do not match targets");
  if (targets.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i)
    total += cross_entropy(&logits[i * n_classes], n_classes, targets[i], nullptr);
  return total / static_cast<double>(targets.size());
}

LossBreakdown total_loss(double l_box, double l_obj, double l_class, const LossConfig& cfg) {
  LossBreakdown b;
  b.l_box = l_box;
  b.l_obj = l_obj;
  b.l_class = l_class;
  b.beta = cfg.beta;
  b.focal_alpha_neg = cfg.focal_alpha_neg;
  b.focal_gamma = cfg.focal_gamma;
  b.l_total = cfg.beta * l_box + l_obj + l_class;
  return b;
}

HeadLoss head_loss3d(const HeadLayout3D& L, std::span<const double> logits, std::span<const Box3D> targets,
                     std::span<const BoxSize<3>> anchors, const LossConfig& cfg, const RadarGeometry& geom) {
  const std::size_t n_slots = L.grid_r * L.grid_a * L.grid_d * L.anchors;
  if (logits.size() != n_slots * L.channels()) throw Error(ErrorCode::shape_mismatch, "logits do not match layout");
  if (anchors.size() != L.anchors) throw Error(ErrorCode::shape_mismatch, "anchor count does not match layout");

  const std::array<double, 3> stride{static_cast<double>(geom.range_bins) / static_cast<double>(L.grid_r),
                                     static_cast<double>(geom.azimuth_bins) / static_cast<double>(L.grid_a),
                                     static_cast<double>(geom.doppler_bins) / static_cast<double>(L.grid_d)};
  const std::array<std::size_t, 3> cells{L.grid_r, L.grid_a, L.grid_d};

  // slot offset -> target index
  std::map<std::size_t, std::size_t> positives;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto& b = targets[t];
    for (double s : b.size)
      if (!(s > 0)) throw Error(ErrorCode::negative_size, "target box sizes must be > 0");
    std::array<std::size_t, 3> idx{};
    for (int d = 0; d < 3; ++d) {
      double c = b.center[d];
      if (d == 2) {
        c = std::fmod(c, static_cast<double>(geom.doppler_bins));
        if (c < 0) c += static_cast<double>(geom.doppler_bins);
      }
      idx[d] = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(std::floor(c / stride[d])), 0,
                                                         static_cast<long>(cells[d]) - 1));
    }
    const std::size_t q = assign_anchor<3>(b.size, anchors);
    positives.try_emplace(L.offset(idx[0], idx[1], idx[2], q), t);
  }

  HeadLoss out;
  out.gradient.assign(logits.size(), 0.0);
  out.positives = positives.size();
  const double n_pos = static_cast<double>(std::max<std::size_t>(1, positives.size()));

  double l_box = 0.0, l_class = 0.0, l_obj = 0.0;
  std::vector<double> prob(L.classes);
  for (const auto& [off, t] : positives) {
    const auto& tgt = targets[t];
    const std::size_t slot = off / L.channels();
    const std::size_t q = slot % L.anchors;
    const std::size_t cell = slot / L.anchors;
    const std::array<std::size_t, 3> idx{cell / (L.grid_a * L.grid_d), (cell / L.grid_d) % L.grid_a, cell % L.grid_d};
    for (int d = 0; d < 3; ++d) {
      double tc = tgt.center[d];
      if (d == 2) {
        tc = std::fmod(tc, static_cast<double>(geom.doppler_bins));
        if (tc < 0) tc += static_cast<double>(geom.doppler_bins);
      }
      const double s = sigmoid(logits[off + d]);
      const double pc = (static_cast<double>(idx[d]) + s) * stride[d];
      const double dc = pc - tc;
      l_box += dc * dc;
      out.gradient[off + d] += cfg.beta * 2.0 * dc * stride[d] * s * (1 - s) / n_pos;

      const double sqrt_p = std::sqrt(anchors[q][d]) * std::exp(logits[off + 3 + d] / 2.0);
      const double ds = sqrt_p - std::sqrt(tgt.size[d]);
      l_box += ds * ds;
      out.gradient[off + 3 + d] += cfg.beta * ds * sqrt_p / n_pos;
    }
    if (L.classes > 0) {
      const int target_class = std::clamp(tgt.class_id, 0, static_cast<int>(L.classes) - 1);
      l_class += cross_entropy(&logits[off + 7], L.classes, target_class, prob.data());
      for (std::size_t c = 0; c < L.classes; ++c)
        out.gradient[off + 7 + c] += (prob[c] - (static_cast<int>(c) == target_class ? 1.0 : 0.0)) / n_pos;
    }
  }

  const double n_all = static_cast<double>(n_slots);
  for (std::size_t slot = 0; slot < n_slots; ++slot) {
    const std::size_t off = slot * L.channels();
    const auto term = focal_term(sigmoid(logits[off + 6]), positives.contains(off), cfg, true);
    l_obj += term.value;
    out.gradient[off + 6] += term.d_logit / n_all;
  }

  out.breakdown = total_loss(positives.empty() ? 0.0 : l_box / n_pos, l_obj / n_all,
                             positives.empty() ? 0.0 : l_class / n_pos, cfg);
  return out;
}

HeadLoss head_loss3d(const TensorContainer& raw, std::span<const Box3D> targets, std::span<const BoxSize<3>> anchors,
                     const LossConfig& cfg, const RadarGeometry& geom) {
  const auto L = HeadLayout3D::of(raw);
  std::vector<double> logits(raw.payload.begin(), raw.payload.end());
  return head_loss3d(L, logits, targets, anchors, cfg, geom);
}

}  // namespace radkit
