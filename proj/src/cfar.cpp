#include "radkit/cfar.hpp"

#include <algorithm>
#include <cmath>

#include "radkit/error.hpp"

namespace radkit {

std::size_t CfarConfig::full_training_count() const {
  const std::size_t outer = (2 * (train_range + guard_range) + 1) * (2 * (train_doppler + guard_doppler) + 1);
  const std::size_t inner = (2 * guard_range + 1) * (2 * guard_doppler + 1);
  return outer - inner;
}

double CfarConfig::effective_alpha() const {
  return alpha > 0 ? alpha : ca_alpha(1e-3, static_cast<std::uint32_t>(full_training_count()));
}

void CfarConfig::validate() const {
  if (train_range < 1 || train_doppler < 1)
    throw Error(ErrorCode::invariant_violation, "CFAR needs at least one training cell per axis");
  if (!(os_rank > 0 && os_rank <= 1)) throw Error(ErrorCode::invariant_violation, "os_rank must be in (0, 1]");
  if (std::isnan(alpha)) throw Error(ErrorCode::invariant_violation, "alpha is NaN");
}

void to_json(nlohmann::json& j, const CfarConfig& c) {
  j = {{"variant", c.variant == CfarVariant::ca ? "ca" : "os"},
       {"train", {c.train_range, c.train_doppler}},
       {"guard", {c.guard_range, c.guard_doppler}},
       {"alpha", c.effective_alpha()},
       {"os_rank", c.os_rank}};
}

void from_json(const nlohmann::json& j, CfarConfig& c) {
  const auto v = j.value("variant", std::string("ca"));
  if (v == "ca") c.variant = CfarVariant::ca;
  else if (v == "os") c.variant = CfarVariant::os;
  else throw Error(ErrorCode::invariant_violation, "unknown CFAR variant '" + v + "'");
  if (auto it = j.find("train"); it != j.end()) {
    auto t = it->get<std::array<std::size_t, 2>>();
    c.train_range = t[0];
    c.train_doppler = t[1];
  }
  if (auto it = j.find("guard"); it != j.end()) {
    auto g = it->get<std::array<std::size_t, 2>>();
    c.guard_range = g[0];
    c.guard_doppler = g[1];
  }
  c.alpha = j.value("alpha", c.alpha);
  c.os_rank = j.value("os_rank", c.os_rank);
  c.validate();
}

std::size_t DetectionMask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

double ca_alpha(double pfa, std::uint32_t n_train) {
  if (!(pfa > 0 && pfa <= 1) || n_train < 1)
    throw Error(ErrorCode::domain_violation, "ca_alpha needs 0 < pfa <= 1 and n_train >= 1");
  const double n = n_train;
  return n * (std::pow(pfa, -1.0 / n) - 1.0);
}

namespace {

/// Summed-area table over the map with the Doppler axis unrolled by `pad` columns on
/// each side, so wrapped rectangles become plain rectangles.
class WrappedIntegral {
 public:
  WrappedIntegral(const Map2D& map, std::size_t pad)
      : rows_(map.rows), cols_(map.cols + 2 * pad), pad_(pad), table_((rows_ + 1) * (cols_ + 1), 0.0) {
    const std::size_t d = map.cols;
    for (std::size_t r = 0; r < rows_; ++r) {
      double row_sum = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) {
        const std::size_t src = (c + d * ((pad_ / d) + 1) - pad_) % d;
        row_sum += map.at(r, src);
        table_[(r + 1) * (cols_ + 1) + c + 1] = table_[r * (cols_ + 1) + c + 1] + row_sum;
      }
    }
  }

  /// Sum over rows [r0, r1) and Doppler columns [k0, k1) given relative to the
  /// original grid (k0 may be negative down to -pad).
  double sum(std::size_t r0, std::size_t r1, long k0, long k1) const {
    const auto c0 = static_cast<std::size_t>(k0 + static_cast<long>(pad_));
    const auto c1 = static_cast<std::size_t>(k1 + static_cast<long>(pad_));
    const std::size_t w = cols_ + 1;
    return table_[r1 * w + c1] - table_[r0 * w + c1] - table_[r1 * w + c0] + table_[r0 * w + c0];
  }

 private:
  std::size_t rows_, cols_, pad_;
  std::vector<double> table_;
};

}  // namespace

DetectionMask cfar_2d(const Map2D& map, const CfarConfig& cfg) {
  cfg.validate();
  const std::size_t n_r = map.rows;
  const std::size_t n_d = map.cols;
  DetectionMask mask = DetectionMask::empty(n_r, n_d);
  if (n_r == 0 || n_d == 0) return mask;

  const std::size_t outer_r = cfg.train_range + cfg.guard_range;
  const std::size_t outer_d = cfg.train_doppler + cfg.guard_doppler;
  if (2 * outer_d + 1 > n_d)
    throw Error(ErrorCode::window_too_large, "Doppler window of " + std::to_string(2 * outer_d + 1) +
                                                 " cells exceeds the " + std::to_string(n_d) + "-bin axis");
  const double alpha = cfg.effective_alpha();
  const long od = static_cast<long>(outer_d);
  const long gd = static_cast<long>(cfg.guard_doppler);

  auto row_span = [n_r](std::size_t n, std::size_t half) {
    const std::size_t lo = n >= half ? n - half : 0;
    const std::size_t hi = std::min(n_r, n + half + 1);
    return std::pair{lo, hi};
  };

  if (cfg.variant == CfarVariant::ca) {
    const WrappedIntegral integral(map, outer_d);
    for (std::size_t n = 0; n < n_r; ++n) {
      const auto [o0, o1] = row_span(n, outer_r);
      const auto [g0, g1] = row_span(n, cfg.guard_range);
      const std::size_t count = (o1 - o0) * (2 * outer_d + 1) - (g1 - g0) * (2 * cfg.guard_doppler + 1);
      if (count == 0) throw Error(ErrorCode::window_too_large, "no training cells at range " + std::to_string(n));
      for (std::size_t k = 0; k < n_d; ++k) {
        const long kl = static_cast<long>(k);
        const double total = integral.sum(o0, o1, kl - od, kl + od + 1) - integral.sum(g0, g1, kl - gd, kl + gd + 1);
        const double noise = total / static_cast<double>(count);
        mask.set(n, k, map.at(n, k) > alpha * noise);
      }
    }
    return mask;
  }

  std::vector<double> training;
  training.reserve(cfg.full_training_count());
  for (std::size_t n = 0; n < n_r; ++n) {
    const auto [o0, o1] = row_span(n, outer_r);
    for (std::size_t k = 0; k < n_d; ++k) {
      training.clear();
      for (std::size_t r = o0; r < o1; ++r) {
        const bool guard_row = (r + cfg.guard_range >= n) && (r <= n + cfg.guard_range);
        for (long dk = -od; dk <= od; ++dk) {
          if (guard_row && std::abs(dk) <= gd) continue;
          const auto kk = static_cast<std::size_t>((static_cast<long>(k) + dk + static_cast<long>(n_d)) %
                                                   static_cast<long>(n_d));
          training.push_back(map.at(r, kk));
        }
      }
      if (training.empty()) throw Error(ErrorCode::window_too_large, "no training cells at range " + std::to_string(n));
      const auto rank = static_cast<std::size_t>(std::ceil(cfg.os_rank * static_cast<double>(training.size())));
      const std::size_t idx = std::clamp<std::size_t>(rank, 1, training.size()) - 1;
      std::nth_element(training.begin(), training.begin() + static_cast<long>(idx), training.end());
      mask.set(n, k, map.at(n, k) > alpha * training[idx]);
    }
  }
  return mask;
}

}  // namespace radkit
