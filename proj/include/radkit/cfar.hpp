/**
 * @file cfar.hpp
 * @brief 2D CA-CFAR and OS-CFAR over Range-Doppler maps.
 *
 * The training region around a cell under test is the rectangle of half-widths
 * (train + guard) minus the guard rectangle of half-widths guard (which contains the
 * cell itself). The Doppler axis wraps circularly; the range axis is clipped at the
 * borders, so edge cells see fewer training cells.
 */
#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "radkit/geometry.hpp"

namespace radkit {

enum class CfarVariant { ca, os };

struct CfarConfig {
  CfarVariant variant = CfarVariant::ca;
  std::size_t train_range = 8;
  std::size_t train_doppler = 4;
  std::size_t guard_range = 2;
  std::size_t guard_doppler = 2;
  double alpha = 0.0;     // <= 0 selects ca_alpha(1e-3, full training count)
  double os_rank = 0.75;  // fraction in (0, 1], OS only

  /// Training cells for an unclipped window.
  std::size_t full_training_count() const;
  /// alpha with the default substituted.
  double effective_alpha() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const CfarConfig& c);
void from_json(const nlohmann::json& j, CfarConfig& c);

struct DetectionMask {
  std::size_t range_bins = 0;
  std::size_t doppler_bins = 0;
  std::vector<std::uint8_t> data;

  static DetectionMask empty(std::size_t range_bins, std::size_t doppler_bins) {
    return {range_bins, doppler_bins, std::vector<std::uint8_t>(range_bins * doppler_bins, 0)};
  }
  bool at(std::size_t n, std::size_t k) const { return data[n * doppler_bins + k] != 0; }
  void set(std::size_t n, std::size_t k, bool v) { data[n * doppler_bins + k] = v ? 1 : 0; }
  std::size_t count() const;

  bool operator==(const DetectionMask&) const = default;
};

/// Detected iff value > alpha * noise estimate (training mean for CA,
/// ceil(os_rank * N)-th smallest training value for OS).
/// Throws window_too_large when some cell has no training cells or the Doppler
/// window would wrap onto itself.
DetectionMask cfar_2d(const Map2D& map, const CfarConfig& cfg);

/// Threshold multiplier giving false-alarm probability `pfa` for CA-CFAR over
/// `n_train` exponentially distributed cells: N (pfa^(-1/N) - 1).
double ca_alpha(double pfa, std::uint32_t n_train);

}  // namespace radkit
