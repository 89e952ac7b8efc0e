/**
 * @file dsp.hpp
 * @brief ADC -> Range-Azimuth-Doppler processing, log-magnitude, global
 *        normalization and Range-Doppler map formation.
 *
 * Forward FFTs are unnormalized. Azimuth and Doppler axes are fft-shifted so that
 * zero Doppler is bin doppler/2 and boresight is bin azimuth/2. The antenna axis is
 * zero-padded at the tail to `azimuth_bins` before its FFT.
 */
#pragma once

#include <cstddef>
#include <memory>
#include <span>

#include "json.hpp"
#include "radkit/geometry.hpp"
#include "radkit/tensorio.hpp"

namespace radkit {

enum class Window { rectangular, hann };

struct DspConfig {
  Shape3 adc_shape = kAdcShape;
  std::size_t azimuth_bins = 256;
  Window window = Window::rectangular;  // applied along range and Doppler
  bool normalize_by_std = false;         // default divides by the variance

  Shape3 rad_shape() const { return {adc_shape.d0, azimuth_bins, adc_shape.d2}; }
};

void to_json(nlohmann::json& j, const DspConfig& c);
void from_json(const nlohmann::json& j, DspConfig& c);

inline constexpr double kLogEpsilon = 1e-10;

/// Holds FFT plans and scratch space for one processing thread. Not shareable
/// across threads; construct one per worker.
class RadProcessor {
 public:
  explicit RadProcessor(DspConfig config = {});
  ~RadProcessor();
  RadProcessor(const RadProcessor&) = delete;
  RadProcessor& operator=(const RadProcessor&) = delete;
  RadProcessor(RadProcessor&&) noexcept;
  RadProcessor& operator=(RadProcessor&&) noexcept;

  const DspConfig& config() const { return config_; }

  /// Throws shape_mismatch if the cube does not match the configured ADC shape.
  RadCube process(const AdcCube& adc);

 private:
  struct Plans;
  DspConfig config_;
  std::unique_ptr<Plans> plans_;
};

/// One-shot convenience wrapper around RadProcessor.
RadCube rad_from_adc(const AdcCube& adc, const DspConfig& config = {});

/// ln(|z| + 1e-10) elementwise. Requires stage complex.
RadCube log_magnitude(const RadCube& rad);

/// Streaming population mean/variance over every cell of every frame.
class StatsAccumulator {
 public:
  /// Requires stage log_magnitude.
  void add(const RadCube& frame);
  void add(std::span<const float> cells);
  /// Folds in another accumulator's moments (Chan's pairwise update).
  void merge(const StatsAccumulator& other);
  std::uint64_t count() const { return count_; }
  /// Throws empty_dataset with no cells seen, zero_variance for a degenerate dataset.
  NormalizationStats finish() const;

 private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

NormalizationStats compute_stats(std::span<const RadCube> frames);

/// (I - mean) / variance, or / sqrt(variance) when by_std is set.
RadCube normalize(const RadCube& rad, const NormalizationStats& stats, bool by_std = false);

using RdMap = Map2D;

/// RD[n,k] = sum over azimuth of |RAD[n,a,k]|^2. Requires stage complex.
RdMap rd_map(const RadCube& rad);
/// RA[n,a] = sum over Doppler of |RAD[n,a,k]|^2. Requires stage complex.
Map2D ra_map(const RadCube& rad);

}  // namespace radkit
