#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "radkit/tensorio.hpp"

namespace radkit {

/// Point scatterer in normalized units: range as a (fractional) range bin, Doppler
/// as cycles per chirp, azimuth as an angle from boresight.
struct PointTarget {
  double range_bin = 0.0;     // [0, range_bins)
  double doppler_freq = 0.0;  // [-0.5, 0.5)
  double azimuth_deg = 0.0;   // (-90, 90)
  double amplitude = 1.0;     // > 0
};

struct Scene {
  std::vector<PointTarget> targets;
  double noise_sigma = 0.0;  // std of each real/imag noise component
  std::uint64_t rng_seed = 0;
};

void validate(const Scene& scene, Shape3 adc_shape = kAdcShape);

/// FMCW point-target model with half-wavelength antenna spacing:
///   adc[n,m,k] = sum_t A_t exp(j2pi(f_t n / N_r + nu_t k)) exp(j pi m sin(theta_t)) + noise.
AdcCube synth_adc(const Scene& scene, Shape3 adc_shape = kAdcShape);

struct RadBin {
  std::uint32_t range = 0;
  std::uint32_t azimuth = 0;
  std::uint32_t doppler = 0;

  bool operator==(const RadBin&) const = default;
};

/// RAD cell where the target's peak lands under the centered (fft-shifted) convention.
RadBin expected_bins(const PointTarget& target, Shape3 rad_shape = kRadShape);

struct RandomSceneOptions {
  std::size_t min_targets = 1;
  std::size_t max_targets = 1;
  double min_amplitude = 1.0;  // amplitudes are log-uniform in [min, max]
  double max_amplitude = 1.0;
  bool on_grid = false;        // land every target exactly on a RAD bin
  double noise_sigma = 0.0;
  double min_range_bin = 4.0;
  double max_range_bin = 250.0;
  double max_abs_azimuth_deg = 60.0;
};

/// Deterministic per seed.
Scene random_scene(std::uint64_t seed, const RandomSceneOptions& opts = {}, Shape3 adc_shape = kAdcShape,
                   Shape3 rad_shape = kRadShape);

void to_json(nlohmann::json& j, const PointTarget& t);
void from_json(const nlohmann::json& j, PointTarget& t);
void to_json(nlohmann::json& j, const Scene& s);
void from_json(const nlohmann::json& j, Scene& s);

}  // namespace radkit
