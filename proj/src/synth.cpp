#include "radkit/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "radkit/error.hpp"

namespace radkit {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<std::complex<double>> phasor_ramp(std::size_t n, double cycles_per_sample) {
  std::vector<std::complex<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Reduce the phase before the trig call so large i stays accurate.
    const double turns = cycles_per_sample * static_cast<double>(i);
    out[i] = std::polar(1.0, kTwoPi * (turns - std::floor(turns)));
  }
  return out;
}

}  // namespace

void validate(const Scene& scene, Shape3 adc_shape) {
  if (!(scene.noise_sigma >= 0) || !std::isfinite(scene.noise_sigma))
    throw Error(ErrorCode::invariant_violation, "noise_sigma must be finite and >= 0");
  for (const auto& t : scene.targets) {
    if (!(t.range_bin >= 0 && t.range_bin < static_cast<double>(adc_shape.d0)))
      throw Error(ErrorCode::invariant_violation, "target range_bin out of range");
    if (!(t.doppler_freq >= -0.5 && t.doppler_freq < 0.5))
      throw Error(ErrorCode::invariant_violation, "target doppler_freq must lie in [-0.5, 0.5)");
    if (!(t.azimuth_deg > -90 && t.azimuth_deg < 90))
      throw Error(ErrorCode::invariant_violation, "target azimuth must lie in (-90, 90) degrees");
    if (!(t.amplitude > 0) || !std::isfinite(t.amplitude))
      throw Error(ErrorCode::invariant_violation, "target amplitude must be finite and > 0");
  }
}

AdcCube synth_adc(const Scene& scene, Shape3 adc_shape) {
  validate(scene, adc_shape);
  AdcCube adc = AdcCube::zeros(adc_shape);
  const auto [n_r, n_a, n_c] = std::array{adc_shape.d0, adc_shape.d1, adc_shape.d2};

  // Accumulate in double, round once to the stored precision.
  std::vector<std::complex<double>> acc(adc_shape.size());
  for (const auto& t : scene.targets) {
    const auto range = phasor_ramp(n_r, t.range_bin / static_cast<double>(n_r));
    const auto doppler = phasor_ramp(n_c, t.doppler_freq);
    const double sin_theta = std::sin(t.azimuth_deg * std::numbers::pi / 180.0);
    const auto antenna = phasor_ramp(n_a, sin_theta / 2.0);
    for (std::size_t n = 0; n < n_r; ++n)
      for (std::size_t m = 0; m < n_a; ++m) {
        const auto rm = t.amplitude * range[n] * antenna[m];
        auto* row = &acc[adc_shape.index(n, m, 0)];
        for (std::size_t k = 0; k < n_c; ++k) row[k] += rm * doppler[k];
      }
  }

  if (scene.noise_sigma > 0) {
    std::mt19937_64 rng(scene.rng_seed);
    std::normal_distribution<double> noise(0.0, scene.noise_sigma);
    for (auto& z : acc) {
      const double re = noise(rng);
      const double im = noise(rng);
      z += std::complex<double>(re, im);
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i)
    adc.data[i] = cf32(static_cast<float>(acc[i].real()), static_cast<float>(acc[i].imag()));
  return adc;
}

RadBin expected_bins(const PointTarget& target, Shape3 rad_shape) {
  auto wrap = [](long long v, std::size_t n) {
    const auto m = static_cast<long long>(n);
    return static_cast<std::uint32_t>(((v % m) + m) % m);
  };
  const double sin_theta = std::sin(target.azimuth_deg * std::numbers::pi / 180.0);
  const auto r = std::llround(target.range_bin);
  const auto a = std::llround((sin_theta / 2.0 + 0.5) * static_cast<double>(rad_shape.d1));
  const auto d = std::llround((target.doppler_freq + 0.5) * static_cast<double>(rad_shape.d2));
  return {wrap(r, rad_shape.d0), wrap(a, rad_shape.d1), wrap(d, rad_shape.d2)};
}

Scene random_scene(std::uint64_t seed, const RandomSceneOptions& opts, Shape3 adc_shape, Shape3 rad_shape) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scene scene;
  scene.noise_sigma = opts.noise_sigma;
  scene.rng_seed = rng();
  const std::size_t n = std::uniform_int_distribution<std::size_t>(opts.min_targets, opts.max_targets)(rng);
  const double max_sin = std::sin(opts.max_abs_azimuth_deg * std::numbers::pi / 180.0);
  for (std::size_t i = 0; i < n; ++i) {
    PointTarget t;
    t.amplitude = opts.min_amplitude * std::pow(opts.max_amplitude / opts.min_amplitude, unit(rng));
    if (opts.on_grid) {
      const auto lo = static_cast<long>(std::ceil(opts.min_range_bin));
      const auto hi = static_cast<long>(std::floor(opts.max_range_bin));
      t.range_bin = static_cast<double>(std::uniform_int_distribution<long>(lo, hi)(rng));
      const auto half = static_cast<long>(rad_shape.d1 / 2);
      const auto a_span = static_cast<long>(std::floor(max_sin * static_cast<double>(half)));
      const long a = half + std::uniform_int_distribution<long>(-a_span, a_span)(rng);
      t.azimuth_deg = std::asin(static_cast<double>(a) / static_cast<double>(half) - 1.0) * 180.0 / std::numbers::pi;
      const long d = std::uniform_int_distribution<long>(0, static_cast<long>(rad_shape.d2) - 1)(rng);
      t.doppler_freq = static_cast<double>(d) / static_cast<double>(rad_shape.d2) - 0.5;
    } else {
      t.range_bin = opts.min_range_bin + (opts.max_range_bin - opts.min_range_bin) * unit(rng);
      t.azimuth_deg = std::asin(max_sin * (2.0 * unit(rng) - 1.0)) * 180.0 / std::numbers::pi;
      t.doppler_freq = unit(rng) - 0.5;
    }
    scene.targets.push_back(t);
  }
  validate(scene, adc_shape);
  return scene;
}

void to_json(nlohmann::json& j, const PointTarget& t) {
  j = {{"range_bin", t.range_bin},
       {"doppler_freq", t.doppler_freq},
       {"azimuth_deg", t.azimuth_deg},
       {"amplitude", t.amplitude}};
}

void from_json(const nlohmann::json& j, PointTarget& t) {
  t.range_bin = j.at("range_bin").get<double>();
  t.doppler_freq = j.at("doppler_freq").get<double>();
  t.azimuth_deg = j.at("azimuth_deg").get<double>();
  t.amplitude = j.value("amplitude", 1.0);
}

void to_json(nlohmann::json& j, const Scene& s) {
  j = {{"targets", s.targets}, {"noise_sigma", s.noise_sigma}, {"rng_seed", s.rng_seed}};
}

void from_json(const nlohmann::json& j, Scene& s) {
  s.targets = j.value("targets", std::vector<PointTarget>{});
  s.noise_sigma = j.value("noise_sigma", 0.0);
  s.rng_seed = j.value("rng_seed", std::uint64_t{0});
}

}  // namespace radkit
