#include "radkit/dsp.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

#include "radkit/error.hpp"

namespace radkit {
namespace {

// FFTW's planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftwf_complex* as_fftw(cf32* p) { return reinterpret_cast<fftwf_complex*>(p); }

std::vector<float> make_window(Window w, std::size_t n) {
  std::vector<float> out(n, 1.0f);
  if (w == Window::hann)
    for (std::size_t i = 0; i < n; ++i)
      out[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                                         static_cast<double>(n)));
  return out;
}

void require_stage(const RadCube& rad, RadStage stage, const char* op) {
  if (rad.stage != stage)
    throw Error(ErrorCode::stage_violation, std::string(op) + " expects stage " + std::string(to_string(stage)) +
                                                ", got " + std::string(to_string(rad.stage)));
}

}  // namespace

void to_json(nlohmann::json& j, const DspConfig& c) {
  j = {{"adc_shape", {c.adc_shape.d0, c.adc_shape.d1, c.adc_shape.d2}},
       {"azimuth_bins", c.azimuth_bins},
       {"window", c.window == Window::hann ? "hann" : "rectangular"},
       {"normalize_by_std", c.normalize_by_std}};
}

void from_json(const nlohmann::json& j, DspConfig& c) {
  if (auto it = j.find("adc_shape"); it != j.end()) {
    auto s = it->get<std::array<std::size_t, 3>>();
    c.adc_shape = {s[0], s[1], s[2]};
  }
  c.azimuth_bins = j.value("azimuth_bins", c.azimuth_bins);
  const auto w = j.value("window", std::string("rectangular"));
  if (w == "hann") c.window = Window::hann;
  else if (w == "rectangular") c.window = Window::rectangular;
  else throw Error(ErrorCode::invariant_violation, "unknown window '" + w + "'");
  c.normalize_by_std = j.value("normalize_by_std", c.normalize_by_std);
}

struct RadProcessor::Plans {
  AlignedVector<cf32> work;  // (range, antenna, chirp)
  fftwf_plan range_plan = nullptr;
  fftwf_plan doppler_plan = nullptr;
  std::vector<float> range_window;
  std::vector<float> doppler_window;

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (range_plan) fftwf_destroy_plan(range_plan);
    if (doppler_plan) fftwf_destroy_plan(doppler_plan);
  }
};

RadProcessor::RadProcessor(DspConfig config) : config_(config), plans_(std::make_unique<Plans>()) {
  const auto s = config_.adc_shape;
  if (s.size() == 0 || config_.azimuth_bins < s.d1)
    throw Error(ErrorCode::shape_mismatch, "azimuth_bins must be >= antenna count and shape non-empty");
  plans_->work.assign(s.size(), cf32{});
  plans_->range_window = make_window(config_.window, s.d0);
  plans_->doppler_window = make_window(config_.window, s.d2);

  const int n_r = static_cast<int>(s.d0);
  const int n_c = static_cast<int>(s.d2);
  const int plane = static_cast<int>(s.d1 * s.d2);
  auto* w = as_fftw(plans_->work.data());

  std::lock_guard lock(planner_mutex());
  plans_->range_plan = fftwf_plan_many_dft(1, &n_r, plane, w, nullptr, plane, 1, w, nullptr, plane, 1,
                                           FFTW_FORWARD, FFTW_ESTIMATE);
  plans_->doppler_plan = fftwf_plan_many_dft(1, &n_c, static_cast<int>(s.d0 * s.d1), w, nullptr, 1, n_c, w,
                                             nullptr, 1, n_c, FFTW_FORWARD, FFTW_ESTIMATE);
  if (!plans_->range_plan || !plans_->doppler_plan)
    throw Error(ErrorCode::invariant_violation, "FFT planning failed");
}

RadProcessor::~RadProcessor() = default;
RadProcessor::RadProcessor(RadProcessor&&) noexcept = default;
RadProcessor& RadProcessor::operator=(RadProcessor&&) noexcept = default;

RadCube RadProcessor::process(const AdcCube& adc) {
  const Shape3 s = config_.adc_shape;
  if (adc.shape != s || adc.data.size() != s.size())
    throw Error(ErrorCode::shape_mismatch, "ADC cube shape does not match the processing configuration");
  auto& p = *plans_;

  // Windows, plus (-1)^k on chirps so the Doppler spectrum comes out centered.
  for (std::size_t n = 0; n < s.d0; ++n)
    for (std::size_t m = 0; m < s.d1; ++m) {
      const std::size_t base = s.index(n, m, 0);
      for (std::size_t k = 0; k < s.d2; ++k) {
        const float sign = (k & 1) ? -1.0f : 1.0f;
        p.work[base + k] = adc.data[base + k] * (p.range_window[n] * p.doppler_window[k] * sign);
      }
    }
  fftwf_execute_dft(p.range_plan, as_fftw(p.work.data()), as_fftw(p.work.data()));
  fftwf_execute_dft(p.doppler_plan, as_fftw(p.work.data()), as_fftw(p.work.data()));

  RadCube rad;
  rad.shape = config_.rad_shape();
  rad.stage = RadStage::complex;
  rad.complex_data.assign(rad.shape.size(), cf32{});
  const std::size_t n_az = rad.shape.d1;
  for (std::size_t n = 0; n < s.d0; ++n)
    for (std::size_t m = 0; m < s.d1; ++m) {
      // (-1)^m centers boresight after the azimuth FFT.
      const float sign = (m & 1) ? -1.0f : 1.0f;
      const cf32* src = &p.work[s.index(n, m, 0)];
      cf32* dst = &rad.complex_data[rad.shape.index(n, m, 0)];
      for (std::size_t k = 0; k < s.d2; ++k) dst[k] = src[k] * sign;
    }

  fftwf_iodim dims{static_cast<int>(n_az), static_cast<int>(s.d2), static_cast<int>(s.d2)};
  std::array<fftwf_iodim, 2> loops{
      fftwf_iodim{static_cast<int>(s.d0), static_cast<int>(n_az * s.d2), static_cast<int>(n_az * s.d2)},
      fftwf_iodim{static_cast<int>(s.d2), 1, 1}};
  auto* out = as_fftw(rad.complex_data.data());
  fftwf_plan az_plan;
  {
    std::lock_guard lock(planner_mutex());
    az_plan = fftwf_plan_guru_dft(1, &dims, 2, loops.data(), out, out, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  if (!az_plan) throw Error(ErrorCode::invariant_violation, "azimuth FFT planning failed");
  fftwf_execute(az_plan);
  {
    std::lock_guard lock(planner_mutex());
    fftwf_destroy_plan(az_plan);
  }
  return rad;
}

RadCube rad_from_adc(const AdcCube& adc, const DspConfig& config) {
  DspConfig c = config;
  if (adc.shape != c.adc_shape) {
    if (adc.shape.d0 == 0) throw Error(ErrorCode::shape_mismatch, "empty ADC cube");
    throw Error(ErrorCode::shape_mismatch, "ADC shape (" + std::to_string(adc.shape.d0) + "," +
                                               std::to_string(adc.shape.d1) + "," + std::to_string(adc.shape.d2) +
                                               ") does not match configuration");
  }
  RadProcessor proc(c);
  return proc.process(adc);
}

RadCube log_magnitude(const RadCube& rad) {
  require_stage(rad, RadStage::complex, "log_magnitude");
  RadCube out;
  out.shape = rad.shape;
  out.stage = RadStage::log_magnitude;
  out.real_data.resize(rad.complex_data.size());
  for (std::size_t i = 0; i < rad.complex_data.size(); ++i) {
    const auto z = rad.complex_data[i];
    const double mag = std::hypot(static_cast<double>(z.real()), static_cast<double>(z.imag()));
    out.real_data[i] = static_cast<float>(std::log(mag + kLogEpsilon));
  }
  return out;
}

void StatsAccumulator::add(std::span<const float> cells) {
  if (cells.empty()) return;
  // Two-pass moments for the batch, merged with Chan's pairwise update.
  double sum = 0.0;
  for (float v : cells) sum += v;
  const auto n_b = static_cast<double>(cells.size());
  const double mean_b = sum / n_b;
  double m2_b = 0.0;
  double comp = 0.0;
  for (float v : cells) {
    const double d = v - mean_b;
    m2_b += d * d;
    comp += d;
  }
  m2_b -= comp * comp / n_b;

  StatsAccumulator batch;
  batch.count_ = cells.size();
  batch.mean_ = mean_b;
  batch.m2_ = m2_b;
  merge(batch);
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  if (other.count_ == 0) return;
  const auto n_a = static_cast<double>(count_);
  const auto n_b = static_cast<double>(other.count_);
  const double n = n_a + n_b;
  const double delta = other.mean_ - mean_;
  mean_ += delta * n_b / n;
  m2_ += other.m2_ + delta * delta * n_a * n_b / n;
  count_ += other.count_;
}

void StatsAccumulator::add(const RadCube& frame) {
  require_stage(frame, RadStage::log_magnitude, "compute_stats");
  add(std::span<const float>(frame.real_data.data(), frame.real_data.size()));
}

NormalizationStats StatsAccumulator::finish() const {
  if (count_ == 0) throw Error(ErrorCode::empty_dataset, "no cells to compute statistics over");
  const double variance = std::max(0.0, m2_ / static_cast<double>(count_));
  if (!(variance > 0))
    throw Error(ErrorCode::zero_variance, "dataset variance is zero (mean " + std::to_string(mean_) + ")");
  return {mean_, variance, count_};
}

NormalizationStats compute_stats(std::span<const RadCube> frames) {
  StatsAccumulator acc;
  for (const auto& f : frames) acc.add(f);
  return acc.finish();
}

RadCube normalize(const RadCube& rad, const NormalizationStats& stats, bool by_std) {
  require_stage(rad, RadStage::log_magnitude, "normalize");
  if (!(stats.v_variance > 0)) throw Error(ErrorCode::zero_variance, "normalize needs v_variance > 0");
  const double denom = by_std ? std::sqrt(stats.v_variance) : stats.v_variance;
  RadCube out;
  out.shape = rad.shape;
  out.stage = RadStage::normalized;
  out.real_data.resize(rad.real_data.size());
  for (std::size_t i = 0; i < rad.real_data.size(); ++i)
    out.real_data[i] = static_cast<float>((static_cast<double>(rad.real_data[i]) - stats.v_mean) / denom);
  return out;
}

RdMap rd_map(const RadCube& rad) {
  require_stage(rad, RadStage::complex, "rd_map");
  const auto s = rad.shape;
  RdMap rd = Map2D::zeros(s.d0, s.d2);
  for (std::size_t n = 0; n < s.d0; ++n)
    for (std::size_t a = 0; a < s.d1; ++a) {
      const cf32* row = &rad.complex_data[s.index(n, a, 0)];
      for (std::size_t k = 0; k < s.d2; ++k) rd.at(n, k) += std::norm(std::complex<double>(row[k]));
    }
  return rd;
}

Map2D ra_map(const RadCube& rad) {
  require_stage(rad, RadStage::complex, "ra_map");
  const auto s = rad.shape;
  Map2D ra = Map2D::zeros(s.d0, s.d1);
  for (std::size_t n = 0; n < s.d0; ++n)
    for (std::size_t a = 0; a < s.d1; ++a) {
      const cf32* row = &rad.complex_data[s.index(n, a, 0)];
      double acc = 0.0;
      for (std::size_t k = 0; k < s.d2; ++k) acc += std::norm(std::complex<double>(row[k]));
      ra.at(n, a) = acc;
    }
  return ra;
}

}  // namespace radkit
