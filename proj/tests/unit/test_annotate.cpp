#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "radkit/annotate.hpp"
#include "radkit/dsp.hpp"
#include "radkit/error.hpp"
#include "radkit/synth.hpp"

using namespace radkit;

namespace {

// Two labelings describe the same partition (noise must agree exactly).
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> fwd, bwd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [f, fi] = fwd.emplace(a[i], b[i]);
    auto [r, ri] = bwd.emplace(b[i], a[i]);
    if (f->second != b[i] || r->second != a[i]) return false;
  }
  return true;
}

DetectionMask random_mask(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double p) {
  auto m = DetectionMask::empty(rows, cols);
  std::bernoulli_distribution on(p);
  for (auto& v : m.data) v = on(rng) ? 1 : 0;
  return m;
}

// Marks RD cells within -10 dB of the map peak.
DetectionMask peak_mask(const RadCube& rad) {
  const auto rd = rd_map(rad);
  const double peak = *std::max_element(rd.data.begin(), rd.data.end());
  auto m = DetectionMask::empty(rd.rows, rd.cols);
  for (std::size_t i = 0; i < rd.data.size(); ++i) m.data[i] = rd.data[i] > 0.1 * peak;
  return m;
}

bool contains(const Instance& inst, const RadBin& b) {
  return std::binary_search(inst.cells.begin(), inst.cells.end(), RadCell{b.range, b.azimuth, b.doppler});
}

}  // namespace

TEST_CASE("connect_patterns examples") {
  auto m = DetectionMask::empty(64, 16);
  m.set(10, 5, true);
  m.set(12, 5, true);
  const auto c = connect_patterns(m);
  CHECK(c.at(11, 5));
  CHECK(c.at(10, 5));
  CHECK(c.at(12, 5));

  auto far = DetectionMask::empty(64, 16);
  far.set(10, 5, true);
  far.set(16, 5, true);
  const auto cf = connect_patterns(far);
  CHECK(cf == far);
  for (std::size_t n = 11; n < 16; ++n) CHECK_FALSE(cf.at(n, 5));

  // Doppler wraps
  auto w = DetectionMask::empty(64, 16);
  w.set(20, 15, true);
  w.set(20, 1, true);
  CHECK(connect_patterns(w).at(20, 0));
}

TEST_CASE("connect_patterns equals brute-force closing and is idempotent") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 40; ++t) {
    const std::size_t rows = 20 + rng() % 30, cols = 8 + rng() % 20;
    const std::size_t h = 1 + (t % 2);
    const auto m = random_mask(rng, rows, cols, 0.05 + 0.02 * (t % 5));
    const auto c = connect_patterns(m, h);
    REQUIRE(c.data == oracle::closing(m.data, rows, cols, static_cast<int>(h)));
    REQUIRE(connect_patterns(c, h) == c);
    for (std::size_t i = 0; i < m.data.size(); ++i)
      if (m.data[i]) REQUIRE(c.data[i]);
  }
}

TEST_CASE("dbscan examples") {
  DbscanConfig cfg;
  cfg.eps = 1.5;
  cfg.min_pts = 2;
  std::vector<std::array<double, 3>> pts{{0, 0, 0}, {0, 1, 0}};
  CHECK(dbscan(pts, cfg) == std::vector<int>{0, 0});
  pts.push_back({20, 20, 20});
  CHECK(dbscan(pts, cfg) == std::vector<int>{0, 0, kNoise});

  // circular Doppler difference: 63 and 0 are one bin apart
  DbscanConfig c2;
  c2.eps = 2.0;
  c2.min_pts = 2;
  std::vector<std::array<double, 3>> wrap{{5, 5, 63}, {5, 5, 0}};
  CHECK(dbscan(wrap, c2) == std::vector<int>{0, 0});

  DbscanConfig bad;
  bad.eps = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("dbscan partition matches the O(n^2) reference") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = t < 100 ? 50 : 1 + rng() % 200;
    std::uniform_real_distribution<double> u(0, 20), d(0, 64);
    std::vector<std::array<double, 3>> pts(n);
    for (auto& p : pts) p = {u(rng), u(rng), d(rng)};
    DbscanConfig cfg;
    cfg.eps = 1.5 + 0.5 * (t % 4);
    cfg.min_pts = 1 + static_cast<std::uint32_t>(t % 4);
    const auto got = dbscan(pts, cfg);
    const auto want = oracle::dbscan(pts, cfg.eps, cfg.min_pts, cfg.axis_scale, cfg.doppler_period);
    REQUIRE(same_partition(got, want));
  }
}

TEST_CASE("extract_instances: empty mask gives no instances") {
  const auto rad = rad_from_adc(synth_adc(Scene{{{100, 0.25, 30, 1.0}}, 0, 0}));
  CHECK(extract_instances(rad, DetectionMask::empty(256, 64), 0.5, DbscanConfig{}).empty());
}

TEST_CASE("extract_instances: one target yields one instance holding its bins") {
  const PointTarget tgt{100, 0.25, 30, 1.0};
  const auto rad = rad_from_adc(synth_adc(Scene{{tgt}, 0, 0}));
  const auto inst = extract_instances(rad, peak_mask(rad), 0.5, DbscanConfig{}, "f");
  REQUIRE(inst.size() == 1);
  CHECK(contains(inst[0], expected_bins(tgt)));
  CHECK(inst[0].frame_id == "f");
  CHECK(std::is_sorted(inst[0].cells.begin(), inst[0].cells.end()));
}

TEST_CASE("extract_instances separates same range and speed at +-40 degrees") {
  const PointTarget a{120, -0.125, 40, 1.0}, b{120, -0.125, -40, 1.0};
  const auto rad = rad_from_adc(synth_adc(Scene{{a, b}, 0, 0}));
  const auto inst = extract_instances(rad, peak_mask(rad), 0.5, DbscanConfig{});
  REQUIRE(inst.size() == 2);
  const bool direct = contains(inst[0], expected_bins(a)) && contains(inst[1], expected_bins(b));
  const bool swapped = contains(inst[1], expected_bins(a)) && contains(inst[0], expected_bins(b));
  CHECK((direct || swapped));
}

TEST_CASE("instance_to_boxes examples") {
  Instance one{{{64, 192, 48}}, 2, "x"};
  const auto [b3, b2] = instance_to_boxes(one);
  CHECK(b3.center == std::array<double, 3>{64.5, 192.5, 48.5});
  CHECK(b3.size == std::array<double, 3>{1, 1, 1});
  CHECK(b3.class_id == 2);
  CHECK(b2.size[0] > 0);
  CHECK(b2.size[1] > 0);

  Instance wrap{{{10, 10, 0}, {10, 10, 1}, {10, 10, 62}, {10, 10, 63}}, std::nullopt, ""};
  const auto bw = instance_to_boxes(wrap).first;
  CHECK(bw.size[2] == 4);
  CHECK(bw.center[2] == 0.0);
  CHECK(bw.class_id == -1);

  CHECK_THROWS_AS(instance_to_boxes(Instance{}), Error);
}

TEST_CASE("minimal circular cover") {
  const std::vector<std::uint32_t> v{62, 63, 0, 1};
  CHECK(minimal_circular_cover(v, 64) == std::pair<std::uint32_t, std::uint32_t>{62, 4});
  const std::vector<std::uint32_t> s{5, 7};
  CHECK(minimal_circular_cover(s, 64) == std::pair<std::uint32_t, std::uint32_t>{5, 3});
}

TEST_CASE("instance boxes contain every cell") {
  const RadarGeometry geom;
  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    std::set<RadCell> cells;
    const std::uint32_t r0 = 1 + rng() % 240, a0 = 1 + rng() % 240, d0 = rng() % 64;
    const std::size_t n = 1 + rng() % 25;
    for (std::size_t i = 0; i < n; ++i)
      cells.insert({r0 + static_cast<std::uint32_t>(rng() % 12), a0 + static_cast<std::uint32_t>(rng() % 12),
                    (d0 + static_cast<std::uint32_t>(rng() % 10)) % 64});
    Instance inst{{cells.begin(), cells.end()}, std::nullopt, ""};
    const auto [b3, b2] = instance_to_boxes(inst, geom);
    for (const auto& c : inst.cells) {
      REQUIRE(c.range + 0.5 >= b3.center[0] - b3.size[0] / 2);
      REQUIRE(c.range + 0.5 <= b3.center[0] + b3.size[0] / 2);
      REQUIRE(c.azimuth + 0.5 >= b3.center[1] - b3.size[1] / 2);
      REQUIRE(c.azimuth + 0.5 <= b3.center[1] + b3.size[1] / 2);
      double dd = std::fmod(std::abs(c.doppler + 0.5 - b3.center[2]), 64.0);
      dd = std::min(dd, 64.0 - dd);
      REQUIRE(dd <= b3.size[2] / 2);
      const auto p = polar_to_cart(geom.range_m(c.range), geom.azimuth_rad(c.azimuth));
      REQUIRE(std::abs(p[0] - b2.center[0]) <= b2.size[0] / 2 + 1e-12);
      REQUIRE(std::abs(p[1] - b2.center[1]) <= b2.size[1] / 2 + 1e-12);
    }
  }
}

TEST_CASE("fit_projection") {
  Eigen::Matrix<double, 2, 4> m;
  m << 0.1, -0.2, 0.95, 0.4, 0.9, 0.05, -0.1, -1.2;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-20, 20);
  std::normal_distribution<double> noise(0, 0.01);
  std::vector<std::array<double, 3>> s;
  std::vector<std::array<double, 2>> q, qn;
  for (int i = 0; i < 200; ++i) {
    s.push_back({u(rng), u(rng), u(rng)});
    const Eigen::Vector2d v = m * Eigen::Vector4d(s.back()[0], s.back()[1], s.back()[2], 1.0);
    q.push_back({v[0], v[1]});
    qn.push_back({v[0] + noise(rng), v[1] + noise(rng)});
  }
  const auto exact = fit_projection(s, q);
  CHECK((exact.projection.m - m).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(exact.rms_residual < 1e-9);

  const auto noisy = fit_projection(s, qn);
  CHECK((noisy.projection.m - m).cwiseAbs().maxCoeff() < 5e-3);
  const double expect = 0.01 * std::sqrt(2.0);
  CHECK(noisy.rms_residual > 0.7 * expect);
  CHECK(noisy.rms_residual < 1.3 * expect);

  const std::vector<std::array<double, 3>> s3(s.begin(), s.begin() + 3);
  const std::vector<std::array<double, 2>> q3(q.begin(), q.begin() + 3);
  try {
    fit_projection(s3, q3);
    FAIL("expected rank_deficient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::rank_deficient);
  }
  // collinear points are degenerate too
  std::vector<std::array<double, 3>> line;
  for (int i = 0; i < 10; ++i) line.push_back({double(i), 2.0 * i, 0.5 * i});
  const std::vector<std::array<double, 2>> ql(10, {0.0, 0.0});
  CHECK_THROWS_AS(fit_projection(line, ql), Error);
}

TEST_CASE("transfer_labels") {
  const RadarGeometry geom;
  Instance inst{{{50, 128, 32}}, std::nullopt, ""};
  const auto box = instance_to_boxes(inst, geom).second;
  const std::array<double, 2> c = box.center;

  std::vector<LabeledPoint> one{{c, 3}};
  auto out = transfer_labels({inst}, one, geom);
  CHECK(out[0].class_id == 3);

  std::vector<LabeledPoint> none{{{c[0] + 10, c[1]}, 3}};
  out = transfer_labels({inst}, none, geom);
  CHECK_FALSE(out[0].class_id.has_value());

  std::vector<LabeledPoint> tie{{{c[0] + 0.3, c[1]}, 1}, {{c[0] + 0.05, c[1]}, 4}};
  out = transfer_labels({inst}, tie, geom);
  CHECK(out[0].class_id == 4);
  std::reverse(tie.begin(), tie.end());
  out = transfer_labels({inst}, tie, geom);
  CHECK(out[0].class_id == 4);

  std::vector<LabeledPoint> majority{{c, 1}, {c, 2}, {{c[0] + 0.1, c[1]}, 2}};
  out = transfer_labels({inst}, majority, geom);
  CHECK(out[0].class_id == 2);
}

TEST_CASE("annotate_frame labels a synthetic target") {
  const PointTarget tgt{80, 0.125, -20, 1.0};
  Scene scene{{tgt}, 1.0, 99};
  const auto rad = rad_from_adc(synth_adc(scene));
  AnnotateConfig cfg;
  const auto bins = expected_bins(tgt);
  const auto p = polar_to_cart(cfg.geometry.range_m(bins.range), cfg.geometry.azimuth_rad(bins.azimuth));
  const std::vector<LabeledPoint> labels{{p, 1}};
  const auto fa = annotate_frame(rad, cfg, labels, "000001");
  CHECK(fa.record.frame_id == "000001");
  REQUIRE(fa.record.boxes3d.size() == fa.instances.size());
  REQUIRE(fa.record.boxes2d.size() == fa.instances.size());
  bool hit = false;
  for (const auto& b : fa.record.boxes3d) {
    const bool in_r = std::abs(bins.range + 0.5 - b.center[0]) <= b.size[0] / 2;
    const bool in_a = std::abs(bins.azimuth + 0.5 - b.center[1]) <= b.size[1] / 2;
    if (in_r && in_a && b.class_id == 1) hit = true;
  }
  CHECK(hit);
  CHECK(fa.record.source == AnnotationSource::automatic);
}
