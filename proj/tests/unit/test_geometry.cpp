#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "radkit/error.hpp"
#include "radkit/geometry.hpp"

using namespace radkit;

namespace {

Box3D random_box3(std::mt19937_64& rng, int cls = 0) {
  std::uniform_real_distribution<double> c(0, 64), s(1, 12), d(0, 64), sd(1, 20);
  Box3D b;
  b.center = {c(rng), c(rng), d(rng)};
  b.size = {s(rng), s(rng), sd(rng)};
  b.class_id = cls;
  b.score = std::uniform_real_distribution<double>(0, 1)(rng);
  return b;
}

Box2D random_box2(std::mt19937_64& rng, int cls = 0) {
  std::uniform_real_distribution<double> c(-10, 10), s(0.5, 8);
  Box2D b;
  b.center = {c(rng), c(rng)};
  b.size = {s(rng), s(rng)};
  b.class_id = cls;
  b.score = std::uniform_real_distribution<double>(0, 1)(rng);
  return b;
}

}  // namespace

TEST_CASE("polar to cartesian") {
  auto p = polar_to_cart(10, 0);
  CHECK(p[0] == doctest::Approx(10));
  CHECK(p[1] == doctest::Approx(0));
  p = polar_to_cart(10, std::numbers::pi / 2);
  CHECK(p[0] == doctest::Approx(0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(10));
  p = polar_to_cart(10, std::numbers::pi / 6);
  CHECK(p[0] == doctest::Approx(8.6603).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(5.0));
  CHECK_THROWS_AS(polar_to_cart(-1, 0), Error);
  CHECK_THROWS_AS(polar_to_cart(1, 2.0), Error);
  const auto back = cart_to_polar(8.660254037844386, 5.0);
  CHECK(back[0] == doctest::Approx(10));
  CHECK(back[1] == doctest::Approx(std::numbers::pi / 6));
}

TEST_CASE("grid geometry") {
  const auto g = CartesianGrid::for_geometry(RadarGeometry{});
  CHECK(g.width_cells == 2 * g.depth_cells);
  CHECK(g.meters_per_cell == doctest::Approx(0.1953));
  CHECK_NOTHROW(g.validate());
  CartesianGrid bad = g;
  bad.width_cells = 300;
  CHECK_THROWS_AS(bad.validate(), Error);
  RadarGeometry geom;
  CHECK(geom.sin_azimuth(128) == 0.0);
  CHECK(geom.azimuth_bin(std::numbers::pi / 6) == doctest::Approx(192));
}

TEST_CASE("resample: constants, impulse, corners") {
  const RadarGeometry geom;
  const auto grid = CartesianGrid::for_geometry(geom);
  Map2D ra = Map2D::zeros(256, 256);
  for (auto& v : ra.data) v = 3.5;
  const auto cart = resample_ra_to_cart(ra, grid, geom);
  CHECK(cart.rows == 512);
  CHECK(cart.cols == 256);
  std::size_t inside = 0;
  for (double v : cart.data) {
    REQUIRE((v == 0.0 || v == doctest::Approx(3.5)));
    inside += v != 0.0;
  }
  CHECK(inside > 512 * 256 / 3);
  // corner cells lie beyond R_max
  CHECK(cart.at(0, 255) == 0.0);
  CHECK(cart.at(511, 255) == 0.0);

  Map2D imp = Map2D::zeros(256, 256);
  imp.at(64, 128) = 1.0;
  const auto ic = resample_ra_to_cart(imp, grid, geom);
  const auto idx = static_cast<std::size_t>(std::max_element(ic.data.begin(), ic.data.end()) - ic.data.begin());
  const std::size_t row = idx / ic.cols, col = idx % ic.cols;
  CHECK((col == 63 || col == 64));
  CHECK((row == 255 || row == 256));

  // linearity
  Map2D sum = Map2D::zeros(256, 256);
  for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] = 2.0 * ra.data[i] + imp.data[i];
  const auto sc = resample_ra_to_cart(sum, grid, geom);
  for (std::size_t i = 0; i < sc.data.size(); i += 37) REQUIRE(sc.data[i] == doctest::Approx(2 * cart.data[i] + ic.data[i]));
}

TEST_CASE("cell cartesian bounds contain sampled points of the sector") {
  const RadarGeometry geom;
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t r = rng() % 256, a = 1 + rng() % 254;
    const auto b = cell_cartesian_bounds(r, a, geom);
    for (int s = 0; s < 20; ++s) {
      std::uniform_real_distribution<double> u(-0.5, 0.5);
      const double rv = std::max(0.0, static_cast<double>(r) + u(rng));
      const double av = static_cast<double>(a) + u(rng);
      const auto p = polar_to_cart(geom.range_m(rv), geom.azimuth_rad(av));
      REQUIRE(p[0] >= b[0] - 1e-12);
      REQUIRE(p[0] <= b[1] + 1e-12);
      REQUIRE(p[1] >= b[2] - 1e-12);
      REQUIRE(p[1] <= b[3] + 1e-12);
    }
  }
}

TEST_CASE("iou3d examples") {
  Box3D a{{10, 10, 10}, {4, 4, 4}, 0, {}};
  CHECK(iou3d(a, a) == 1.0);
  Box3D far = a;
  far.center[0] = 30;
  CHECK(iou3d(a, far) == 0.0);
  Box3D wa{{10, 10, 63}, {2, 2, 6}, 0, {}};
  Box3D wb{{10, 10, 1}, {2, 2, 2}, 0, {}};
  CHECK(iou3d(wa, wb) == 1.0 / 3.0);
  CHECK(iou3d(wb, wa) == 1.0 / 3.0);
}

TEST_CASE("iou2d examples") {
  Box2D a{{0, 0}, {2, 2}, 0, {}};
  Box2D b{{1, 0}, {2, 2}, 0, {}};
  Box2D c{{2, 0}, {2, 2}, 0, {}};
  CHECK(iou2d(a, a) == 1.0);
  CHECK(iou2d(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(iou2d(a, c) == 0.0);
}

TEST_CASE("iou properties against the sweep oracle") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 1000; ++t) {
    auto a = random_box3(rng), b = random_box3(rng);
    if (t % 3 == 0) b.center = {a.center[0] + 1, a.center[1] - 1, std::fmod(a.center[2] + 60.0, 64.0)};
    const double v = iou3d(a, b);
    REQUIRE(v == doctest::Approx(oracle::iou3d(a, b)).epsilon(1e-12));
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
    REQUIRE(v == doctest::Approx(iou3d(b, a)).epsilon(1e-15));
    Box3D shifted = a;
    shifted.center[2] += 64;
    REQUIRE(iou3d(shifted, b) == doctest::Approx(v).epsilon(1e-12));

    const auto p = random_box2(rng), q = random_box2(rng);
    REQUIRE(iou2d(p, q) == doctest::Approx(oracle::iou2d(p, q)).epsilon(1e-12));
    REQUIRE(iou2d(p, q) == iou2d(q, p));
  }
}

TEST_CASE("nms examples") {
  std::vector<Box2D> boxes{{{0, 0}, {2, 2}, 1, 0.8}, {{0, 0}, {2, 2}, 1, 0.9}};
  const auto kept = nms2d(boxes, 0.3);
  REQUIRE(kept.size() == 1);
  CHECK(*kept[0].score == 0.9);

  // IoU 0.05 < 0.1 keeps both
  std::vector<Box3D> b3{{{10, 10, 10}, {20, 1, 1}, 0, 0.9}, {{29, 10, 10}, {20, 1, 1}, 0, 0.8}};
  CHECK(iou3d(b3[0], b3[1]) < 0.1);
  CHECK(nms3d(b3, 0.1).size() == 2);

  // different classes never suppress each other
  boxes[0].class_id = 2;
  CHECK(nms2d(boxes, 0.3).size() == 2);

  std::vector<Box2D> unscored{{{0, 0}, {1, 1}, 0, std::nullopt}};
  CHECK_THROWS_AS(nms2d(unscored, 0.3), Error);
}

TEST_CASE("nms equals the O(n^2) reference and keeps an antichain") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 1000; ++t) {
    std::vector<Box3D> boxes;
    std::vector<Box2D> flat;
    for (int i = 0; i < 20; ++i) {
      boxes.push_back(random_box3(rng, static_cast<int>(rng() % 3)));
      flat.push_back(random_box2(rng, static_cast<int>(rng() % 3)));
    }
    const double thr = t % 2 ? 0.1 : 0.3;
    const auto got = nms_indices<Box3D>(boxes, thr, [](const Box3D& a, const Box3D& b) { return iou3d(a, b); });
    auto want = oracle::nms(boxes, thr, [](const Box3D& a, const Box3D& b) { return oracle::iou3d(a, b); });
    REQUIRE(got == want);
    for (std::size_t i = 0; i < got.size(); ++i)
      for (std::size_t j = i + 1; j < got.size(); ++j)
        if (boxes[got[i]].class_id == boxes[got[j]].class_id) REQUIRE(iou3d(boxes[got[i]], boxes[got[j]]) <= thr);

    const auto got2 = nms_indices<Box2D>(flat, thr, [](const Box2D& a, const Box2D& b) { return iou2d(a, b); });
    REQUIRE(got2 == oracle::nms(flat, thr, [](const Box2D& a, const Box2D& b) { return oracle::iou2d(a, b); }));
  }
}

TEST_CASE("nms ties resolve by input index") {
  std::vector<Box2D> boxes{{{0, 0}, {2, 2}, 0, 0.5}, {{0.1, 0}, {2, 2}, 0, 0.5}};
  const auto idx = nms_indices<Box2D>(boxes, 0.3, [](const Box2D& a, const Box2D& b) { return iou2d(a, b); });
  REQUIRE(idx.size() == 1);
  CHECK(idx[0] == 0);
}
