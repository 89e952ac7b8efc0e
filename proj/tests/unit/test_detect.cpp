#include <random>

#include "doctest.h"
#include "radkit/detect.hpp"
#include "radkit/error.hpp"

using namespace radkit;

namespace {

std::vector<BoxSize<3>> anchors3() { return {{10, 10, 4}, {20, 8, 6}, {6, 14, 3}, {30, 30, 8}, {4, 4, 2}, {12, 24, 5}}; }
std::vector<BoxSize<2>> anchors2() { return {{2, 2}, {4, 1.5}, {1.5, 4}, {6, 6}, {1, 1}, {3, 8}}; }

bool close_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("layout") {
  const HeadLayout3D l;
  CHECK(l.dims() == std::vector<std::uint32_t>{16, 16, 4, 6, 13});
  const HeadLayout2D l2;
  CHECK(l2.dims() == std::vector<std::uint32_t>{32, 16, 6, 11});
  const auto t = make_head3d(l);
  CHECK(t.payload.size() == 16 * 16 * 4 * 6 * 13);
  CHECK(HeadLayout3D::of(t).classes == 6);
  CHECK_THROWS_AS(HeadLayout3D::of(make_head2d(l2)), Error);
}

TEST_CASE("decode3d: zero logits") {
  const auto anchors = anchors3();
  auto raw = make_head3d(HeadLayout3D{}, 0.0f);
  const auto all = decode3d(raw, anchors, 0.5);
  CHECK(all.size() == 16 * 16 * 4 * 6);
  bool found = false;
  for (const auto& d : all)
    if (d.box.center == std::array<double, 3>{88, 120, 24} && d.box.size == std::array<double, 3>{10, 10, 4}) {
      found = true;
      CHECK(d.objectness == 0.5);
      CHECK(d.class_prob == doctest::Approx(1.0 / 6));
      CHECK(*d.box.score == doctest::Approx(0.5 / 6));
    }
  CHECK(found);
}

TEST_CASE("decode3d: thresholds") {
  const auto anchors = anchors3();
  auto raw = make_head3d(HeadLayout3D{}, 0.0f);
  const HeadLayout3D L;
  for (std::size_t i = 0; i < L.grid_r; ++i)
    for (std::size_t j = 0; j < L.grid_a; ++j)
      for (std::size_t m = 0; m < L.grid_d; ++m)
        for (std::size_t q = 0; q < L.anchors; ++q) raw.payload[L.offset(i, j, m, q) + 6] = -10.0f;
  CHECK(decode3d(raw, anchors, 0.5).empty());
  auto zero = make_head3d(L, 0.0f);
  CHECK(decode3d(zero, anchors, 1.0).empty());
}

TEST_CASE("decode3d: shape mismatch") {
  auto raw = make_head3d(HeadLayout3D{});
  const std::vector<BoxSize<3>> five(5, {1, 1, 1});
  CHECK_THROWS_AS(decode3d(raw, five), Error);
  HeadLayout3D L;
  L.classes = 3;
  const auto anchors = anchors3();
  CHECK_NOTHROW(decode3d(make_head3d(L), anchors));
  TensorContainer c64;
  c64.dtype = DType::c64;
  c64.dims = {16, 16, 4, 6, 13};
  c64.payload.resize(2 * 16 * 16 * 4 * 6 * 13);
  CHECK_THROWS_AS(decode3d(c64, anchors), Error);
}

TEST_CASE("encode/decode round trip 3D") {
  const auto anchors = anchors3();
  const HeadLayout3D L;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> r(0.5, 255.5), d(0.2, 63.8), s(0.7, 1.4);
  for (int t = 0; t < 500; ++t) {
    auto raw = make_head3d(L, -20.0f);
    const std::size_t q = rng() % 6;
    Box3D b;
    b.center = {r(rng), r(rng), d(rng)};
    b.size = {anchors[q][0] * s(rng), anchors[q][1] * s(rng), anchors[q][2] * s(rng)};
    b.class_id = static_cast<int>(rng() % 6);
    encode3d(raw, b, q, anchors);
    const auto dets = decode3d(raw, anchors);
    REQUIRE(dets.size() == 1);
    const auto& got = dets[0].box;
    CHECK(got.class_id == b.class_id);
    for (int k = 0; k < 3; ++k) {
      REQUIRE(close_rel(got.center[k], b.center[k], 1e-6));
      REQUIRE(close_rel(got.size[k], b.size[k], 1e-6));
    }
  }
}

TEST_CASE("decode2d examples and round trip") {
  const auto anchors = anchors2();
  const auto grid = CartesianGrid::for_geometry(RadarGeometry{});
  const HeadLayout2D L;
  const double rmax = grid.max_range();
  const double sz = 2 * rmax / 32, sx = rmax / 16;

  auto zero = make_head2d(L, 0.0f);
  const auto all = decode2d(zero, anchors, grid);
  CHECK(all.size() == 32 * 16 * 6);
  const auto& first = all[0];
  CHECK(first.box.center[0] == doctest::Approx(0.5 * sx));
  CHECK(first.box.center[1] == doctest::Approx(-rmax + 0.5 * sz));
  CHECK(first.box.size == anchors[0]);
  CHECK(decode2d(zero, anchors, grid, 1.0).empty());

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> x(0.1, rmax - 0.1), z(-rmax + 0.1, rmax - 0.1), s(0.7, 1.4);
  for (int t = 0; t < 500; ++t) {
    auto raw = make_head2d(L, -20.0f);
    const std::size_t q = rng() % 6;
    Box2D b;
    b.center = {x(rng), z(rng)};
    b.size = {anchors[q][0] * s(rng), anchors[q][1] * s(rng)};
    b.class_id = static_cast<int>(rng() % 6);
    encode2d(raw, b, q, anchors, grid);
    const auto dets = decode2d(raw, anchors, grid);
    REQUIRE(dets.size() == 1);
    for (int k = 0; k < 2; ++k) {
      REQUIRE(close_rel(dets[0].box.center[k], b.center[k], 1e-6));
      REQUIRE(close_rel(dets[0].box.size[k], b.size[k], 1e-6));
    }
  }
}

TEST_CASE("decode is monotone in objectness logit") {
  const auto anchors = anchors3();
  const HeadLayout3D L;
  std::mt19937_64 rng(2);
  std::normal_distribution<float> n(0.0f, 2.0f);
  auto raw = make_head3d(L);
  for (auto& v : raw.payload) v = n(rng);
  const auto before = decode3d(raw, anchors, 0.7).size();
  for (std::size_t c = 0; c < raw.payload.size(); c += L.channels()) raw.payload[c + 6] += 1.0f;
  CHECK(decode3d(raw, anchors, 0.7).size() >= before);
  for (const auto& d : decode3d(raw, anchors, 0.0)) {
    REQUIRE(d.box.center[2] >= 0.0);
    REQUIRE(d.box.center[2] < 64.0);
    REQUIRE(d.box.score.has_value());
  }
}

TEST_CASE("postprocess applies class-wise nms") {
  std::vector<Detection3D> dets(3);
  dets[0].box = {{10, 10, 10}, {8, 8, 4}, 1, 0.9};
  dets[1].box = {{11, 10, 10}, {8, 8, 4}, 1, 0.8};
  dets[2].box = {{11, 10, 10}, {8, 8, 4}, 2, 0.7};
  const auto kept = postprocess(dets);
  REQUIRE(kept.size() == 2);
  CHECK(*kept[0].box.score == 0.9);
  CHECK(kept[1].box.class_id == 2);

  std::vector<Detection2D> d2(2);
  d2[0].box = {{5, 0}, {2, 2}, 0, 0.6};
  d2[1].box = {{6, 0}, {2, 2}, 0, 0.7};  // IoU 1/3 > 0.3
  const auto k2 = postprocess(d2);
  REQUIRE(k2.size() == 1);
  CHECK(*k2[0].box.score == 0.7);
}
