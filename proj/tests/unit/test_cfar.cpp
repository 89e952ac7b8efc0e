#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "radkit/cfar.hpp"
#include "radkit/error.hpp"

using namespace radkit;

namespace {

Map2D random_map(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Map2D m = Map2D::zeros(rows, cols);
  for (auto& v : m.data) v = e(rng);
  return m;
}

std::vector<std::uint8_t> reference(const Map2D& m, const CfarConfig& c) {
  return oracle::cfar(m.data, m.rows, m.cols, c.variant == CfarVariant::ca ? 0 : 1, static_cast<int>(c.train_range),
                      static_cast<int>(c.train_doppler), static_cast<int>(c.guard_range),
                      static_cast<int>(c.guard_doppler), c.effective_alpha(), c.os_rank);
}

}  // namespace

TEST_CASE("ca_alpha") {
  CHECK(ca_alpha(1e-2, 16) == doctest::Approx(16 * (std::pow(10.0, 2.0 / 16) - 1)).epsilon(1e-12));
  CHECK(ca_alpha(1e-2, 16) == doctest::Approx(5.3363).epsilon(1e-4));
  CHECK(ca_alpha(1.0, 16) == doctest::Approx(0.0));
  CHECK(ca_alpha(0.999999, 16) < 1e-4);
  CHECK_THROWS_AS(ca_alpha(0.0, 16), Error);
  CHECK_THROWS_AS(ca_alpha(1.5, 16), Error);
  CHECK_THROWS_AS(ca_alpha(0.1, 0), Error);
}

TEST_CASE("constant map with alpha 2 is empty") {
  Map2D m = Map2D::zeros(32, 16);
  for (auto& v : m.data) v = 3.0;
  for (auto variant : {CfarVariant::ca, CfarVariant::os}) {
    CfarConfig c;
    c.variant = variant;
    c.alpha = 2.0;
    c.train_range = 4;
    c.train_doppler = 2;
    c.guard_range = 1;
    c.guard_doppler = 1;
    CHECK(cfar_2d(m, c).count() == 0);
  }
}

TEST_CASE("single spike detected alone") {
  Map2D m = Map2D::zeros(64, 32);
  for (auto& v : m.data) v = 1.0;
  m.at(20, 10) = 100.0;
  CfarConfig c;
  c.alpha = 5;
  c.train_range = 4;
  c.train_doppler = 4;
  c.guard_range = 1;
  c.guard_doppler = 1;
  const auto mask = cfar_2d(m, c);
  CHECK(mask.count() == 1);
  CHECK(mask.at(20, 10));
  CHECK(mask.data == reference(m, c));
}

TEST_CASE("Doppler wraps: a spike on the last bin sees training cells from bin 0") {
  Map2D m = Map2D::zeros(32, 16);
  for (auto& v : m.data) v = 1.0;
  // Raise the cells that only a wrapped window reaches; the spike must then survive
  // only if the wrap is honoured.
  for (std::size_t n = 0; n < 32; ++n)
    for (std::size_t k = 0; k < 4; ++k) m.at(n, k) = 50.0;
  m.at(10, 15) = 30.0;
  CfarConfig c;
  c.alpha = 2;
  c.train_range = 2;
  c.train_doppler = 4;
  c.guard_range = 1;
  c.guard_doppler = 1;
  const auto mask = cfar_2d(m, c);
  CHECK_FALSE(mask.at(10, 15));
  CHECK(mask.data == reference(m, c));
}

TEST_CASE("exhaustive equality with the sliding-window reference") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_map(32, 16, rng);
    for (auto variant : {CfarVariant::ca, CfarVariant::os}) {
      CfarConfig c;
      c.variant = variant;
      c.train_range = 1 + trial % 4;
      c.train_doppler = 1 + trial % 3;
      c.guard_range = trial % 3;
      c.guard_doppler = trial % 2;
      c.alpha = 1.5 + 0.1 * (trial % 7);
      c.os_rank = 0.5 + 0.05 * (trial % 10);
      REQUIRE(cfar_2d(m, c).data == reference(m, c));
    }
  }
}

TEST_CASE("scale invariance and alpha monotonicity") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = random_map(64, 32, rng);
    for (auto variant : {CfarVariant::ca, CfarVariant::os}) {
      CfarConfig c;
      c.variant = variant;
      c.alpha = 3.0;
      c.train_range = 4;
      c.train_doppler = 4;
      c.guard_range = 1;
      c.guard_doppler = 1;
      const auto base = cfar_2d(m, c);
      Map2D scaled = m;
      for (auto& v : scaled.data) v *= 1024.0;  // exact power of two keeps comparisons exact
      CHECK(cfar_2d(scaled, c) == base);

      CfarConfig lo = c;
      lo.alpha = 2.0;
      const auto more = cfar_2d(m, lo);
      for (std::size_t i = 0; i < base.data.size(); ++i)
        if (base.data[i]) REQUIRE(more.data[i]);
    }
  }
}

TEST_CASE("window too large") {
  Map2D m = Map2D::zeros(32, 16);
  CfarConfig c;
  c.train_doppler = 8;
  c.guard_doppler = 2;
  try {
    cfar_2d(m, c);
    FAIL("expected window_too_large");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::window_too_large);
  }
}

TEST_CASE("config validation and json") {
  CfarConfig c;
  c.train_range = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.os_rank = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.variant = CfarVariant::os;
  c.train_range = 6;
  c.guard_doppler = 3;
  c.alpha = 4.5;
  const auto b = nlohmann::json(c).get<CfarConfig>();
  CHECK(b.variant == CfarVariant::os);
  CHECK(b.train_range == 6);
  CHECK(b.guard_doppler == 3);
  CHECK(b.alpha == 4.5);
  // default alpha derives from the full training count
  CfarConfig d;
  CHECK(d.effective_alpha() == doctest::Approx(ca_alpha(1e-3, d.full_training_count())));
  CHECK(d.full_training_count() == 21u * 13u - 5u * 5u);
}
