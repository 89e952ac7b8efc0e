#include "radkit/geometry.hpp"

#include <cmath>
#include <numbers>

namespace radkit {

double RadarGeometry::sin_azimuth(double bin_value) const {
  const double half = static_cast<double>(azimuth_bins) / 2.0;
  return std::clamp(bin_value / half - 1.0, -1.0, 1.0);
}

double RadarGeometry::azimuth_rad(double bin_value) const { return std::asin(sin_azimuth(bin_value)); }

double RadarGeometry::azimuth_bin(double theta_rad) const {
  return (std::sin(theta_rad) / 2.0 + 0.5) * static_cast<double>(azimuth_bins);
}

CartesianGrid CartesianGrid::for_geometry(const RadarGeometry& geom, std::size_t depth_cells) {
  CartesianGrid g;
  g.depth_cells = depth_cells;
  g.width_cells = 2 * depth_cells;
  g.meters_per_cell = geom.max_range_m() / static_cast<double>(depth_cells);
  return g;
}

void CartesianGrid::validate() const {
  if (depth_cells == 0 || width_cells != 2 * depth_cells || !(meters_per_cell > 0))
    throw Error(ErrorCode::invariant_violation, "Cartesian grid needs width == 2 * depth and a positive cell size");
}

std::array<double, 2> polar_to_cart(double r, double theta) {
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  if (!(r >= 0) || !(std::abs(theta) <= kHalfPi + 1e-12))
    throw Error(ErrorCode::domain_violation, "polar_to_cart needs r >= 0 and |theta| <= pi/2");
  return {r * std::cos(theta), r * std::sin(theta)};
}

std::array<double, 2> cart_to_polar(double x, double z) { return {std::hypot(x, z), std::atan2(z, x)}; }

std::array<double, 4> cell_cartesian_bounds(std::size_t range_cell, std::size_t azimuth_cell,
                                            const RadarGeometry& geom) {
  const double rc = static_cast<double>(range_cell);
  const double ac = static_cast<double>(azimuth_cell);
  const double r0 = geom.range_m(std::max(0.0, rc - 0.5));
  const double r1 = geom.range_m(rc + 0.5);
  const double t0 = geom.azimuth_rad(ac - 0.5);
  const double t1 = geom.azimuth_rad(ac + 0.5);

  std::array<double, 4> b{1e300, -1e300, 1e300, -1e300};
  auto include = [&b](double r, double t) {
    const double x = r * std::cos(t);
    const double z = r * std::sin(t);
    b[0] = std::min(b[0], x);
    b[1] = std::max(b[1], x);
    b[2] = std::min(b[2], z);
    b[3] = std::max(b[3], z);
  };
  for (double r : {r0, r1})
    for (double t : {t0, t1}) include(r, t);
  // x = r cos(t) peaks at t = 0 inside the sector.
  if (t0 <= 0.0 && 0.0 <= t1) include(r1, 0.0);
  return b;
}

Map2D resample_ra_to_cart(const Map2D& ra_map, const CartesianGrid& grid, const RadarGeometry& geom) {
  grid.validate();
  Map2D out = Map2D::zeros(grid.width_cells, grid.depth_cells);
  const double r_max = grid.max_range();
  const auto n_r = static_cast<double>(ra_map.rows);
  const auto n_a = static_cast<double>(ra_map.cols);

  for (std::size_t row = 0; row < grid.width_cells; ++row) {
    const double z = grid.z_of_row(static_cast<double>(row) + 0.5);
    for (std::size_t col = 0; col < grid.depth_cells; ++col) {
      const double x = grid.x_of_column(static_cast<double>(col) + 0.5);
      const auto [r, theta] = cart_to_polar(x, z);
      if (r > r_max || std::abs(theta) > std::numbers::pi / 2) continue;

      const double fr = r / geom.range_m_per_bin;
      const double fa = geom.azimuth_bin(theta);
      if (fr > n_r - 1.0 || fa > n_a - 1.0 || fa < 0.0) continue;
      const auto r0 = static_cast<std::size_t>(fr);
      const auto a0 = static_cast<std::size_t>(fa);
      const std::size_t r1 = std::min(r0 + 1, ra_map.rows - 1);
      const std::size_t a1 = std::min(a0 + 1, ra_map.cols - 1);
      const double wr = fr - static_cast<double>(r0);
      const double wa = fa - static_cast<double>(a0);
      out.at(row, col) = (1 - wr) * ((1 - wa) * ra_map.at(r0, a0) + wa * ra_map.at(r0, a1)) +
                         wr * ((1 - wa) * ra_map.at(r1, a0) + wa * ra_map.at(r1, a1));
    }
  }
  return out;
}

double circular_overlap(double center_a, double len_a, double center_b, double len_b, double period) {
  len_a = std::min(len_a, period);
  len_b = std::min(len_b, period);
  const double a_lo = center_a - len_a / 2;
  const double b_lo = center_b - len_b / 2;
  // Bring b's start into [a_lo, a_lo + period); b may then overlap a directly and,
  // wrapping backwards, through its copy one period earlier.
  const double shift = std::floor((b_lo - a_lo) / period) * period;
  const double b0 = b_lo - shift;
  return interval_overlap(a_lo, a_lo + len_a, b0, b0 + len_b) +
         interval_overlap(a_lo, a_lo + len_a, b0 - period, b0 - period + len_b);
}

double iou3d(const Box3D& a, const Box3D& b, double doppler_period) {
  const double o_r = interval_overlap(a.center[0] - a.size[0] / 2, a.center[0] + a.size[0] / 2,
                                      b.center[0] - b.size[0] / 2, b.center[0] + b.size[0] / 2);
  const double o_a = interval_overlap(a.center[1] - a.size[1] / 2, a.center[1] + a.size[1] / 2,
                                      b.center[1] - b.size[1] / 2, b.center[1] + b.size[1] / 2);
  const double o_d = circular_overlap(a.center[2], a.size[2], b.center[2], b.size[2], doppler_period);
  const double inter = o_r * o_a * o_d;
  const double vol_a = a.size[0] * a.size[1] * std::min(a.size[2], doppler_period);
  const double vol_b = b.size[0] * b.size[1] * std::min(b.size[2], doppler_period);
  const double uni = vol_a + vol_b - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double iou2d(const Box2D& a, const Box2D& b) {
  const double ox = interval_overlap(a.center[0] - a.size[0] / 2, a.center[0] + a.size[0] / 2,
                                     b.center[0] - b.size[0] / 2, b.center[0] + b.size[0] / 2);
  const double oz = interval_overlap(a.center[1] - a.size[1] / 2, a.center[1] + a.size[1] / 2,
                                     b.center[1] - b.size[1] / 2, b.center[1] + b.size[1] / 2);
  const double inter = ox * oz;
  const double uni = a.size[0] * a.size[1] + b.size[0] * b.size[1] - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace radkit
