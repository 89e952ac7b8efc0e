#pragma once

#include <array>
#include <optional>

namespace radkit {

/// Axis-aligned box on the Range-Azimuth-Doppler grid, in bin units.
/// Cell k spans [k, k+1) on each axis; the Doppler coordinate is periodic.
struct Box3D {
  std::array<double, 3> center{};  // (range, azimuth, doppler)
  std::array<double, 3> size{};    // (w_range, w_azimuth, w_doppler)
  int class_id = -1;               // -1: unlabeled
  std::optional<double> score;

  bool operator==(const Box3D&) const = default;
};

/// Axis-aligned box on the Cartesian bird-eye-view plane, in meters.
/// center = (x forward, z lateral); size[0] spans x, size[1] spans z.
struct Box2D {
  std::array<double, 2> center{};
  std::array<double, 2> size{};
  int class_id = -1;
  std::optional<double> score;

  bool operator==(const Box2D&) const = default;
};

}  // namespace radkit
