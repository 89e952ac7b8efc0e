// Hand-built 5-frame, 2-class fixture shared by the eval unit test and the acceptance run.
//
// All boxes are 2 x 2 squares; a detection shifted by dx along x has
// IoU (2 - dx) / (2 + dx) with its GT.
//
//   frame 0: GT c0 @10.  det c0 0.90 dx 0.2 (0.818)
//   frame 1: GT c0 @20, c1 @30.  det c0 0.80 dx 0.8 (0.429); det c1 0.70 dx 0 (1.0)
//   frame 2: GT c0 @40.  det c0 0.95 far (FP); det c0 0.60 dx 1.2 (0.25)
//   frame 3: GT c1 @50.  det c1 0.85 dx 1.0 (1/3); det c1 0.50 dx 0.5 (0.6)
//   frame 4: GT c0 @80 (missed).  det c1 0.40 far (FP)
//
// c0 (4 GT), score order 0.95 0.90 0.80 0.60:
//   0.1: F T T T -> envelope 3/4 over recall 3/4      -> 0.5625
//   0.3: F T T F -> 2/3 over 1/2                      -> 1/3
//   0.5, 0.7: F T F F -> 1/2 over 1/4                 -> 0.125
// c1 (2 GT), score order 0.85 0.70 0.50 0.40:
//   0.1, 0.3: T T F F                                 -> 1
//   0.5: F T T F -> 2/3 over recall 1                 -> 2/3
//   0.7: F T F F -> 1/2 over 1/2                      -> 0.25
// pooled at 0.1 (6 GT): F T T T T T F F -> 5/6 * 5/6   -> 25/36
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "radkit/boxes.hpp"

namespace fixture {

struct EvalFixture {
  std::vector<std::string> class_names{"c0", "c1"};
  std::vector<std::vector<radkit::Box2D>> dets, gts;
  std::array<std::array<double, 2>, 4> ap{};  // [threshold][class]
  std::array<double, 4> map{};
  double pooled_ap_01 = 25.0 / 36.0;
};

inline radkit::Box2D sq(double x, int cls, std::optional<double> score = std::nullopt) {
  return {{x, 0.0}, {2.0, 2.0}, cls, score};
}

inline EvalFixture five_frames() {
  EvalFixture f;
  f.gts = {{sq(10, 0)}, {sq(20, 0), sq(30, 1)}, {sq(40, 0)}, {sq(50, 1)}, {sq(80, 0)}};
  f.dets = {{sq(10.2, 0, 0.90)},
            {sq(20.8, 0, 0.80), sq(30.0, 1, 0.70)},
            {sq(60.0, 0, 0.95), sq(41.2, 0, 0.60)},
            {sq(51.0, 1, 0.85), sq(50.5, 1, 0.50)},
            {sq(70.0, 1, 0.40)}};
  f.ap = {{{0.5625, 1.0}, {1.0 / 3.0, 1.0}, {0.125, 2.0 / 3.0}, {0.125, 0.25}}};
  for (std::size_t t = 0; t < 4; ++t) f.map[t] = (f.ap[t][0] + f.ap[t][1]) / 2.0;
  return f;
}

}  // namespace fixture
