#include "radkit/annotate.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "radkit/error.hpp"

namespace radkit {

void DbscanConfig::validate() const {
  if (!(eps > 0)) throw Error(ErrorCode::invariant_violation, "dbscan eps must be > 0");
  if (min_pts < 1) throw Error(ErrorCode::invariant_violation, "dbscan min_pts must be >= 1");
  for (double s : axis_scale)
    if (!(s > 0)) throw Error(ErrorCode::invariant_violation, "dbscan axis scales must be > 0");
  if (!(doppler_period > 0)) throw Error(ErrorCode::invariant_violation, "doppler_period must be > 0");
}

void to_json(nlohmann::json& j, const DbscanConfig& c) {
  j = {{"eps", c.eps}, {"min_pts", c.min_pts}, {"axis_scale", c.axis_scale}, {"doppler_period", c.doppler_period}};
}

void from_json(const nlohmann::json& j, DbscanConfig& c) {
  c.eps = j.value("eps", c.eps);
  c.min_pts = j.value("min_pts", c.min_pts);
  c.axis_scale = j.value("axis_scale", c.axis_scale);
  c.doppler_period = j.value("doppler_period", c.doppler_period);
  c.validate();
}

DetectionMask connect_patterns(const DetectionMask& mask, std::size_t half_width) {
  if (half_width == 0) return mask;
  const std::size_t n_r = mask.range_bins;
  const std::size_t n_d = mask.doppler_bins;
  const long g = static_cast<long>(half_width);

  auto pass = [&](const DetectionMask& in, bool dilate) {
    DetectionMask out = DetectionMask::empty(n_r, n_d);
    for (std::size_t n = 0; n < n_r; ++n)
      for (std::size_t k = 0; k < n_d; ++k) {
        bool any = false;
        bool all = true;
        for (long dr = -g; dr <= g; ++dr) {
          const long r = static_cast<long>(n) + dr;
          if (r < 0 || r >= static_cast<long>(n_r)) continue;
          for (long dk = -g; dk <= g; ++dk) {
            const auto kk = static_cast<std::size_t>(((static_cast<long>(k) + dk) % static_cast<long>(n_d) +
                                                      static_cast<long>(n_d)) %
                                                     static_cast<long>(n_d));
            const bool v = in.at(static_cast<std::size_t>(r), kk);
            any = any || v;
            all = all && v;
          }
        }
        out.set(n, k, dilate ? any : all);
      }
    return out;
  };
  return pass(pass(mask, true), false);
}

namespace {

double circular_diff(double a, double b, double period) {
  double d = std::fmod(std::abs(a - b), period);
  return std::min(d, period - d);
}

class NeighbourIndex {
 public:
  NeighbourIndex(std::span<const std::array<double, 3>> pts, const DbscanConfig& cfg) : pts_(pts), cfg_(cfg) {
    for (std::size_t i = 0; i < pts.size(); ++i) buckets_[key(bucket(pts[i][0], 0), bucket(pts[i][1], 1))].push_back(i);
  }

  std::vector<std::size_t> query(std::size_t i) const {
    std::vector<std::size_t> out;
    const long br = bucket(pts_[i][0], 0);
    const long ba = bucket(pts_[i][1], 1);
    for (long dr = -1; dr <= 1; ++dr)
      for (long da = -1; da <= 1; ++da) {
        auto it = buckets_.find(key(br + dr, ba + da));
        if (it == buckets_.end()) continue;
        for (std::size_t j : it->second)
          if (distance2(i, j) <= cfg_.eps * cfg_.eps) out.push_back(j);
      }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  long bucket(double v, int axis) const { return static_cast<long>(std::floor(v * cfg_.axis_scale[axis] / cfg_.eps)); }
  static std::uint64_t key(long a, long b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }
  double distance2(std::size_t i, std::size_t j) const {
    const double dr = (pts_[i][0] - pts_[j][0]) * cfg_.axis_scale[0];
    const double da = (pts_[i][1] - pts_[j][1]) * cfg_.axis_scale[1];
    const double dd = circular_diff(pts_[i][2], pts_[j][2], cfg_.doppler_period) * cfg_.axis_scale[2];
    return dr * dr + da * da + dd * dd;
  }

  std::span<const std::array<double, 3>> pts_;
  const DbscanConfig& cfg_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

constexpr int kUnvisited = -2;

}  // namespace

std::vector<int> dbscan(std::span<const std::array<double, 3>> points, const DbscanConfig& cfg) {
  cfg.validate();
  for (const auto& p : points)
    for (double v : p)
      if (!std::isfinite(v)) throw Error(ErrorCode::invariant_violation, "dbscan points must be finite");

  const NeighbourIndex index(points, cfg);
  std::vector<int> labels(points.size(), kUnvisited);
  int cluster = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] != kUnvisited) continue;
    const auto seeds = index.query(i);
    if (seeds.size() < cfg.min_pts) {
      labels[i] = kNoise;
      continue;
    }
    labels[i] = cluster;
    std::vector<std::size_t> queue(seeds.begin(), seeds.end());
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const std::size_t q = queue[qi];
      if (labels[q] == kNoise) labels[q] = cluster;
      if (labels[q] != kUnvisited) continue;
      labels[q] = cluster;
      const auto more = index.query(q);
      if (more.size() >= cfg.min_pts) queue.insert(queue.end(), more.begin(), more.end());
    }
    ++cluster;
  }
  return labels;
}

std::vector<Instance> extract_instances(const RadCube& rad, const DetectionMask& mask_rd,
                                        double azimuth_rel_threshold, const DbscanConfig& db,
                                        const std::string& frame_id) {
  if (!rad.is_complex()) throw Error(ErrorCode::stage_violation, "extract_instances needs a complex RAD cube");
  const auto s = rad.shape;
  if (mask_rd.range_bins != s.d0 || mask_rd.doppler_bins != s.d2)
    throw Error(ErrorCode::shape_mismatch, "RD mask does not match the RAD cube");

  std::vector<RadCell> cells;
  std::vector<double> mags(s.d1);
  for (std::size_t n = 0; n < s.d0; ++n)
    for (std::size_t k = 0; k < s.d2; ++k) {
      if (!mask_rd.at(n, k)) continue;
      double peak = 0.0;
      for (std::size_t a = 0; a < s.d1; ++a) {
        mags[a] = std::abs(rad.complex_data[s.index(n, a, k)]);
        peak = std::max(peak, mags[a]);
      }
      if (!(peak > 0)) continue;
      for (std::size_t a = 0; a < s.d1; ++a)
        if (mags[a] >= azimuth_rel_threshold * peak)
          cells.push_back({static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(k)});
    }

  std::vector<std::array<double, 3>> points;
  points.reserve(cells.size());
  for (const auto& c : cells) points.push_back({double(c.range), double(c.azimuth), double(c.doppler)});
  DbscanConfig cfg = db;
  cfg.doppler_period = static_cast<double>(s.d2);
  const auto labels = dbscan(points, cfg);

  int n_clusters = 0;
  for (int l : labels) n_clusters = std::max(n_clusters, l + 1);
  std::vector<Instance> out(static_cast<std::size_t>(n_clusters));
  for (auto& inst : out) inst.frame_id = frame_id;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (labels[i] >= 0) out[static_cast<std::size_t>(labels[i])].cells.push_back(cells[i]);
  for (auto& inst : out) std::sort(inst.cells.begin(), inst.cells.end());
  return out;
}

std::pair<std::uint32_t, std::uint32_t> minimal_circular_cover(std::span<const std::uint32_t> values,
                                                               std::uint32_t period) {
  if (values.empty() || period == 0) throw Error(ErrorCode::invariant_violation, "empty circular cover");
  std::vector<std::uint32_t> v(values.begin(), values.end());
  for (auto& x : v) x %= period;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  // The cover is the complement of the largest empty gap. Gap after v[i] runs to v[i+1].
  std::uint32_t best_gap = 0;
  std::uint32_t best_start = v.front();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::uint32_t next = (i + 1 < v.size()) ? v[i + 1] : v.front() + period;
    const std::uint32_t gap = next - v[i] - 1;
    const std::uint32_t start = next % period;
    if (gap > best_gap || (gap == best_gap && start < best_start)) {
      best_gap = gap;
      best_start = start;
    }
  }
  return {best_start, period - best_gap};
}

std::pair<Box3D, Box2D> instance_to_boxes(const Instance& inst, const RadarGeometry& geom) {
  if (inst.cells.empty()) throw Error(ErrorCode::invariant_violation, "instance has no cells");
  std::uint32_t r_lo = UINT32_MAX, r_hi = 0, a_lo = UINT32_MAX, a_hi = 0;
  std::vector<std::uint32_t> dopplers;
  dopplers.reserve(inst.cells.size());
  double x_lo = 1e300, x_hi = -1e300, z_lo = 1e300, z_hi = -1e300;
  for (const auto& c : inst.cells) {
    r_lo = std::min(r_lo, c.range);
    r_hi = std::max(r_hi, c.range);
    a_lo = std::min(a_lo, c.azimuth);
    a_hi = std::max(a_hi, c.azimuth);
    dopplers.push_back(c.doppler);
    const auto b = cell_cartesian_bounds(c.range, c.azimuth, geom);
    x_lo = std::min(x_lo, b[0]);
    x_hi = std::max(x_hi, b[1]);
    z_lo = std::min(z_lo, b[2]);
    z_hi = std::max(z_hi, b[3]);
  }
  const auto period = static_cast<std::uint32_t>(geom.doppler_bins);
  const auto [d_start, d_len] = minimal_circular_cover(dopplers, period);

  Box3D b3;
  b3.center = {(r_lo + r_hi + 1) / 2.0, (a_lo + a_hi + 1) / 2.0,
               std::fmod(d_start + d_len / 2.0, static_cast<double>(period))};
  b3.size = {double(r_hi - r_lo + 1), double(a_hi - a_lo + 1), double(d_len)};
  b3.class_id = inst.class_id.value_or(-1);

  Box2D b2;
  b2.center = {(x_lo + x_hi) / 2, (z_lo + z_hi) / 2};
  b2.size = {x_hi - x_lo, z_hi - z_lo};
  b2.class_id = b3.class_id;
  return {b3, b2};
}

std::array<double, 2> ProjectionMatrix::apply(const std::array<double, 3>& p) const {
  const Eigen::Vector4d h(p[0], p[1], p[2], 1.0);
  const Eigen::Vector2d q = m * h;
  return {q[0], q[1]};
}

ProjectionFit fit_projection(std::span<const std::array<double, 3>> stereo_pts,
                             std::span<const std::array<double, 2>> radar_pts) {
  if (stereo_pts.size() != radar_pts.size())
    throw Error(ErrorCode::invariant_violation, "correspondence lists differ in length");
  const auto n = static_cast<Eigen::Index>(stereo_pts.size());
  if (n < 4)
    throw Error(ErrorCode::rank_deficient, "need at least 4 correspondences, got " + std::to_string(n));

  Eigen::MatrixXd a(n, 4);
  Eigen::MatrixXd b(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = stereo_pts[static_cast<std::size_t>(i)];
    const auto& q = radar_pts[static_cast<std::size_t>(i)];
    a.row(i) << p[0], p[1], p[2], 1.0;
    b.row(i) << q[0], q[1];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) throw Error(ErrorCode::rank_deficient, "correspondences do not span 3D affine space");
  const Eigen::MatrixXd x = qr.solve(b);  // 4 x 2

  ProjectionFit fit;
  fit.projection.m = x.transpose();
  fit.rms_residual = std::sqrt((a * x - b).squaredNorm() / static_cast<double>(n));
  return fit;
}

std::vector<Instance> transfer_labels(std::vector<Instance> instances, std::span<const LabeledPoint> points,
                                      const RadarGeometry& geom, double margin_m) {
  for (auto& inst : instances) {
    if (inst.cells.empty()) continue;
    const Box2D box = instance_to_boxes(inst, geom).second;
    const double x0 = box.center[0] - box.size[0] / 2 - margin_m;
    const double x1 = box.center[0] + box.size[0] / 2 + margin_m;
    const double z0 = box.center[1] - box.size[1] / 2 - margin_m;
    const double z1 = box.center[1] + box.size[1] / 2 + margin_m;

    struct Tally {
      std::size_t count = 0;
      double sx = 0, sz = 0;
    };
    std::map<int, Tally> tally;
    for (const auto& p : points)
      if (p.xz[0] >= x0 && p.xz[0] <= x1 && p.xz[1] >= z0 && p.xz[1] <= z1) {
        auto& t = tally[p.class_id];
        ++t.count;
        t.sx += p.xz[0];
        t.sz += p.xz[1];
      }
    if (tally.empty()) {
      inst.class_id.reset();
      continue;
    }
    int best = -1;
    std::size_t best_count = 0;
    double best_dist = 0;
    for (const auto& [cls, t] : tally) {
      const double cx = t.sx / double(t.count) - box.center[0];
      const double cz = t.sz / double(t.count) - box.center[1];
      const double dist = std::hypot(cx, cz);
      if (t.count > best_count || (t.count == best_count && dist < best_dist)) {
        best = cls;
        best_count = t.count;
        best_dist = dist;
      }
    }
    inst.class_id = best;
  }
  return instances;
}

void to_json(nlohmann::json& j, const AnnotateConfig& c) {
  j = {{"cfar", c.cfar},
       {"bridge_half_width", c.bridge_half_width},
       {"azimuth_rel_threshold", c.azimuth_rel_threshold},
       {"dbscan", c.dbscan},
       {"label_margin_m", c.label_margin_m},
       {"range_m_per_bin", c.geometry.range_m_per_bin}};
}

void from_json(const nlohmann::json& j, AnnotateConfig& c) {
  if (auto it = j.find("cfar"); it != j.end()) c.cfar = it->get<CfarConfig>();
  c.bridge_half_width = j.value("bridge_half_width", c.bridge_half_width);
  c.azimuth_rel_threshold = j.value("azimuth_rel_threshold", c.azimuth_rel_threshold);
  if (auto it = j.find("dbscan"); it != j.end()) c.dbscan = it->get<DbscanConfig>();
  c.label_margin_m = j.value("label_margin_m", c.label_margin_m);
  c.geometry.range_m_per_bin = j.value("range_m_per_bin", c.geometry.range_m_per_bin);
}

FrameAnnotation annotate_frame(const RadCube& rad, const AnnotateConfig& cfg, std::span<const LabeledPoint> labels,
                               const std::string& frame_id) {
  FrameAnnotation fa;
  fa.rd = rd_map(rad);
  fa.mask = connect_patterns(cfar_2d(fa.rd, cfg.cfar), cfg.bridge_half_width);
  RadarGeometry geom = cfg.geometry;
  geom.range_bins = rad.shape.d0;
  geom.azimuth_bins = rad.shape.d1;
  geom.doppler_bins = rad.shape.d2;
  fa.instances = transfer_labels(extract_instances(rad, fa.mask, cfg.azimuth_rel_threshold, cfg.dbscan, frame_id),
                                 labels, geom, cfg.label_margin_m);
  fa.record.frame_id = frame_id;
  fa.record.source = AnnotationSource::automatic;
  for (const auto& inst : fa.instances) {
    auto [b3, b2] = instance_to_boxes(inst, geom);
    fa.record.boxes3d.push_back(b3);
    fa.record.boxes2d.push_back(b2);
  }
  return fa;
}

}  // namespace radkit
