#include "radkit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <thread>

#include "radkit/error.hpp"

namespace radkit {

namespace fs = std::filesystem;

TensorContainer to_tensor(const Map2D& map) {
  TensorContainer t;
  t.dtype = DType::f32;
  t.dims = {static_cast<std::uint32_t>(map.rows), static_cast<std::uint32_t>(map.cols)};
  t.payload.assign(map.data.begin(), map.data.end());
  return t;
}

Map2D map_from_tensor(const TensorContainer& t) {
  if (t.dtype != DType::f32 || t.dims.size() != 2) throw Error(ErrorCode::shape_mismatch, "expected a 2-D f32 map");
  Map2D m = Map2D::zeros(t.dims[0], t.dims[1]);
  std::copy(t.payload.begin(), t.payload.end(), m.data.begin());
  return m;
}

ProjectionMatrix default_stereo_projection() {
  ProjectionMatrix p;
  p.m << 0, 0, 1, 0,
         1, 0, 0, 0;
  return p;
}

std::vector<LabeledPoint> parse_labels(const nlohmann::json& doc) {
  ProjectionMatrix proj = default_stereo_projection();
  const nlohmann::json* points = &doc;
  if (doc.is_object()) {
    if (auto it = doc.find("projection"); it != doc.end()) {
      const auto rows = it->get<std::vector<std::array<double, 4>>>();
      if (rows.size() != 2) throw Error(ErrorCode::shape_mismatch, "projection must be 2 x 4");
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 4; ++c) proj.m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    points = &doc.at("points");
  }
  std::vector<LabeledPoint> out;
  for (const auto& e : *points) {
    LabeledPoint p;
    if (e.contains("xyz"))
      p.xz = proj.apply(e.at("xyz").get<std::array<double, 3>>());
    else
      p.xz = e.at("xz").get<std::array<double, 2>>();
    p.class_id = e.at("class").get<int>();
    out.push_back(p);
  }
  return out;
}

std::vector<LabeledPoint> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open labels " + path.string());
  try {
    return parse_labels(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_json, path.string() + ": " + e.what());
  }
}

namespace {

struct FrameOutcome {
  bool ok = false;
  std::string error;
  AnnotationRecord record;
  StatsAccumulator stats;
};

FrameOutcome process_frame(const ProjectConfig& cfg, RadProcessor& proc, const std::string& id) {
  FrameOutcome out;
  try {
    const auto adc = adc_from_tensor(read_tensor(cfg.adc_path(id)));
    const auto rad = proc.process(adc);
    std::vector<LabeledPoint> labels;
    if (fs::exists(cfg.labels_path(id))) labels = read_labels(cfg.labels_path(id));
    const auto fa = annotate_frame(rad, cfg.annotate, labels, id);
    write_tensor(cfg.rd_path(id), to_tensor(fa.rd));
    write_tensor(cfg.ra_path(id), to_tensor(ra_map(rad)));
    out.stats.add(log_magnitude(rad));
    out.record = fa.record;
    out.record.class_names = cfg.class_names;
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

PipelineResult run_pipeline(const ProjectConfig& cfg, std::span<const std::string> frame_ids, unsigned jobs) {
  PipelineResult result;
  if (frame_ids.empty()) return result;
  fs::create_directories(cfg.dataset_root / "maps");

  ProjectConfig local = cfg;
  local.annotate.cfar = cfg.cfar;
  const unsigned n_workers =
      std::min<unsigned>(jobs ? jobs : cfg.effective_jobs(), static_cast<unsigned>(frame_ids.size()));

  std::vector<FrameOutcome> outcomes(frame_ids.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    RadProcessor proc(local.dsp);
    for (std::size_t i = next++; i < frame_ids.size(); i = next++) outcomes[i] = process_frame(local, proc, frame_ids[i]);
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::map<std::string, AnnotationRecord> records;
  if (fs::exists(cfg.annotations_path()))
    for (auto& r : read_annotations(cfg.annotations_path())) records[r.frame_id] = std::move(r);

  StatsAccumulator stats;
  for (std::size_t i = 0; i < frame_ids.size(); ++i) {
    auto& o = outcomes[i];
    if (!o.ok) {
      result.errors.push_back({frame_ids[i], o.error});
      continue;
    }
    result.processed.push_back(frame_ids[i]);
    stats.merge(o.stats);
    auto it = records.find(frame_ids[i]);
    if (it != records.end()) {
      // keep the revision when nothing changed so reruns are byte-identical
      AnnotationRecord probe = o.record;
      probe.revision = it->second.revision;
      probe.extra = it->second.extra;
      o.record.revision = probe == it->second ? it->second.revision : it->second.revision + 1;
      o.record.extra = it->second.extra;
    }
    records[frame_ids[i]] = std::move(o.record);
  }

  if (!result.processed.empty()) {
    std::vector<AnnotationRecord> all;
    all.reserve(records.size());
    for (auto& [id, r] : records) all.push_back(std::move(r));
    write_annotations(cfg.annotations_path(), all);
    try {
      result.stats = stats.finish();
      write_file_atomic(cfg.stats_path(), nlohmann::json(*result.stats).dump(2) + "\n");
    } catch (const Error& e) {
      if (e.code() != ErrorCode::zero_variance) throw;
    }
  }
  return result;
}

}  // namespace radkit
