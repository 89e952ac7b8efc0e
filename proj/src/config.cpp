#include "radkit/config.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "radkit/error.hpp"

namespace radkit {

namespace fs = std::filesystem;
using nlohmann::json;

void ProjectConfig::validate() const {
  if (class_names.empty()) throw Error(ErrorCode::invariant_violation, "class_names must not be empty");
  if (dsp.azimuth_bins < dsp.adc_shape.d1)
    throw Error(ErrorCode::invariant_violation, "azimuth_bins must be >= the antenna count");
  cfar.validate();
  annotate.dbscan.validate();
  if (anchors.k == 0) throw Error(ErrorCode::invariant_violation, "anchors.k must be >= 1");
  if (!(detect.obj_threshold >= 0 && detect.obj_threshold <= 1))
    throw Error(ErrorCode::invariant_violation, "detect.obj_threshold must lie in [0, 1]");
  for (double t : eval.thresholds)
    if (!(t > 0 && t <= 1)) throw Error(ErrorCode::invariant_violation, "eval thresholds must lie in (0, 1]");
  if (!(eval.test_ratio >= 0 && eval.test_ratio <= 1) || !(eval.val_ratio >= 0 && eval.val_ratio <= 1))
    throw Error(ErrorCode::invariant_violation, "split ratios must lie in [0, 1]");
  if (server.port < 0 || server.port > 65535) throw Error(ErrorCode::invariant_violation, "server.port out of range");
}

unsigned ProjectConfig::effective_jobs() const {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

void to_json(json& j, const ProjectConfig& c) {
  j = json{{"dataset_root", c.dataset_root.string()},
           {"class_names", c.class_names},
           {"dsp", c.dsp},
           {"cfar", c.cfar},
           {"annotate", c.annotate},
           {"anchors", {{"k", c.anchors.k}, {"restarts", c.anchors.restarts}}},
           {"detect", {{"obj_threshold", c.detect.obj_threshold}, {"nms3d", c.detect.nms3d}, {"nms2d", c.detect.nms2d}}},
           {"eval",
            {{"thresholds", c.eval.thresholds}, {"test_ratio", c.eval.test_ratio}, {"val_ratio", c.eval.val_ratio}}},
           {"server", {{"host", c.server.host}, {"port", c.server.port}, {"static_dir", c.server.static_dir}}},
           {"jobs", c.jobs},
           {"seed", c.seed}};
  j["annotate"].erase("cfar");
}

void from_json(const json& j, ProjectConfig& c) {
  c = ProjectConfig{};
  if (j.contains("dataset_root")) c.dataset_root = j.at("dataset_root").get<std::string>();
  if (j.contains("class_names")) c.class_names = j.at("class_names").get<std::vector<std::string>>();
  if (j.contains("dsp")) c.dsp = j.at("dsp").get<DspConfig>();
  if (j.contains("annotate")) c.annotate = j.at("annotate").get<AnnotateConfig>();
  if (j.contains("cfar")) c.cfar = j.at("cfar").get<CfarConfig>();
  c.annotate.cfar = c.cfar;
  if (j.contains("anchors")) {
    const auto& a = j.at("anchors");
    c.anchors.k = a.value("k", c.anchors.k);
    c.anchors.restarts = a.value("restarts", c.anchors.restarts);
  }
  if (j.contains("detect")) {
    const auto& d = j.at("detect");
    c.detect.obj_threshold = d.value("obj_threshold", c.detect.obj_threshold);
    c.detect.nms3d = d.value("nms3d", c.detect.nms3d);
    c.detect.nms2d = d.value("nms2d", c.detect.nms2d);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    c.eval.thresholds = e.value("thresholds", c.eval.thresholds);
    c.eval.test_ratio = e.value("test_ratio", c.eval.test_ratio);
    c.eval.val_ratio = e.value("val_ratio", c.eval.val_ratio);
  }
  if (j.contains("server")) {
    const auto& s = j.at("server");
    c.server.host = s.value("host", c.server.host);
    c.server.port = s.value("port", c.server.port);
    c.server.static_dir = s.value("static_dir", c.server.static_dir);
  }
  c.jobs = j.value("jobs", 0u);
  c.seed = j.value("seed", std::uint64_t{0});
}

ProjectConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open config " + path.string());
  ProjectConfig cfg;
  try {
    cfg = json::parse(in).get<ProjectConfig>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::malformed_json, path.string() + ": " + e.what());
  }
  if (cfg.dataset_root.is_relative()) cfg.dataset_root = fs::absolute(path).parent_path() / cfg.dataset_root;
  cfg.dataset_root = cfg.dataset_root.lexically_normal();
  if (!fs::is_directory(cfg.dataset_root))
    throw Error(ErrorCode::io_failure, "dataset_root does not exist: " + cfg.dataset_root.string());
  if (!cfg.server.static_dir.empty()) {
    fs::path s = cfg.server.static_dir;
    if (s.is_relative()) s = fs::absolute(path).parent_path() / s;
    if (!fs::is_directory(s)) throw Error(ErrorCode::io_failure, "server.static_dir does not exist: " + s.string());
    cfg.server.static_dir = s.lexically_normal().string();
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> list_frames(const ProjectConfig& cfg) {
  std::vector<std::string> ids;
  const fs::path dir = cfg.dataset_root / "adc";
  if (!fs::is_directory(dir)) return ids;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".rdt") ids.push_back(e.path().stem().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace radkit
