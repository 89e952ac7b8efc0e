/**
 * @file config.hpp
 * @brief Project-wide configuration document: dataset location, class list and
 *        the per-module settings, loaded from a single JSON file.
 */
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "radkit/annotate.hpp"
#include "radkit/dsp.hpp"

namespace radkit {

struct AnchorConfig {
  std::uint32_t k = 6;
  std::uint32_t restarts = 4;
};

struct DetectConfig {
  double obj_threshold = 0.5;
  double nms3d = 0.1;
  double nms2d = 0.3;
};

struct EvalConfig {
  std::vector<double> thresholds{0.1, 0.3, 0.5, 0.7};
  double test_ratio = 0.2;
  double val_ratio = 0.1;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;  // built review UI assets; empty disables static serving
};

/// Dataset layout under `dataset_root`:
///   adc/<id>.rdt      complex ADC cubes
///   labels/<id>.json  optional labeled stereo points [{"xz": [x, z], "class": c}, ...]
///   annos.jsonl       annotations, one record per frame
///   maps/<id>.rd.rdt, maps/<id>.ra.rdt  RD and RA power maps written by the pipeline
///   stats.json        global normalization statistics
struct ProjectConfig {
  std::filesystem::path dataset_root = ".";
  std::vector<std::string> class_names = default_class_names();
  DspConfig dsp;
  CfarConfig cfar;
  AnnotateConfig annotate;  // its cfar member mirrors `cfar`
  AnchorConfig anchors;
  DetectConfig detect;
  EvalConfig eval;
  ServerConfig server;
  unsigned jobs = 0;  // 0 selects the number of logical cores
  std::uint64_t seed = 0;

  std::filesystem::path adc_path(const std::string& id) const { return dataset_root / "adc" / (id + ".rdt"); }
  std::filesystem::path labels_path(const std::string& id) const { return dataset_root / "labels" / (id + ".json"); }
  std::filesystem::path rd_path(const std::string& id) const { return dataset_root / "maps" / (id + ".rd.rdt"); }
  std::filesystem::path ra_path(const std::string& id) const { return dataset_root / "maps" / (id + ".ra.rdt"); }
  std::filesystem::path annotations_path() const { return dataset_root / "annos.jsonl"; }
  std::filesystem::path stats_path() const { return dataset_root / "stats.json"; }

  /// Sub-config checks only; paths are checked by load_config.
  void validate() const;
  unsigned effective_jobs() const;
};

void to_json(nlohmann::json& j, const ProjectConfig& c);
void from_json(const nlohmann::json& j, ProjectConfig& c);

/// Parses the file, resolves a relative dataset_root against the file's directory and
/// requires it to exist. Throws malformed_json, io_failure or invariant_violation.
ProjectConfig load_config(const std::filesystem::path& path);

/// Frame ids found under adc/, sorted.
std::vector<std::string> list_frames(const ProjectConfig& cfg);

}  // namespace radkit
