#include <fstream>
#include <sstream>

#include "doctest.h"
#include "radkit/config.hpp"
#include "radkit/error.hpp"
#include "radkit/pipeline.hpp"
#include "radkit/synth.hpp"
#include "tmpdir.hpp"

using namespace radkit;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool contains_bins(const Box3D& b, const RadBin& e) {
  auto in = [](double v, double c, double s) { return std::abs(v + 0.5 - c) <= s / 2; };
  double dd = std::fmod(std::abs(e.doppler + 0.5 - b.center[2]), 64.0);
  dd = std::min(dd, 64.0 - dd);
  return in(e.range, b.center[0], b.size[0]) && in(e.azimuth, b.center[1], b.size[1]) && dd <= b.size[2] / 2;
}

struct Dataset {
  TempDir dir{"pipeline"};
  ProjectConfig cfg;
  std::vector<std::string> ids;
  std::vector<PointTarget> targets;

  explicit Dataset(std::size_t n) {
    cfg.dataset_root = dir.path;
    cfg.jobs = 1;
    std::filesystem::create_directories(dir / "adc");
    std::filesystem::create_directories(dir / "labels");
    RandomSceneOptions opts;
    opts.noise_sigma = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "%06zu", i);
      auto scene = random_scene(1000 + i, opts);
      write_tensor(cfg.adc_path(id), to_tensor(synth_adc(scene)));
      const auto& t = scene.targets[0];
      const auto b = expected_bins(t);
      const RadarGeometry g;
      const auto xz = polar_to_cart(g.range_m(b.range), g.azimuth_rad(b.azimuth));
      std::ofstream(cfg.labels_path(id)) << nlohmann::json::array({{{"xz", {xz[0], xz[1]}}, {"class", 2}}}).dump();
      ids.push_back(id);
      targets.push_back(t);
    }
  }
};

}  // namespace

TEST_CASE("labels parsing") {
  const auto pts = parse_labels(nlohmann::json::parse(R"([{"xz": [5, -1], "class": 3}])"));
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].xz == std::array<double, 2>{5, -1});
  CHECK(pts[0].class_id == 3);

  // stereo camera point 10 m ahead, 2 m to the right
  const auto st = parse_labels(nlohmann::json::parse(R"([{"xyz": [2, 0.5, 10], "class": 1}])"));
  REQUIRE(st.size() == 1);
  CHECK(st[0].xz[0] == doctest::Approx(10));
  CHECK(st[0].xz[1] == doctest::Approx(2));

  const auto pr = parse_labels(nlohmann::json::parse(
      R"({"projection": [[1,0,0,0.5],[0,1,0,0]], "points": [{"xyz": [1, 2, 3], "class": 0}]})"));
  CHECK(pr[0].xz == std::array<double, 2>{1.5, 2});
  CHECK_THROWS(parse_labels(nlohmann::json::parse(R"({"points": 3})")));
}

TEST_CASE("map tensor round trip") {
  Map2D m = Map2D::zeros(3, 4);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = 0.5 * static_cast<double>(i);
  const auto back = map_from_tensor(to_tensor(m));
  CHECK(back.rows == 3);
  CHECK(back.cols == 4);
  CHECK(back.data == m.data);
}

TEST_CASE("pipeline annotates ten synthetic frames") {
  Dataset ds(10);
  const auto res = run_pipeline(ds.cfg, ds.ids, 1);
  CHECK(res.errors.empty());
  CHECK(res.processed == ds.ids);
  REQUIRE(res.stats.has_value());
  CHECK(res.stats->n_cells_seen == 10u * 256 * 256 * 64);

  const auto recs = read_annotations(ds.cfg.annotations_path());
  REQUIRE(recs.size() == 10);
  const std::string text = slurp(ds.cfg.annotations_path());
  CHECK(std::count(text.begin(), text.end(), '\n') == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(recs[i].frame_id == ds.ids[i]);
    CHECK(recs[i].source == AnnotationSource::automatic);
    const auto want = expected_bins(ds.targets[i]);
    bool hit = false, labeled = false;
    for (const auto& b : recs[i].boxes3d)
      if (contains_bins(b, want)) {
        hit = true;
        labeled = labeled || b.class_id == 2;
      }
    CHECK_MESSAGE(hit, "frame " << ds.ids[i]);
    CHECK_MESSAGE(labeled, "frame " << ds.ids[i]);
    CHECK(std::filesystem::exists(ds.cfg.rd_path(ds.ids[i])));
    CHECK(std::filesystem::exists(ds.cfg.ra_path(ds.ids[i])));
  }
  CHECK(std::filesystem::exists(ds.cfg.stats_path()));

  // rerun rewrites identical files
  const std::string annos = slurp(ds.cfg.annotations_path());
  const std::string stats = slurp(ds.cfg.stats_path());
  run_pipeline(ds.cfg, ds.ids, 1);
  CHECK(slurp(ds.cfg.annotations_path()) == annos);
  CHECK(slurp(ds.cfg.stats_path()) == stats);
}

TEST_CASE("pipeline keeps going past a missing ADC file") {
  Dataset ds(3);
  std::vector<std::string> ids{ds.ids[0], "nope", ds.ids[2]};
  const auto res = run_pipeline(ds.cfg, ids, 1);
  REQUIRE(res.errors.size() == 1);
  CHECK(res.errors[0].frame_id == "nope");
  CHECK(res.processed == std::vector<std::string>{ds.ids[0], ds.ids[2]});
  CHECK(read_annotations(ds.cfg.annotations_path()).size() == 2);

  // processing the remaining frame later keeps the earlier records
  const std::vector<std::string> rest{ds.ids[1]};
  run_pipeline(ds.cfg, rest, 1);
  CHECK(read_annotations(ds.cfg.annotations_path()).size() == 3);
}

TEST_CASE("empty frame list writes nothing") {
  Dataset ds(0);
  const auto res = run_pipeline(ds.cfg, {}, 1);
  CHECK(res.processed.empty());
  CHECK(res.errors.empty());
  CHECK_FALSE(std::filesystem::exists(ds.cfg.annotations_path()));
  CHECK_FALSE(std::filesystem::exists(ds.cfg.stats_path()));
}
