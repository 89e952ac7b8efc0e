// radkit command-line entry point.
//
// Exit codes: 0 success, 1 error, 2 usage error, 3 pipeline finished with frame errors.

#include <csignal>
#include <optional>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "radkit/anchors.hpp"
#include "radkit/detect.hpp"
#include "radkit/error.hpp"
#include "radkit/eval.hpp"
#include "radkit/losses.hpp"
#include "radkit/pipeline.hpp"
#include "radkit/server.hpp"
#include "radkit/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace radkit;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::malformed_json, p.string() + ": " + e.what());
  }
}

void emit(const json& j, const std::string& out) {
  if (out.empty() || out == "-")
    std::cout << j.dump(2) << "\n";
  else
    write_file_atomic(out, j.dump(2) + "\n");
}

const AnnotationRecord& pick_record(const std::vector<AnnotationRecord>& recs, const std::string& frame_id) {
  if (recs.empty()) throw Error(ErrorCode::empty_dataset, "annotation file has no records");
  if (frame_id.empty()) return recs.front();
  for (const auto& r : recs)
    if (r.frame_id == frame_id) return r;
  throw Error(ErrorCode::invariant_violation, "no record for frame " + frame_id);
}

TensorContainer mask_tensor(const DetectionMask& m) {
  TensorContainer t;
  t.dtype = DType::f32;
  t.dims = {static_cast<std::uint32_t>(m.range_bins), static_cast<std::uint32_t>(m.doppler_bins)};
  t.payload.assign(m.data.begin(), m.data.end());
  return t;
}

RadCube load_complex_rad(const std::string& adc, const std::string& rad, const DspConfig& dsp) {
  if (!adc.empty()) return rad_from_adc(adc_from_tensor(read_tensor(adc)), dsp);
  if (!rad.empty()) return rad_from_tensor(read_tensor(rad));
  throw Error(ErrorCode::invariant_violation, "pass --adc or --rad");
}

ReviewServer* g_server = nullptr;
extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radkit: radar RAD processing, auto-annotation, decoding and evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  app.add_option("--config", config_path, "Project configuration JSON")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  app.add_option("--jobs", jobs, "Worker threads (0: logical cores)");

  ProjectConfig cfg;
  auto load = [&] {
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!seed_opt->empty()) cfg.seed = seed;
    if (jobs) cfg.jobs = jobs;
    cfg.annotate.cfar = cfg.cfar;
  };

  // synth
  auto* synth = app.add_subcommand("synth", "Synthesize an ADC cube from a scene");
  std::string scene_path, out_path;
  std::size_t n_targets = 1;
  double noise = 0.0;
  bool on_grid = false;
  synth->add_option("--scene", scene_path, "Scene JSON; random scene when omitted");
  synth->add_option("--targets", n_targets, "Target count of a random scene");
  synth->add_option("--noise", noise, "Noise sigma of a random scene");
  synth->add_flag("--on-grid", on_grid, "Place random targets exactly on RAD bins");
  synth->add_option("--out", out_path, "Output ADC tensor")->required();
  synth->callback([&] {
    load();
    Scene scene;
    if (!scene_path.empty()) {
      scene = read_json(scene_path).get<Scene>();
    } else {
      RandomSceneOptions o;
      o.min_targets = o.max_targets = n_targets;
      o.noise_sigma = noise;
      o.on_grid = on_grid;
      scene = random_scene(cfg.seed, o, cfg.dsp.adc_shape, cfg.dsp.rad_shape());
    }
    write_tensor(out_path, to_tensor(synth_adc(scene, cfg.dsp.adc_shape)));
    json bins = json::array();
    for (const auto& t : scene.targets) {
      const auto b = expected_bins(t, cfg.dsp.rad_shape());
      bins.push_back({b.range, b.azimuth, b.doppler});
    }
    std::cout << json{{"scene", scene}, {"expected_bins", bins}}.dump(2) << "\n";
  });

  // process
  auto* process = app.add_subcommand("process", "ADC cube to RAD tensor");
  std::string adc_path, stage = "complex", stats_path, rd_out, ra_out;
  process->add_option("--in,--adc", adc_path, "Input ADC tensor")->required();
  process->add_option("--out", out_path, "Output RAD tensor");
  process->add_option("--stage", stage, "complex | log | normalized")
      ->check(CLI::IsMember({"complex", "log", "normalized"}));
  process->add_option("--stats", stats_path, "Normalization statistics; implies --stage normalized");
  process->add_option("--emit-rd,--rd", rd_out, "Also write the Range-Doppler power map");
  process->add_option("--ra", ra_out, "Also write the Range-Azimuth power map");
  process->callback([&] {
    load();
    const auto rad = rad_from_adc(adc_from_tensor(read_tensor(adc_path)), cfg.dsp);
    if (!rd_out.empty()) write_tensor(rd_out, to_tensor(rd_map(rad)));
    if (!ra_out.empty()) write_tensor(ra_out, to_tensor(ra_map(rad)));
    if (out_path.empty()) return;
    if (!stats_path.empty()) stage = "normalized";
    if (stage == "complex") {
      write_tensor(out_path, to_tensor(rad));
    } else if (stage == "log") {
      write_tensor(out_path, to_tensor(log_magnitude(rad)));
    } else {
      if (stats_path.empty()) throw Error(ErrorCode::invariant_violation, "--stage normalized needs --stats");
      const auto stats = read_json(stats_path).get<NormalizationStats>();
      write_tensor(out_path, to_tensor(normalize(log_magnitude(rad), stats, cfg.dsp.normalize_by_std)));
    }
  });

  // cfar
  auto* cfar = app.add_subcommand("cfar", "2D CFAR over a Range-Doppler map");
  std::string rd_in, rad_in, sub_cfg;
  cfar->add_option("--in,--rd", rd_in, "Range-Doppler map tensor");
  cfar->add_option("--cfg", sub_cfg, "CFAR config JSON (overrides the project config)");
  cfar->add_option("--adc", adc_path, "ADC tensor (RD map formed internally)");
  cfar->add_option("--rad", rad_in, "Complex RAD tensor (RD map formed internally)");
  cfar->add_option("--out", out_path, "Output mask tensor (0/1 f32)");
  cfar->callback([&] {
    load();
    if (!sub_cfg.empty()) cfg.cfar = read_json(sub_cfg).get<CfarConfig>();
    const Map2D rd =
        !rd_in.empty() ? map_from_tensor(read_tensor(rd_in)) : rd_map(load_complex_rad(adc_path, rad_in, cfg.dsp));
    const auto mask = cfar_2d(rd, cfg.cfar);
    if (!out_path.empty()) write_tensor(out_path, mask_tensor(mask));
    std::cout << json{{"detections", mask.count()}, {"alpha", cfg.cfar.effective_alpha()}}.dump() << "\n";
  });

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Auto-annotate one frame");
  std::string labels_path, frame_id = "frame";
  annotate->add_option("--adc", adc_path, "ADC tensor");
  annotate->add_option("--rad", rad_in, "Complex RAD tensor");
  annotate->add_option("--cfg", sub_cfg, "Annotate config JSON (overrides the project config)");
  annotate->add_option("--labels", labels_path, "Labeled stereo points JSON");
  annotate->add_option("--frame-id", frame_id, "Frame id of the record");
  annotate->add_option("--out", out_path, "Output annotations JSONL (stdout when omitted)");
  annotate->callback([&] {
    load();
    if (!sub_cfg.empty()) cfg.annotate = read_json(sub_cfg).get<AnnotateConfig>();
    const auto rad = load_complex_rad(adc_path, rad_in, cfg.dsp);
    std::vector<LabeledPoint> labels;
    if (!labels_path.empty()) labels = read_labels(labels_path);
    auto fa = annotate_frame(rad, cfg.annotate, labels, frame_id);
    fa.record.class_names = cfg.class_names;
    const std::vector<AnnotationRecord> recs{fa.record};
    if (out_path.empty())
      std::cout << format_annotations(recs);
    else
      write_annotations(out_path, recs);
  });

  // anchors
  auto* anchors = app.add_subcommand("anchors", "Fit K-means anchors to annotated box sizes");
  std::string annos_path, mode = "3d";
  std::uint32_t k = 0;
  anchors->add_option("--annos", annos_path, "Annotations JSONL")->required();
  anchors->add_option("--k", k, "Anchor count (default from config)");
  int dim = 3;
  anchors->add_option("--dim", dim, "Box dimension, 3 or 2")->check(CLI::IsMember({3, 2}));
  anchors->add_option("--out", out_path, "Output anchors JSON (stdout when omitted)");
  anchors->callback([&] {
    load();
    const auto recs = read_annotations(annos_path, cfg.class_names);
    const std::uint32_t kk = k ? k : cfg.anchors.k;
    bool warned = false;
    json j;
    if (dim == 3) {
      std::vector<BoxSize<3>> sizes;
      for (const auto& r : recs)
        for (const auto& b : r.boxes3d) sizes.push_back(b.size);
      j = fit_anchors<3>(sizes, kk, cfg.seed, cfg.anchors.restarts, &warned);
    } else {
      std::vector<BoxSize<2>> sizes;
      for (const auto& r : recs)
        for (const auto& b : r.boxes2d) sizes.push_back(b.size);
      j = fit_anchors<2>(sizes, kk, cfg.seed, cfg.anchors.restarts, &warned);
    }
    if (warned)
      std::cerr << "warning: mean anchor error " << j["mean_error"].get<double>() << " exceeds "
                << kAnchorErrorThreshold << "\n";
    emit(j, out_path);
  });

  // decode
  auto* decode = app.add_subcommand("decode", "Decode exported detection head tensors");
  std::string head3d_path, head2d_path;
  std::vector<std::string> anchor_files;
  bool no_nms = false;
  decode->add_option("--head3d", head3d_path, "Raw 3D head tensor (16, 16, 4, A, 7 + C)");
  decode->add_option("--head2d", head2d_path, "Raw 2D head tensor (32, 16, A, 5 + C)");
  decode->add_option("--anchors", anchor_files, "Anchors JSON, one per head dimension")->required();
  decode->add_option("--frame-id", frame_id, "Frame id of the output record");
  decode->add_flag("--no-nms", no_nms, "Skip non-maximum suppression");
  decode->add_option("--out", out_path, "Output detections JSONL (stdout when omitted)");
  decode->callback([&] {
    load();
    if (head3d_path.empty() && head2d_path.empty()) throw Error(ErrorCode::invariant_violation, "pass --head3d or --head2d");
    std::optional<AnchorSet<3>> a3;
    std::optional<AnchorSet<2>> a2;
    for (const auto& f : anchor_files) {
      const auto j = read_json(f);
      if (j.value("dim", 3) == 3)
        a3 = j.get<AnchorSet<3>>();
      else
        a2 = j.get<AnchorSet<2>>();
    }
    AnnotationRecord rec;
    rec.frame_id = frame_id;
    rec.source = AnnotationSource::model;
    rec.class_names = cfg.class_names;
    const RadarGeometry& geom = cfg.annotate.geometry;
    if (!head3d_path.empty()) {
      if (!a3) throw Error(ErrorCode::invariant_violation, "--head3d needs a 3D anchors file");
      auto dets = decode3d(read_tensor(head3d_path), a3->anchors, cfg.detect.obj_threshold, geom);
      if (!no_nms) dets = postprocess(dets, cfg.detect.nms3d, static_cast<double>(geom.doppler_bins));
      for (const auto& d : dets) rec.boxes3d.push_back(d.box);
    }
    if (!head2d_path.empty()) {
      if (!a2) throw Error(ErrorCode::invariant_violation, "--head2d needs a 2D anchors file");
      auto dets = decode2d(read_tensor(head2d_path), a2->anchors, CartesianGrid::for_geometry(geom),
                           cfg.detect.obj_threshold);
      if (!no_nms) dets = postprocess(dets, cfg.detect.nms2d);
      for (const auto& d : dets) rec.boxes2d.push_back(d.box);
    }
    const std::vector<AnnotationRecord> recs{rec};
    if (out_path.empty())
      std::cout << format_annotations(recs);
    else
      write_annotations(out_path, recs);
  });

  // loss
  auto* loss = app.add_subcommand("loss", "Training loss of a raw 3D head tensor against target boxes");
  std::string pred_path, target_path, anchors_path;
  loss->add_option("--pred", pred_path, "Raw 3D head tensor")->required();
  loss->add_option("--target", target_path, "Target annotations JSONL")->required();
  loss->add_option("--anchors", anchors_path, "3D anchors JSON")->required();
  loss->add_option("--frame-id", frame_id, "Record to use (first record when omitted)");
  loss->callback([&] {
    load();
    const auto recs = read_annotations(target_path, cfg.class_names);
    const auto& rec = pick_record(recs, loss->count("--frame-id") ? frame_id : "");
    const auto set = read_json(anchors_path).get<AnchorSet<3>>();
    const auto r = head_loss3d(read_tensor(pred_path), rec.boxes3d, set.anchors, {}, cfg.annotate.geometry);
    json j = r.breakdown;
    j["positives"] = r.positives;
    std::cout << j.dump(2) << "\n";
  });

  // eval
  auto* eval = app.add_subcommand("eval", "AP / mAP of detections against ground truth");
  std::string dets_path, gt_path;
  eval->add_option("--dets", dets_path, "Detections JSONL")->required();
  eval->add_option("--gt", gt_path, "Ground-truth annotations JSONL")->required();
  eval->add_option("--mode", mode, "3d | 2d")->check(CLI::IsMember({"3d", "2d"}));
  eval->add_option("--out", out_path, "Output report JSON (stdout when omitted)");
  eval->callback([&] {
    load();
    const GridBounds bounds{};
    const auto dets = read_annotations(dets_path);
    const auto gts = read_annotations(gt_path, cfg.class_names, bounds);
    const auto report = evaluate(dets, gts, eval_mode_from_string(mode), cfg.class_names);
    emit(report, out_path);
  });

  // split
  auto* split = app.add_subcommand("split", "Class-stratified train/val/test split");
  double test_ratio = -1, val_ratio = -1;
  split->add_option("--annos", annos_path, "Annotations JSONL")->required();
  split->add_option("--test-ratio", test_ratio, "Test share (default from config, 0.2)");
  split->add_option("--val-ratio", val_ratio, "Validation share of the training part (default 0.1)");
  split->add_option("--out", out_path, "Output split JSON (stdout when omitted)");
  split->callback([&] {
    load();
    const auto recs = read_annotations(annos_path, cfg.class_names);
    std::vector<FrameClasses> frames;
    for (const auto& r : recs) {
      FrameClasses f{r.frame_id, {}};
      for (const auto& b : r.boxes3d) f.classes.push_back(b.class_id);
      frames.push_back(std::move(f));
    }
    const double tr = test_ratio >= 0 ? test_ratio : cfg.eval.test_ratio;
    const double vr = val_ratio >= 0 ? val_ratio : cfg.eval.val_ratio;
    const auto outer = split_dataset(frames, tr, cfg.seed);
    std::vector<FrameClasses> rest;
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < frames.size(); ++i) index[frames[i].frame_id] = i;
    for (const auto& id : outer.train) rest.push_back(frames[index.at(id)]);
    const auto inner = split_dataset(rest, vr, cfg.seed + 1);
    emit({{"train", inner.train}, {"val", inner.test}, {"test", outer.test}}, out_path);
  });

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Auto-annotate every frame of the dataset");
  std::vector<std::string> frame_ids;
  pipeline->add_option("--frames", frame_ids, "Frame ids (default: every adc/*.rdt)")->delimiter(',');
  pipeline->callback([&] {
    load();
    if (!pipeline->count("--frames")) frame_ids = list_frames(cfg);
    const auto r = run_pipeline(cfg, frame_ids, cfg.jobs);
    for (const auto& e : r.errors) std::cerr << "frame " << e.frame_id << ": " << e.message << "\n";
    std::cout << json{{"processed", r.processed.size()}, {"failed", r.errors.size()}}.dump() << "\n";
    if (!r.errors.empty()) throw CLI::RuntimeError(3);
  });

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP annotation review service");
  int port = -1;
  std::string host;
  serve->add_option("--port", port, "Port (default from config)");
  serve->add_option("--host", host, "Bind address (default from config)");
  serve->callback([&] {
    load();
    ReviewServer server(cfg);
    const int bound = server.bind(host.empty() ? cfg.server.host : host, port >= 0 ? port : cfg.server.port);
    if (bound < 0) throw Error(ErrorCode::io_failure, "cannot bind port");
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "serving " << cfg.dataset_root.string() << " on port " << bound << "\n";
    server.run();
    g_server = nullptr;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::RuntimeError& e) {
    return e.get_exit_code();
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
