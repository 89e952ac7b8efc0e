#include "radkit/server.hpp"

#include <algorithm>
#include <mutex>

#include "httplib.h"
#include "radkit/error.hpp"
#include "radkit/heatmap.hpp"
#include "radkit/pipeline.hpp"

namespace radkit {

namespace fs = std::filesystem;
using nlohmann::json;

AnnotationStore::AnnotationStore(fs::path file, std::vector<std::string> class_names)
    : file_(std::move(file)), class_names_(std::move(class_names)) {
  reload();
}

void AnnotationStore::reload() {
  std::unique_lock lock(mutex_);
  records_ = fs::exists(file_) ? read_annotations(file_, class_names_) : std::vector<AnnotationRecord>{};
}

std::vector<AnnotationRecord> AnnotationStore::list() const {
  std::shared_lock lock(mutex_);
  return records_;
}

std::optional<AnnotationRecord> AnnotationStore::get(const std::string& frame_id) const {
  std::shared_lock lock(mutex_);
  for (const auto& r : records_)
    if (r.frame_id == frame_id) return r;
  return std::nullopt;
}

AnnotationStore::PutResult AnnotationStore::put(const std::string& frame_id, std::uint64_t expected_revision,
                                                std::vector<Box3D> boxes3d, std::vector<Box2D> boxes2d) {
  std::unique_lock lock(mutex_);
  auto it = std::find_if(records_.begin(), records_.end(), [&](const auto& r) { return r.frame_id == frame_id; });
  if (it == records_.end()) return {PutStatus::not_found, {}, "unknown frame " + frame_id};
  if (it->revision != expected_revision)
    return {PutStatus::conflict, *it,
            "stale revision " + std::to_string(expected_revision) + ", current is " + std::to_string(it->revision)};

  AnnotationRecord next = *it;
  next.boxes3d = std::move(boxes3d);
  next.boxes2d = std::move(boxes2d);
  next.source = AnnotationSource::human;
  next.revision = it->revision + 1;
  try {
    validate_record(next, class_names_);
  } catch (const Error& e) {
    return {PutStatus::invalid, *it, e.what()};
  }
  auto updated = records_;
  updated[static_cast<std::size_t>(it - records_.begin())] = next;
  write_annotations(file_, updated);
  records_ = std::move(updated);
  return {PutStatus::ok, next, {}};
}

struct ReviewServer::Impl {
  ProjectConfig cfg;
  AnnotationStore store;
  httplib::Server http;

  explicit Impl(ProjectConfig c) : cfg(std::move(c)), store(cfg.annotations_path(), cfg.class_names) {}

  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }
  static void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, status, {{"error", msg}});
  }

  void routes() {
    http.Get("/api/classes", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, cfg.class_names);
    });

    http.Get("/api/frames", [this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& r : store.list())
        out.push_back({{"id", r.frame_id},
                       {"source", std::string(to_string(r.source))},
                       {"status", r.source == AnnotationSource::human ? "reviewed" : "pending"},
                       {"revision", r.revision},
                       {"n_boxes3d", r.boxes3d.size()},
                       {"n_boxes2d", r.boxes2d.size()}});
      send_json(res, 200, out);
    });

    http.Get(R"(/api/frames/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto rec = store.get(req.matches[1]);
      if (!rec) return send_error(res, 404, "unknown frame " + std::string(req.matches[1]));
      send_json(res, 200, *rec);
    });

    http.Get(R"(/api/frames/([^/]+)/maps/(rd|ra|cart)\.(png|json))",
             [this](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               const std::string kind = req.matches[2];
               if (!store.get(id)) return send_error(res, 404, "unknown frame " + id);
               try {
                 Map2D map;
                 if (kind == "rd") {
                   if (!fs::exists(cfg.rd_path(id))) return send_error(res, 404, "no RD map for " + id);
                   map = map_from_tensor(read_tensor(cfg.rd_path(id)));
                 } else {
                   if (!fs::exists(cfg.ra_path(id))) return send_error(res, 404, "no RA map for " + id);
                   map = map_from_tensor(read_tensor(cfg.ra_path(id)));
                   if (kind == "cart") {
                     RadarGeometry geom = cfg.annotate.geometry;
                     geom.range_bins = map.rows;
                     geom.azimuth_bins = map.cols;
                     map = resample_ra_to_cart(map, CartesianGrid::for_geometry(geom), geom);
                   }
                 }
                 if (req.matches[3] == "png") {
                   res.status = 200;
                   res.set_content(render_png(map), "image/png");
                 } else {
                   send_json(res, 200, {{"rows", map.rows}, {"cols", map.cols}, {"data", map.data}});
                 }
               } catch (const std::exception& e) {
                 send_error(res, 500, e.what());
               }
             });

    http.Put(R"(/api/frames/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      std::uint64_t revision = 0;
      std::vector<Box3D> b3;
      std::vector<Box2D> b2;
      try {
        const auto body = json::parse(req.body);
        revision = body.at("revision").get<std::uint64_t>();
        b3 = body.value("boxes3d", json::array()).get<std::vector<Box3D>>();
        b2 = body.value("boxes2d", json::array()).get<std::vector<Box2D>>();
      } catch (const std::exception& e) {
        if (!store.get(id)) return send_error(res, 404, "unknown frame " + id);
        return send_error(res, 400, std::string("invalid body: ") + e.what());
      }
      try {
        auto r = store.put(id, revision, std::move(b3), std::move(b2));
        switch (r.status) {
          case AnnotationStore::PutStatus::ok:
            return send_json(res, 200, r.record);
          case AnnotationStore::PutStatus::not_found:
            return send_error(res, 404, r.message);
          case AnnotationStore::PutStatus::conflict:
            return send_json(res, 409, {{"error", r.message}, {"revision", r.record.revision}});
          case AnnotationStore::PutStatus::invalid:
            return send_error(res, 400, r.message);
        }
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    });

    if (!cfg.server.static_dir.empty()) http.set_mount_point("/", cfg.server.static_dir);
  }
};

ReviewServer::ReviewServer(ProjectConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) { impl_->routes(); }
ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->http.bind_to_any_port(host);
  return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool ReviewServer::run() { return impl_->http.listen_after_bind(); }
void ReviewServer::stop() {
  if (impl_) impl_->http.stop();
}
void ReviewServer::wait_until_ready() const { impl_->http.wait_until_ready(); }
AnnotationStore& ReviewServer::store() { return impl_->store; }

}  // namespace radkit
