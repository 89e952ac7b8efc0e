/**
 * @file server.hpp
 * @brief Annotation store with optimistic concurrency and the HTTP review API.
 *
 *   GET  /api/frames                          [{id, source, status, revision, n_boxes3d, n_boxes2d}]
 *   GET  /api/frames/{id}                     annotation record including revision
 *   GET  /api/frames/{id}/maps/{rd|ra|cart}.png   grayscale heatmap (also .json)
 *   PUT  /api/frames/{id}                     {revision, boxes3d, boxes2d}
 *   GET  /api/classes                         class names
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "radkit/config.hpp"

namespace radkit {

class AnnotationStore {
 public:
  AnnotationStore(std::filesystem::path file, std::vector<std::string> class_names);

  std::vector<AnnotationRecord> list() const;
  std::optional<AnnotationRecord> get(const std::string& frame_id) const;

  enum class PutStatus { ok, not_found, conflict, invalid };
  struct PutResult {
    PutStatus status = PutStatus::ok;
    AnnotationRecord record;  // stored record after the call
    std::string message;
  };

  /// Compare-and-set on the frame's revision. On success the boxes are replaced,
  /// source becomes "human", revision increments and the file is rewritten atomically.
  PutResult put(const std::string& frame_id, std::uint64_t expected_revision, std::vector<Box3D> boxes3d,
                std::vector<Box2D> boxes2d);

  /// Re-reads the file from disk.
  void reload();

 private:
  std::filesystem::path file_;
  std::vector<std::string> class_names_;
  mutable std::shared_mutex mutex_;
  std::vector<AnnotationRecord> records_;
};

class ReviewServer {
 public:
  explicit ReviewServer(ProjectConfig cfg);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind.
  bool run();
  void stop();
  void wait_until_ready() const;

  AnnotationStore& store();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace radkit
