/**
 * @file tensorio.hpp
 * @brief Tensor and annotation data model plus the RDT1 / JSON-lines file formats.
 *
 * RDT1 layout (all integers and floats little-endian):
 *
 *   offset 0   4 bytes  magic "RDT1"
 *   offset 4   u32      dtype (0 = c64 as interleaved f32 re,im; 1 = f32)
 *   offset 8   u8       ndim, 1..5
 *   offset 9   u32[ndim] dims
 *   then       row-major payload, product(dims) elements
 */
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "radkit/aligned.hpp"
#include "radkit/boxes.hpp"

namespace radkit {

enum class DType : std::uint32_t { c64 = 0, f32 = 1 };

std::size_t dtype_size(DType dtype);

/// In-memory image of an RDT1 file. Complex payloads are stored as interleaved floats.
struct TensorContainer {
  DType dtype = DType::f32;
  std::vector<std::uint32_t> dims;
  AlignedVector<float> payload;

  std::size_t element_count() const;
  /// Throws inconsistent_dims unless 1 <= ndim <= 5 and the payload matches dims.
  void validate() const;

  std::span<const cf32> complex_view() const;
  std::span<cf32> complex_view();

  bool operator==(const TensorContainer&) const = default;
};

constexpr std::size_t rdt1_header_size(std::size_t ndim) { return 4 + 4 + 1 + 4 * ndim; }

void write_tensor(const std::filesystem::path& path, const TensorContainer& tensor);
TensorContainer read_tensor(const std::filesystem::path& path);

struct Shape3 {
  std::size_t d0 = 0, d1 = 0, d2 = 0;

  constexpr std::size_t size() const { return d0 * d1 * d2; }
  constexpr std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * d1 + j) * d2 + k;
  }
  bool operator==(const Shape3&) const = default;
};

inline constexpr Shape3 kAdcShape{256, 8, 64};
inline constexpr Shape3 kRadShape{256, 256, 64};

/// Raw samples laid out (range sample, antenna, chirp).
struct AdcCube {
  Shape3 shape = kAdcShape;
  AlignedVector<cf32> data;

  static AdcCube zeros(Shape3 shape = kAdcShape);
  cf32& at(std::size_t n, std::size_t m, std::size_t k) { return data[shape.index(n, m, k)]; }
  const cf32& at(std::size_t n, std::size_t m, std::size_t k) const {
    return data[shape.index(n, m, k)];
  }
};

enum class RadStage { complex, log_magnitude, normalized };

std::string_view to_string(RadStage stage);

/// Range-Azimuth-Doppler spectrum laid out (range, azimuth, doppler). Only one of the
/// two buffers is populated, selected by `stage`.
struct RadCube {
  Shape3 shape = kRadShape;
  RadStage stage = RadStage::complex;
  AlignedVector<cf32> complex_data;
  AlignedVector<float> real_data;

  bool is_complex() const { return stage == RadStage::complex; }
};

TensorContainer to_tensor(const AdcCube& adc);
TensorContainer to_tensor(const RadCube& rad);
AdcCube adc_from_tensor(const TensorContainer& tensor);
/// f32 files carry no stage tag, so the caller names it.
RadCube rad_from_tensor(const TensorContainer& tensor, RadStage real_stage = RadStage::log_magnitude);

struct NormalizationStats {
  double v_mean = 0.0;
  double v_variance = 1.0;
  std::uint64_t n_cells_seen = 0;

  bool operator==(const NormalizationStats&) const = default;
};

void to_json(nlohmann::json& j, const NormalizationStats& s);
void from_json(const nlohmann::json& j, NormalizationStats& s);

enum class AnnotationSource { automatic, human, model };

std::string_view to_string(AnnotationSource source);
AnnotationSource annotation_source_from_string(std::string_view s);

std::vector<std::string> default_class_names();

/// Extent of the RAD grid that annotation boxes are validated against.
struct GridBounds {
  double range_bins = 256;
  double azimuth_bins = 256;
  double doppler_bins = 64;
};

struct AnnotationRecord {
  std::string frame_id;
  std::vector<Box3D> boxes3d;
  std::vector<Box2D> boxes2d;
  AnnotationSource source = AnnotationSource::automatic;
  std::vector<std::string> class_names;  // empty: use the dataset's class list
  std::uint64_t revision = 0;
  nlohmann::json extra = nlohmann::json::object();  // unknown keys, written back verbatim

  bool operator==(const AnnotationRecord&) const = default;
};

void to_json(nlohmann::json& j, const Box3D& b);
void from_json(const nlohmann::json& j, Box3D& b);
void to_json(nlohmann::json& j, const Box2D& b);
void from_json(const nlohmann::json& j, Box2D& b);
void to_json(nlohmann::json& j, const AnnotationRecord& r);
void from_json(const nlohmann::json& j, AnnotationRecord& r);

/// Throws invariant_violation for out-of-range class ids or boxes outside the grid.
void validate_record(const AnnotationRecord& record, std::span<const std::string> dataset_classes,
                     const GridBounds& bounds = {});

std::vector<AnnotationRecord> parse_annotations(std::string_view text,
                                                std::span<const std::string> dataset_classes,
                                                const GridBounds& bounds = {});
std::string format_annotations(std::span<const AnnotationRecord> records);

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path,
                                               std::span<const std::string> dataset_classes,
                                               const GridBounds& bounds = {});
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);

/// Writes through a temporary sibling file and renames it into place.
void write_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> records);

/// Temp-file-then-rename write of arbitrary bytes.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace radkit
