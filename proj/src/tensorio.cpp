#include "radkit/tensorio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "radkit/error.hpp"

namespace radkit {
namespace {

constexpr std::array<char, 4> kMagic{'R', 'D', 'T', '1'};

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
  }
  return v;
}

template <typename T>
void put_le(std::string& out, T v) {
  v = byteswap_if_big(v);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return byteswap_if_big(v);
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::io_failure, "read failed: " + path.string());
  return std::move(ss).str();
}

bool is_finite_box(const Box3D& b) {
  for (int i = 0; i < 3; ++i)
    if (!std::isfinite(b.center[i]) || !std::isfinite(b.size[i])) return false;
  return true;
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::c64: return 8;
    case DType::f32: return 4;
  }
  throw Error(ErrorCode::invariant_violation, "unknown dtype");
}

std::size_t TensorContainer::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void TensorContainer::validate() const {
  if (dims.empty() || dims.size() > 5)
    throw Error(ErrorCode::inconsistent_dims, "ndim must be in [1,5], got " + std::to_string(dims.size()));
  const std::size_t floats_per = dtype == DType::c64 ? 2 : 1;
  if (payload.size() != element_count() * floats_per)
    throw Error(ErrorCode::inconsistent_dims, "payload has " + std::to_string(payload.size()) +
                                                  " floats, dims require " +
                                                  std::to_string(element_count() * floats_per));
}

std::span<const cf32> TensorContainer::complex_view() const {
  if (dtype != DType::c64) throw Error(ErrorCode::invariant_violation, "tensor is not complex");
  return {reinterpret_cast<const cf32*>(payload.data()), payload.size() / 2};
}

std::span<cf32> TensorContainer::complex_view() {
  if (dtype != DType::c64) throw Error(ErrorCode::invariant_violation, "tensor is not complex");
  return {reinterpret_cast<cf32*>(payload.data()), payload.size() / 2};
}

void write_tensor(const std::filesystem::path& path, const TensorContainer& tensor) {
  tensor.validate();
  std::string header;
  header.append(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(header, static_cast<std::uint32_t>(tensor.dtype));
  header.push_back(static_cast<char>(tensor.dims.size()));
  for (auto d : tensor.dims) put_le<std::uint32_t>(header, d);

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "cannot open for writing: " + tmp.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(tensor.payload.data()),
              static_cast<std::streamsize>(tensor.payload.size() * sizeof(float)));
  } else {
    std::string body;
    body.reserve(tensor.payload.size() * 4);
    for (float f : tensor.payload) put_le(body, f);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
  }
  out.close();
  if (!out) throw Error(ErrorCode::io_failure, "write failed: " + tmp.string());
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io_failure, "cannot rename " + tmp.string() + ": " + ec.message());
}

TensorContainer read_tensor(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  if (bytes.size() < 4 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw Error(ErrorCode::bad_magic, path.string());
  if (bytes.size() < 9) throw Error(ErrorCode::truncated_payload, "header cut short");

  TensorContainer t;
  const auto dtype = get_le<std::uint32_t>(bytes.data() + 4);
  if (dtype > 1) throw Error(ErrorCode::invariant_violation, "unknown dtype " + std::to_string(dtype));
  t.dtype = static_cast<DType>(dtype);
  const auto ndim = static_cast<std::uint8_t>(bytes[8]);
  if (ndim < 1 || ndim > 5)
    throw Error(ErrorCode::inconsistent_dims, "ndim " + std::to_string(ndim));
  const std::size_t header = rdt1_header_size(ndim);
  if (bytes.size() < header) throw Error(ErrorCode::truncated_payload, "dims cut short");
  for (std::size_t i = 0; i < ndim; ++i) t.dims.push_back(get_le<std::uint32_t>(bytes.data() + 9 + 4 * i));

  const std::size_t n_floats = t.element_count() * (t.dtype == DType::c64 ? 2 : 1);
  const std::size_t expected = header + n_floats * sizeof(float);
  if (bytes.size() < expected)
    throw Error(ErrorCode::truncated_payload, "expected " + std::to_string(expected) + " bytes, file has " +
                                                  std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw Error(ErrorCode::inconsistent_dims, "trailing bytes after payload");

  t.payload.resize(n_floats);
  for (std::size_t i = 0; i < n_floats; ++i) t.payload[i] = get_le<float>(bytes.data() + header + 4 * i);
  return t;
}

AdcCube AdcCube::zeros(Shape3 shape) {
  AdcCube c;
  c.shape = shape;
  c.data.assign(shape.size(), cf32{});
  return c;
}

std::string_view to_string(RadStage stage) {
  switch (stage) {
    case RadStage::complex: return "complex";
    case RadStage::log_magnitude: return "log_magnitude";
    case RadStage::normalized: return "normalized";
  }
  return "unknown";
}

namespace {

std::vector<std::uint32_t> dims_of(Shape3 s) {
  return {static_cast<std::uint32_t>(s.d0), static_cast<std::uint32_t>(s.d1),
          static_cast<std::uint32_t>(s.d2)};
}

Shape3 shape3_of(const TensorContainer& t) {
  if (t.dims.size() != 3)
    throw Error(ErrorCode::shape_mismatch, "expected 3 dims, got " + std::to_string(t.dims.size()));
  return {t.dims[0], t.dims[1], t.dims[2]};
}

}  // namespace

TensorContainer to_tensor(const AdcCube& adc) {
  TensorContainer t;
  t.dtype = DType::c64;
  t.dims = dims_of(adc.shape);
  const auto* f = reinterpret_cast<const float*>(adc.data.data());
  t.payload.assign(f, f + 2 * adc.data.size());
  return t;
}

TensorContainer to_tensor(const RadCube& rad) {
  TensorContainer t;
  t.dims = dims_of(rad.shape);
  if (rad.is_complex()) {
    t.dtype = DType::c64;
    const auto* f = reinterpret_cast<const float*>(rad.complex_data.data());
    t.payload.assign(f, f + 2 * rad.complex_data.size());
  } else {
    t.dtype = DType::f32;
    t.payload.assign(rad.real_data.begin(), rad.real_data.end());
  }
  return t;
}

AdcCube adc_from_tensor(const TensorContainer& tensor) {
  tensor.validate();
  if (tensor.dtype != DType::c64) throw Error(ErrorCode::shape_mismatch, "ADC tensor must be c64");
  AdcCube adc;
  adc.shape = shape3_of(tensor);
  auto view = tensor.complex_view();
  adc.data.assign(view.begin(), view.end());
  for (const auto& z : adc.data)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw Error(ErrorCode::invariant_violation, "ADC contains non-finite samples");
  return adc;
}

RadCube rad_from_tensor(const TensorContainer& tensor, RadStage real_stage) {
  tensor.validate();
  RadCube rad;
  rad.shape = shape3_of(tensor);
  if (tensor.dtype == DType::c64) {
    rad.stage = RadStage::complex;
    auto view = tensor.complex_view();
    rad.complex_data.assign(view.begin(), view.end());
  } else {
    if (real_stage == RadStage::complex)
      throw Error(ErrorCode::stage_violation, "f32 tensor cannot hold a complex RAD cube");
    rad.stage = real_stage;
    rad.real_data.assign(tensor.payload.begin(), tensor.payload.end());
  }
  return rad;
}

void to_json(nlohmann::json& j, const NormalizationStats& s) {
  j = {{"v_mean", s.v_mean}, {"v_variance", s.v_variance}, {"n_cells_seen", s.n_cells_seen}};
}

void from_json(const nlohmann::json& j, NormalizationStats& s) {
  s.v_mean = j.at("v_mean").get<double>();
  s.v_variance = j.at("v_variance").get<double>();
  s.n_cells_seen = j.value("n_cells_seen", std::uint64_t{0});
}

std::string_view to_string(AnnotationSource source) {
  switch (source) {
    case AnnotationSource::automatic: return "auto";
    case AnnotationSource::human: return "human";
    case AnnotationSource::model: return "model";
  }
  return "auto";
}

AnnotationSource annotation_source_from_string(std::string_view s) {
  if (s == "auto") return AnnotationSource::automatic;
  if (s == "human") return AnnotationSource::human;
  if (s == "model") return AnnotationSource::model;
  throw Error(ErrorCode::invariant_violation, "unknown annotation source '" + std::string(s) + "'");
}

std::vector<std::string> default_class_names() {
  return {"person", "bicycle", "car", "motorcycle", "bus", "truck"};
}

namespace {

nlohmann::json score_json(const std::optional<double>& s) {
  return s ? nlohmann::json(*s) : nlohmann::json(nullptr);
}

std::optional<double> score_from(const nlohmann::json& j) {
  auto it = j.find("score");
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

int class_from(const nlohmann::json& j) {
  auto it = j.find("class");
  if (it == j.end() || it->is_null()) return -1;
  return it->get<int>();
}

nlohmann::json class_json(int class_id) {
  return class_id < 0 ? nlohmann::json(nullptr) : nlohmann::json(class_id);
}

}  // namespace

void to_json(nlohmann::json& j, const Box3D& b) {
  j = {{"center", b.center}, {"size", b.size}, {"class", class_json(b.class_id)}, {"score", score_json(b.score)}};
}

void from_json(const nlohmann::json& j, Box3D& b) {
  b.center = j.at("center").get<std::array<double, 3>>();
  b.size = j.at("size").get<std::array<double, 3>>();
  b.class_id = class_from(j);
  b.score = score_from(j);
}

void to_json(nlohmann::json& j, const Box2D& b) {
  j = {{"center", b.center}, {"size", b.size}, {"class", class_json(b.class_id)}, {"score", score_json(b.score)}};
}

void from_json(const nlohmann::json& j, Box2D& b) {
  b.center = j.at("center").get<std::array<double, 2>>();
  b.size = j.at("size").get<std::array<double, 2>>();
  b.class_id = class_from(j);
  b.score = score_from(j);
}

namespace {
constexpr std::array<std::string_view, 6> kKnownKeys{"frame_id", "source",      "boxes3d",
                                                     "boxes2d",  "class_names", "revision"};
}

void to_json(nlohmann::json& j, const AnnotationRecord& r) {
  j = r.extra.is_object() ? r.extra : nlohmann::json::object();
  j["frame_id"] = r.frame_id;
  j["source"] = std::string(to_string(r.source));
  j["boxes3d"] = r.boxes3d;
  j["boxes2d"] = r.boxes2d;
  if (!r.class_names.empty()) j["class_names"] = r.class_names;
  j["revision"] = r.revision;
}

void from_json(const nlohmann::json& j, AnnotationRecord& r) {
  if (!j.is_object()) throw Error(ErrorCode::malformed_json, "record is not an object");
  r.frame_id = j.at("frame_id").get<std::string>();
  r.source = annotation_source_from_string(j.value("source", std::string("auto")));
  r.boxes3d = j.value("boxes3d", std::vector<Box3D>{});
  r.boxes2d = j.value("boxes2d", std::vector<Box2D>{});
  r.class_names = j.value("class_names", std::vector<std::string>{});
  r.revision = j.value("revision", std::uint64_t{0});
  r.extra = nlohmann::json::object();
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), it.key()) == kKnownKeys.end())
      r.extra[it.key()] = it.value();
}

void validate_record(const AnnotationRecord& record, std::span<const std::string> dataset_classes,
                     const GridBounds& bounds) {
  const std::size_t n_classes = record.class_names.empty() ? dataset_classes.size() : record.class_names.size();
  auto check_class = [&](int c) {
    if (c >= static_cast<int>(n_classes) || c < -1)
      throw Error(ErrorCode::invariant_violation, "frame " + record.frame_id + ": class index " +
                                                      std::to_string(c) + " outside class list of " +
                                                      std::to_string(n_classes));
  };
  for (const auto& b : record.boxes3d) {
    check_class(b.class_id);
    if (!is_finite_box(b) || b.center[0] < 0 || b.center[0] > bounds.range_bins || b.center[1] < 0 ||
        b.center[1] > bounds.azimuth_bins || b.size[0] <= 0 || b.size[1] <= 0 || b.size[2] <= 0 ||
        b.size[2] > bounds.doppler_bins)
      throw Error(ErrorCode::invariant_violation, "frame " + record.frame_id + ": 3D box outside RAD grid");
  }
  for (const auto& b : record.boxes2d) {
    check_class(b.class_id);
    if (!(b.size[0] > 0) || !(b.size[1] > 0) || !std::isfinite(b.center[0]) || !std::isfinite(b.center[1]))
      throw Error(ErrorCode::invariant_violation, "frame " + record.frame_id + ": invalid 2D box");
  }
}

std::vector<AnnotationRecord> parse_annotations(std::string_view text,
                                                std::span<const std::string> dataset_classes,
                                                const GridBounds& bounds) {
  std::vector<AnnotationRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    AnnotationRecord rec;
    try {
      rec = nlohmann::json::parse(line).get<AnnotationRecord>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::malformed_json, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      validate_record(rec, dataset_classes, bounds);
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string format_annotations(std::span<const AnnotationRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path,
                                               std::span<const std::string> dataset_classes,
                                               const GridBounds& bounds) {
  return parse_annotations(read_all(path), dataset_classes, bounds);
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
  const auto classes = default_class_names();
  return read_annotations(path, classes);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_failure, "cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::io_failure, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io_failure, "rename failed: " + ec.message());
}

void write_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> records) {
  write_file_atomic(path, format_annotations(records));
}

}  // namespace radkit
