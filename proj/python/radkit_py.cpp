// pybind11 bindings: numpy in, numpy out. Configs and records travel as Python dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "radkit/anchors.hpp"
#include "radkit/cfar.hpp"
#include "radkit/detect.hpp"
#include "radkit/dsp.hpp"
#include "radkit/error.hpp"
#include "radkit/eval.hpp"
#include "radkit/geometry.hpp"
#include "radkit/losses.hpp"
#include "radkit/synth.hpp"
#include "radkit/tensorio.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace radkit;

namespace {

json to_json_value(const py::handle& obj) {
  auto dumps = py::module_::import("json").attr("dumps");
  return json::parse(dumps(obj).cast<std::string>());
}

py::object from_json_value(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

using c64_array = py::array_t<std::complex<float>, py::array::c_style | py::array::forcecast>;
using f32_array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using f64_array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Shape3 shape3(const py::buffer_info& info) {
  if (info.ndim != 3) throw Error(ErrorCode::shape_mismatch, "expected a 3-D array");
  return {static_cast<std::size_t>(info.shape[0]), static_cast<std::size_t>(info.shape[1]),
          static_cast<std::size_t>(info.shape[2])};
}

template <typename T, typename Container>
py::array_t<T> to_numpy(const Container& data, std::vector<py::ssize_t> shape) {
  py::array_t<T> out(shape);
  std::memcpy(out.mutable_data(), data.data(), data.size() * sizeof(T));
  return out;
}

Map2D map_from(const f64_array& a) {
  if (a.ndim() != 2) throw Error(ErrorCode::shape_mismatch, "expected a 2-D array");
  Map2D m = Map2D::zeros(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::memcpy(m.data.data(), a.data(), m.data.size() * sizeof(double));
  return m;
}

py::array_t<double> map_to(const Map2D& m) {
  return to_numpy<double>(m.data, {static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.cols)});
}

RadCube complex_rad(const c64_array& a) {
  RadCube r;
  r.shape = shape3(a.request());
  r.stage = RadStage::complex;
  r.complex_data.assign(a.data(), a.data() + a.size());
  return r;
}

template <typename Box>
Box box_from(const py::handle& obj) {
  return to_json_value(obj).get<Box>();
}

template <std::size_t D>
std::vector<BoxSize<D>> sizes_from(const f64_array& a) {
  if (a.ndim() != 2 || a.shape(1) != static_cast<py::ssize_t>(D))
    throw Error(ErrorCode::shape_mismatch, "expected an (n, " + std::to_string(D) + ") array");
  std::vector<BoxSize<D>> out(static_cast<std::size_t>(a.shape(0)));
  std::memcpy(out.data(), a.data(), out.size() * D * sizeof(double));
  return out;
}

}  // namespace

PYBIND11_MODULE(_radkit, m) {
  m.doc() = "radkit: radar RAD processing, auto-annotation, decoding and evaluation";
  py::register_exception<Error>(m, "RadkitError", PyExc_ValueError);

  m.def(
      "synth_adc",
      [](const py::handle& scene) {
        const auto s = to_json_value(scene).get<Scene>();
        const auto adc = synth_adc(s);
        return to_numpy<std::complex<float>>(adc.data, {static_cast<py::ssize_t>(adc.shape.d0),
                                                        static_cast<py::ssize_t>(adc.shape.d1),
                                                        static_cast<py::ssize_t>(adc.shape.d2)});
      },
      py::arg("scene"), "ADC cube (256, 8, 64) complex64 from a scene dict {targets, noise_sigma, rng_seed}.");

  m.def(
      "expected_bins",
      [](const py::handle& target) {
        const auto b = expected_bins(to_json_value(target).get<PointTarget>());
        return py::make_tuple(b.range, b.azimuth, b.doppler);
      },
      py::arg("target"));

  m.def(
      "rad_from_adc",
      [](const c64_array& adc, const std::string& window) {
        AdcCube cube;
        cube.shape = shape3(adc.request());
        cube.data.assign(adc.data(), adc.data() + adc.size());
        DspConfig cfg;
        cfg.adc_shape = cube.shape;
        cfg.window = window == "hann" ? Window::hann : Window::rectangular;
        RadCube rad;
        {
          py::gil_scoped_release release;
          rad = rad_from_adc(cube, cfg);
        }
        return to_numpy<std::complex<float>>(rad.complex_data,
                                             {static_cast<py::ssize_t>(rad.shape.d0),
                                              static_cast<py::ssize_t>(rad.shape.d1),
                                              static_cast<py::ssize_t>(rad.shape.d2)});
      },
      py::arg("adc"), py::arg("window") = "rectangular");

  m.def(
      "log_magnitude",
      [](const c64_array& rad) {
        const auto r = log_magnitude(complex_rad(rad));
        return to_numpy<float>(r.real_data, {static_cast<py::ssize_t>(r.shape.d0),
                                             static_cast<py::ssize_t>(r.shape.d1),
                                             static_cast<py::ssize_t>(r.shape.d2)});
      },
      py::arg("rad"));
  m.def("rd_map", [](const c64_array& rad) { return map_to(rd_map(complex_rad(rad))); }, py::arg("rad"));
  m.def("ra_map", [](const c64_array& rad) { return map_to(ra_map(complex_rad(rad))); }, py::arg("rad"));

  m.def("ca_alpha", &ca_alpha, py::arg("pfa"), py::arg("n_train"));
  m.def(
      "cfar_2d",
      [](const f64_array& map, const py::dict& cfg) {
        const auto c = to_json_value(cfg).get<CfarConfig>();
        const auto mask = cfar_2d(map_from(map), c);
        py::array_t<bool> out({static_cast<py::ssize_t>(mask.range_bins), static_cast<py::ssize_t>(mask.doppler_bins)});
        auto* p = out.mutable_data();
        for (std::size_t i = 0; i < mask.data.size(); ++i) p[i] = mask.data[i] != 0;
        return out;
      },
      py::arg("map"), py::arg("config") = py::dict());

  m.def("polar_to_cart", [](double r, double theta) {
    const auto xz = polar_to_cart(r, theta);
    return py::make_tuple(xz[0], xz[1]);
  });
  m.def(
      "iou3d", [](const py::handle& a, const py::handle& b) { return iou3d(box_from<Box3D>(a), box_from<Box3D>(b)); },
      py::arg("a"), py::arg("b"), "IoU of {center, size} dicts with a circular Doppler axis of 64 bins.");
  m.def(
      "iou2d", [](const py::handle& a, const py::handle& b) { return iou2d(box_from<Box2D>(a), box_from<Box2D>(b)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "fit_anchors",
      [](const f64_array& sizes, std::uint32_t k, std::uint64_t seed) -> py::object {
        const auto dim = sizes.ndim() == 2 ? sizes.shape(1) : 0;
        if (dim == 3) return from_json_value(json(fit_anchors<3>(sizes_from<3>(sizes), k, seed)));
        if (dim == 2) return from_json_value(json(fit_anchors<2>(sizes_from<2>(sizes), k, seed)));
        throw Error(ErrorCode::shape_mismatch, "sizes must be (n, 2) or (n, 3)");
      },
      py::arg("sizes"), py::arg("k") = 6, py::arg("seed") = 0);

  m.def(
      "decode3d",
      [](const f32_array& raw, const f64_array& anchors, double threshold) {
        TensorContainer t;
        t.dtype = DType::f32;
        for (py::ssize_t d = 0; d < raw.ndim(); ++d) t.dims.push_back(static_cast<std::uint32_t>(raw.shape(d)));
        t.payload.assign(raw.data(), raw.data() + raw.size());
        py::list out;
        for (const auto& d : decode3d(t, sizes_from<3>(anchors), threshold)) {
          json j = d.box;
          j["objectness"] = d.objectness;
          j["class_prob"] = d.class_prob;
          out.append(from_json_value(j));
        }
        return out;
      },
      py::arg("raw"), py::arg("anchors"), py::arg("threshold") = kObjectnessThreshold);

  m.def(
      "focal_objectness_loss",
      [](const std::vector<double>& probs, const std::vector<std::uint8_t>& positive) {
        return focal_objectness_loss(probs, positive);
      },
      py::arg("probs"), py::arg("positive"));

  m.def(
      "evaluate",
      [](const py::list& dets, const py::list& gts, const std::string& mode) {
        const auto d = to_json_value(dets).get<std::vector<AnnotationRecord>>();
        const auto g = to_json_value(gts).get<std::vector<AnnotationRecord>>();
        return from_json_value(json(evaluate(d, g, eval_mode_from_string(mode))));
      },
      py::arg("dets"), py::arg("gts"), py::arg("mode") = "3d");

  m.def(
      "read_tensor",
      [](const std::string& path) -> py::object {
        const auto t = read_tensor(path);
        std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
        if (t.dtype == DType::c64) {
          const auto v = t.complex_view();
          py::array_t<std::complex<float>> out(shape);
          std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(std::complex<float>));
          return out;
        }
        return to_numpy<float>(t.payload, shape);
      },
      py::arg("path"));
  m.def(
      "write_tensor",
      [](const std::string& path, const py::array& arr) {
        TensorContainer t;
        for (py::ssize_t d = 0; d < arr.ndim(); ++d) t.dims.push_back(static_cast<std::uint32_t>(arr.shape(d)));
        if (arr.dtype().kind() == 'c') {
          const c64_array a = arr.cast<c64_array>();
          t.dtype = DType::c64;
          t.payload.resize(static_cast<std::size_t>(a.size()) * 2);
          std::memcpy(t.payload.data(), a.data(), t.payload.size() * sizeof(float));
        } else {
          const f32_array a = arr.cast<f32_array>();
          t.dtype = DType::f32;
          t.payload.assign(a.data(), a.data() + a.size());
        }
        write_tensor(path, t);
      },
      py::arg("path"), py::arg("array"));
}
