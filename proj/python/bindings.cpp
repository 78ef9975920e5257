#include <cstring>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ptwin/error.h"
#include "ptwin/interaction.h"
#include "ptwin/interpolation.h"
#include "ptwin/scene.h"
#include "ptwin/twin.h"

namespace py = pybind11;
using namespace ptwin;
using nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

Vec3 vec3(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

py::array_t<std::uint8_t> image_to_array(const Image& img) {
    py::array_t<std::uint8_t> out({img.height(), img.width(), 3});
    std::memcpy(out.mutable_data(), img.bytes().data(), img.bytes().size());
    return out;
}

Image array_to_image(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw Error(ErrorCode::MalformedImage, "expected an HxWx3 uint8 array");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(img.bytes().data(), a.data(), img.bytes().size());
    return img;
}

py::object response_to_py(const HttpResponse& r) {
    if (r.content_type == "application/json") {
        json body = json::parse(r.body);
        if (!r.ok()) {
            throw Error(parse_error_code(body.value("code", "")).value_or(ErrorCode::InvariantViolation),
                        body.value("message", ""));
        }
        return to_py(body);
    }
    if (!r.ok()) throw Error(ErrorCode::InvariantViolation, "request failed with status " + std::to_string(r.status));
    return py::bytes(r.body);
}

HttpRequest make_request(const std::string& method, const std::string& path, const py::object& body,
                         const std::map<std::string, std::string>& query) {
    HttpRequest r;
    r.method = method;
    r.path = path;
    r.query = query;
    if (!body.is_none()) r.body = from_py(body).dump();
    return r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Plant-factory digital twin core";

    static py::exception<Error> error_type(m, "TwinError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            exc.attr("where") = e.where();
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    m.def("inverse_distance",
          [](const std::vector<std::tuple<std::string, std::array<double, 3>, double>>& samples,
             std::array<double, 3> query) {
              if (samples.empty()) throw Error(ErrorCode::NoSensorsOfKind, "no samples");
              std::vector<SensorSample> s;
              for (const auto& [id, pos, value] : samples) s.push_back({id, vec3(pos), value});
              Interpolated r = inverse_distance(s, vec3(query));
              return py::make_tuple(r.value, r.contributing);
          },
          py::arg("samples"), py::arg("query"),
          "IDW over (sensor_id, position, value) samples. Returns (value, [(sensor_id, weight)]).");

    m.def("pick",
          [](std::array<double, 3> origin, std::array<double, 3> direction,
             const std::vector<std::tuple<std::string, std::array<double, 3>, std::array<double, 3>>>& boxes) {
              std::vector<InteractableObject> objects;
              for (const auto& [id, lo, hi] : boxes) objects.push_back({id, id, {vec3(lo), vec3(hi)}, {}, {}, {}});
              return pick(Ray{vec3(origin), normalized(vec3(direction))}, objects);
          },
          py::arg("origin"), py::arg("direction"), py::arg("boxes"),
          "Nearest (id, lo, hi) box hit by the ray, ties by smallest id; None on a miss.");

    m.def("compose_panorama",
          [](const std::vector<std::tuple<double, double, py::array_t<std::uint8_t>>>& frames, int height) {
              std::vector<SceneFrame> in;
              for (const auto& [yaw, hfov, pixels] : frames) {
                  SceneFrame f;
                  f.camera_id = "py";
                  f.yaw = yaw;
                  f.hfov = hfov;
                  f.image = array_to_image(pixels);
                  in.push_back(std::move(f));
              }
              Panorama p = compose_panorama(in, height);
              py::array_t<std::uint8_t> coverage(static_cast<py::ssize_t>(p.coverage.size()));
              std::memcpy(coverage.mutable_data(), p.coverage.data(), p.coverage.size());
              return py::make_tuple(image_to_array(p.image), coverage);
          },
          py::arg("frames"), py::arg("height") = kDefaultPanoramaHeight,
          "Equirectangular panorama from (yaw, hfov, HxWx3) frames. Returns (image, column coverage).");

    m.def("extract_view",
          [](const std::vector<std::tuple<double, double, py::array_t<std::uint8_t>>>& frames, int height, double yaw,
             double pitch, double vfov, int width_px, int height_px) {
              std::vector<SceneFrame> in;
              for (const auto& [fyaw, hfov, pixels] : frames) {
                  SceneFrame f;
                  f.camera_id = "py";
                  f.yaw = fyaw;
                  f.hfov = hfov;
                  f.image = array_to_image(pixels);
                  in.push_back(std::move(f));
              }
              Panorama p = compose_panorama(in, height);
              return image_to_array(extract_view(p, ViewPose{yaw, pitch, vfov, width_px, height_px}));
          },
          py::arg("frames"), py::arg("height"), py::arg("yaw"), py::arg("pitch") = 0.0, py::arg("vfov") = 60.0,
          py::arg("width") = 640, py::arg("height_px") = 480);

    m.def("render_cylinder_frame",
          [](double yaw, double hfov, int width, int height) {
              return image_to_array(render_cylinder_frame(CylinderScene{}, yaw, 0.0, hfov, width, height));
          },
          py::arg("yaw"), py::arg("hfov") = 60.0, py::arg("width") = 160, py::arg("height") = 120);

    m.def("severity",
          [](const std::map<std::string, std::pair<double, double>>& ranges,
             const std::map<std::string, double>& values) {
              InteractableObject o;
              std::map<FieldKind, double> v;
              for (const auto& [k, r] : ranges) {
                  auto kind = parse_field_kind(k);
                  if (!kind) throw Error(ErrorCode::UnknownFieldKind, k);
                  o.target_ranges[*kind] = {r.first, r.second};
              }
              for (const auto& [k, x] : values) {
                  auto kind = parse_field_kind(k);
                  if (!kind) throw Error(ErrorCode::UnknownFieldKind, k);
                  v[*kind] = x;
              }
              Severity s = compute_severity(o, v);
              return py::make_tuple(std::string(to_string(s.level)), s.deviation);
          },
          py::arg("target_ranges"), py::arg("values"), "(level, deviation) under the default policy.");

    m.def("run_script_files",
          [](const std::string& scenario, const std::string& script) {
              Twin twin(load_scenario(scenario));
              ScriptResult r = run_script(twin, read_json_file(script));
              return py::make_tuple(r.exit_code, r.transcript_text(), twin.audit().text());
          },
          py::arg("scenario"), py::arg("script"), "Runs a script file; returns (exit_code, transcript, audit).");

    py::class_<Twin>(m, "Twin")
        .def(py::init([](const std::string& path) { return std::make_unique<Twin>(load_scenario(path)); }),
             py::arg("scenario_path"))
        .def_static("from_json",
                    [](const py::object& doc) { return std::make_unique<Twin>(parse_scenario(from_py(doc))); })
        .def_property_readonly("now", &Twin::now)
        .def("step", &Twin::step)
        .def("advance_to", &Twin::advance_to, py::arg("t"))
        .def("capture", &Twin::capture)
        .def("force", &Twin::force, py::arg("actuator_id"), py::arg("perturbation"))
        .def("iot_request",
             [](Twin& t, const std::string& method, const std::string& path, const py::object& body,
                const std::map<std::string, std::string>& query) {
                 return response_to_py(guarded(t.iot().handler(), make_request(method, path, body, query)));
             },
             py::arg("method"), py::arg("path"), py::arg("body") = py::none(),
             py::arg("query") = std::map<std::string, std::string>{})
        .def("interface_request",
             [](Twin& t, const std::string& method, const std::string& path, const py::object& body,
                const std::map<std::string, std::string>& query) {
                 return response_to_py(guarded(t.interface().handler(), make_request(method, path, body, query)));
             },
             py::arg("method"), py::arg("path"), py::arg("body") = py::none(),
             py::arg("query") = std::map<std::string, std::string>{})
        .def("open_session", [](Twin& t) { return t.interface().open_session(); })
        .def("close_session", [](Twin& t, const std::string& s) { t.interface().close_session(s); })
        .def("send",
             [](Twin& t, const std::string& session, const py::object& message) {
                 return to_py(t.interface().handle_message(session, from_py(message)));
             },
             py::arg("session"), py::arg("message"))
        .def("drain",
             [](Twin& t, const std::string& session) {
                 py::list out;
                 for (const auto& msg : t.interface().drain(session)) out.append(to_py(msg));
                 return out;
             })
        .def("highlight",
             [](Twin& t, const std::string& object_id) {
                 HighlightState h = t.interface().highlight(object_id);
                 return py::make_tuple(std::string(to_string(h.mode)), std::string(to_string(h.severity)));
             })
        .def("run_script",
             [](Twin& t, const py::object& script) {
                 ScriptResult r = run_script(t, from_py(script));
                 py::list transcript;
                 for (const auto& e : r.transcript) transcript.append(to_py(e));
                 return py::make_tuple(r.exit_code, transcript);
             })
        .def("replay",
             [](Twin& t, const py::object& records) {
                 std::vector<json> recs;
                 for (const auto& r : records) recs.push_back(from_py(r));
                 replay_audit(t, recs);
             })
        .def("audit_records",
             [](Twin& t) {
                 py::list out;
                 for (const auto& r : t.audit().records()) out.append(to_py(r));
                 return out;
             })
        .def("audit_text", [](Twin& t) { return t.audit().text(); });
}
