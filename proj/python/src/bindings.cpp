#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "discom/cli/cli.hpp"
#include "discom/cli/scenario.hpp"
#include "discom/engine/evaluator.hpp"
#include "discom/error.hpp"
#include "discom/model/address.hpp"
#include "discom/model/range_image.hpp"
#include "discom/server/api.hpp"

namespace py = pybind11;
using namespace discom;

namespace {

py::object to_python(const model::CellValue& v) {
  if (v.is_number()) return py::float_(v.number());
  if (v.is_text()) return py::str(v.text());
  if (v.is_bool()) return py::bool_(v.boolean());
  if (v.is_error()) return py::str(v.display());
  return py::none();
}

// Workbook that stays evaluated after every edit.
class PyWorkbook {
 public:
  explicit PyWorkbook(model::Workbook wb) : wb_(engine::evaluate_all(std::move(wb))) {}

  void set(const std::string& addr, const std::string& input) {
    auto a = model::parse_address(addr);
    wb_.ensure_sheet(a.sheet);
    wb_.set_input(a, input);
    engine::recalculate(wb_, {a});
  }
  py::object value(const std::string& addr) const { return to_python(wb_.value(model::parse_address(addr))); }
  std::string display(const std::string& addr) const { return wb_.value(model::parse_address(addr)).display(); }
  std::string input(const std::string& addr) const {
    const auto* c = wb_.cell(model::parse_address(addr));
    return c ? c->input_text() : std::string();
  }
  std::vector<std::string> sheets() const {
    std::vector<std::string> out;
    for (const auto& s : wb_.sheets()) out.push_back(s.name());
    return out;
  }
  std::string image(const std::string& range, const std::string& export_id) const {
    return model::encode_range_image(model::capture_image(wb_, model::parse_range(range), export_id, 1));
  }

  const model::Workbook& get() const { return wb_; }

 private:
  model::Workbook wb_;
};

// In-process platform reached through the same JSON surface as over HTTP.
class PyPlatform {
 public:
  PyPlatform(const std::string& data_dir, unsigned workers, bool fast_hashing)
      : platform_(options(data_dir, workers, fast_hashing)), api_(platform_) {}

  py::tuple request(const std::string& method, const std::string& path, const std::string& body,
                    const std::string& token) {
    wire::HttpResponse res;
    {
      py::gil_scoped_release unlocked;
      res = api_.dispatch({method, path, body, token});
    }
    return py::make_tuple(res.status, res.body);
  }
  void bootstrap_admin(const std::string& id, const std::string& secret) { platform_.bootstrap_admin(id, secret); }
  void drain() {
    py::gil_scoped_release unlocked;
    platform_.drain();
  }
  std::vector<std::string> diagnostics() const { return platform_.diagnostics(); }

 private:
  static server::PlatformOptions options(const std::string& dir, unsigned workers, bool fast) {
    server::PlatformOptions o;
    o.data_dir = dir;
    o.workers = workers;
    if (fast) o.hash_strength = server::HashStrength::Minimum;
    return o;
  }

  server::Platform platform_;
  server::ApiService api_;
};

}  // namespace

PYBIND11_MODULE(_discom, m) {
  m.doc() = "Native core of the discom spreadsheet composition platform.";

  auto base = py::register_exception<Error>(m, "DiscomError");
  (void)base;

  py::class_<PyWorkbook>(m, "Workbook")
      .def(py::init([](const std::string& id) { return PyWorkbook(model::Workbook(id)); }), py::arg("id") = "book")
      .def_static("from_xml", [](const std::string& doc) { return PyWorkbook(model::decode_workbook(doc)); })
      .def("to_xml", [](const PyWorkbook& w) { return model::encode_workbook(w.get()); })
      .def("set", &PyWorkbook::set, py::arg("address"), py::arg("input"),
           "Edit a cell (\"=...\" for a formula) and recalculate its dependents.")
      .def("value", &PyWorkbook::value, py::arg("address"))
      .def("display", &PyWorkbook::display, py::arg("address"))
      .def("input", &PyWorkbook::input, py::arg("address"))
      .def("image", &PyWorkbook::image, py::arg("range"), py::arg("export_id") = "local",
           "Range image XML of the computed values.")
      .def_property_readonly("id", [](const PyWorkbook& w) { return w.get().id(); })
      .def_property_readonly("sheets", &PyWorkbook::sheets);

  py::class_<PyPlatform>(m, "Platform")
      .def(py::init<const std::string&, unsigned, bool>(), py::arg("data_dir") = "", py::arg("workers") = 0,
           py::arg("fast_hashing") = true)
      .def("bootstrap_admin", &PyPlatform::bootstrap_admin)
      .def("request", &PyPlatform::request, py::arg("method"), py::arg("path"), py::arg("body") = "",
           py::arg("token") = "", "Dispatch one /api/v1 request; returns (status, body).")
      .def("drain", &PyPlatform::drain)
      .def("diagnostics", &PyPlatform::diagnostics);

  m.def(
      "replay_scenario",
      [](const std::string& path) {
        auto r = cli::replay_scenario_file(path);
        return py::make_tuple(r.ok, r.failures, r.snapshot.dump());
      },
      py::arg("path"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        cli::CommandOutcome out;
        {
          py::gil_scoped_release unlocked;
          out = cli::run_command(args);
        }
        return py::make_tuple(out.exit_code, out.text);
      },
      py::arg("args"));
}
