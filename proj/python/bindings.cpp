#include "hvsim/config.hpp"
#include "hvsim/scenarios.hpp"
#include "hvsim/stats.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace hvsim;

namespace {

py::dict summary_dict(const ScenarioResult& r) {
  py::dict out;
  for (const auto& s : r.summary) {
    py::dict m;
    m["mean"] = s.mean;
    m["ci95_half_width"] = s.half_width ? py::cast(*s.half_width) : py::none();
    m["runs"] = s.samples;
    out[py::str(s.name)] = m;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hybrid vehicular network simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::enum_<ScenarioKind>(m, "ScenarioKind")
      .value("AERIAL_SENSOR", ScenarioKind::AerialSensor)
      .value("AERIAL_BS", ScenarioKind::AerialBs)
      .value("PREDICTION", ScenarioKind::Prediction)
      .value("SCALABILITY", ScenarioKind::Scalability);

  py::enum_<Technology>(m, "Technology")
      .value("CELLULAR", Technology::Cellular)
      .value("SIDELINK", Technology::Sidelink);

  py::class_<ScenarioConfig>(m, "Config")
      .def_readwrite("kind", &ScenarioConfig::kind)
      .def_readwrite("cars", &ScenarioConfig::cars)
      .def_readwrite("uavs", &ScenarioConfig::uavs)
      .def_readwrite("duration", &ScenarioConfig::duration_s)
      .def_readwrite("runs", &ScenarioConfig::runs)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_readwrite("output", &ScenarioConfig::output)
      .def_readwrite("enb_height", &ScenarioConfig::enb_height)
      .def_property(
          "technology", [](const ScenarioConfig& c) { return c.radio.technology; },
          [](ScenarioConfig& c, Technology t) {
            c.radio = t == Technology::Cellular ? RadioConfig::cellular() : RadioConfig::sidelink();
          })
      .def_property(
          "packet_size", [](const ScenarioConfig& c) { return c.traffic.size_bytes; },
          [](ScenarioConfig& c, std::uint32_t v) { c.traffic.size_bytes = v; })
      .def_property(
          "interval", [](const ScenarioConfig& c) { return c.traffic.interval_s; },
          [](ScenarioConfig& c, double v) { c.traffic.interval_s = v; })
      .def_property(
          "aerial_bs_uavs", [](const ScenarioConfig& c) { return c.aerial_bs.uavs; },
          [](ScenarioConfig& c, int v) { c.aerial_bs.uavs = c.uavs = v; })
      .def_property(
          "altitudes", [](const ScenarioConfig& c) { return c.prediction.altitudes; },
          [](ScenarioConfig& c, std::vector<double> v) { c.prediction.altitudes = std::move(v); })
      .def("validate", &ScenarioConfig::validate);

  m.def("default_config", &default_config, py::arg("kind"));
  m.def("parse_config", &parse_config, py::arg("yaml"), py::arg("base_dir") = std::filesystem::path());
  m.def("load_config", &load_config, py::arg("path"));

  m.def(
      "run",
      [](const ScenarioConfig& config, int threads, bool write_files) {
        config.validate();
        RunnerOptions opt;
        opt.threads = threads;
        opt.write_files = write_files;
        ScenarioResult r;
        {
          py::gil_scoped_release release;
          r = run_scenario(config, opt);
        }
        py::dict out;
        out["complete"] = r.complete;
        out["error"] = r.error;
        out["runs"] = r.runs;
        out["summary"] = summary_dict(r);
        return out;
      },
      py::arg("config"), py::arg("threads") = 1, py::arg("write_files") = false,
      "Run all replications; returns per-run metrics and the mean/CI summary.");

  m.def(
      "heatmap",
      [](const ScenarioConfig& config, double altitude, double cell_size) {
        const World world = build_world(config);
        const auto maps = build_heatmaps(config, world, {altitude}, cell_size);
        const auto& map = maps.front();
        py::array_t<double> grid({map.rows(), map.cols()});
        auto view = grid.mutable_unchecked<2>();
        for (int r = 0; r < map.rows(); ++r)
          for (int c = 0; c < map.cols(); ++c) view(r, c) = map.at(r, c);
        py::dict out;
        out["rsrp_dbm"] = grid;
        out["origin"] = py::make_tuple(map.origin().x(), map.origin().y());
        out["cell_size"] = map.cell_size();
        out["altitude"] = map.altitude();
        return out;
      },
      py::arg("config"), py::arg("altitude"), py::arg("cell_size") = 10.0,
      "RSRP grid of the scenario eNB at one altitude (row 0 = lowest y).");

  m.def(
      "aggregate",
      [](const std::vector<double>& samples, double confidence) {
        const auto s = aggregate("", samples, confidence);
        return py::make_tuple(s.mean, s.half_width ? py::cast(*s.half_width) : py::none());
      },
      py::arg("samples"), py::arg("confidence") = 0.95,
      "Mean and Student-t half-width (None for a single sample).");
}
