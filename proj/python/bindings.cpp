#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "voyagecast/eval.hpp"
#include "voyagecast/geo.hpp"
#include "voyagecast/pipeline.hpp"

namespace py = pybind11;
namespace vc = voyagecast;

namespace {

vc::pipeline::PipelineConfig config_from(const std::string& text) {
  nlohmann::json j;
  try {
    j = text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw vc::pipeline::ConfigError(e.what());
  }
  return vc::pipeline::PipelineConfig::from_json(j);
}

std::string run_stage(const std::string& stage, const std::string& config, const std::filesystem::path& predictions) {
  const auto cfg = config_from(config);
  py::gil_scoped_release release;
  if (stage == "synth") return vc::pipeline::run_synth(cfg);
  if (stage == "grid") return vc::pipeline::run_grid(cfg);
  if (stage == "ingest") return vc::pipeline::run_ingest(cfg);
  if (stage == "fit-prob") return vc::pipeline::run_fit_prob(cfg);
  if (stage == "featurize") return vc::pipeline::run_featurize(cfg);
  if (stage == "train") return vc::pipeline::run_train(cfg);
  if (stage == "predict") return vc::pipeline::run_predict(cfg);
  if (stage == "evaluate") return vc::pipeline::run_evaluate(cfg, predictions);
  throw vc::pipeline::ConfigError("unknown stage '" + stage + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Vessel trajectory forecasting core";

  py::register_exception<vc::pipeline::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "haversine_km",
      [](double lat1, double lon1, double lat2, double lon2) {
        return vc::geo::haversine_km(vc::geo::make_point(lat1, lon1), vc::geo::make_point(lat2, lon2));
      },
      py::arg("lat1"), py::arg("lon1"), py::arg("lat2"), py::arg("lon2"));
  m.def(
      "bearing_deg",
      [](double lat1, double lon1, double lat2, double lon2) {
        return vc::geo::bearing_deg(vc::geo::make_point(lat1, lon1), vc::geo::make_point(lat2, lon2));
      },
      py::arg("lat1"), py::arg("lon1"), py::arg("lat2"), py::arg("lon2"), "Initial bearing in [0, 360).");

  py::class_<vc::grid::HexGrid>(m, "HexGrid")
      .def_static(
          "build",
          [](double lat_min, double lat_max, double lon_min, double lon_max, double cell_size_deg) {
            return vc::grid::HexGrid::build({lat_min, lat_max, lon_min, lon_max}, cell_size_deg);
          },
          py::arg("lat_min"), py::arg("lat_max"), py::arg("lon_min"), py::arg("lon_max"), py::arg("cell_size_deg"))
      .def_property_readonly("cell_count", &vc::grid::HexGrid::cell_count)
      .def_property_readonly("cell_size", &vc::grid::HexGrid::cell_size)
      .def(
          "locate",
          [](const vc::grid::HexGrid& g, double lat, double lon) { return g.locate({lat, lon}); },
          py::arg("lat"), py::arg("lon"))
      .def(
          "centroid",
          [](const vc::grid::HexGrid& g, int id) {
            const auto c = g.centroid(id);
            return std::make_pair(c.lat, c.lon);
          },
          py::arg("cell"));

  m.def(
      "feature_arity",
      [](const std::string& name) { return vc::features::arity(vc::features::parse_feature_set(name)); },
      py::arg("feature_set"));

  m.def(
      "parameter_count",
      [](const std::string& config) {
        const auto cfg = config_from(config);
        vc::nn::ModelConfig mc = cfg.model;
        mc.input_width = vc::features::arity(cfg.feature_set);
        vc::nn::Model model(mc);
        return model.parameter_count();
      },
      py::arg("config") = "", "Trainable parameters of the model a JSON config describes.");

  m.def(
      "error_report",
      [](const std::vector<vc::eval::Coord>& truth, const std::vector<vc::eval::Coord>& pred) {
        return vc::eval::to_json(vc::eval::haversine_error_report(truth, pred)).dump();
      },
      py::arg("truth"), py::arg("pred"), "Haversine error statistics of matched (lat, lon) pairs, as JSON.");

  m.def("content_hash", [](const std::string& bytes) { return vc::pipeline::content_hash(bytes); });
  m.def(
      "normalize_config", [](const std::string& config) { return config_from(config).to_json().dump(); },
      py::arg("config") = "", "Complete JSON config with defaults filled in.");
  m.def("run_stage", &run_stage, py::arg("stage"), py::arg("config"), py::arg("predictions") = std::filesystem::path{});
}
