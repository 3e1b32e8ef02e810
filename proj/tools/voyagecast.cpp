#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>

#include "voyagecast/pipeline.hpp"

namespace vp = voyagecast::pipeline;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string feature_set;
  std::string ablation;
  std::string out;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> vessels;
};

vp::PipelineConfig resolve(const Overrides& o) {
  vp::PipelineConfig cfg = o.config.empty() ? vp::PipelineConfig{} : vp::PipelineConfig::load(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.feature_set.empty()) {
    try {
      cfg.feature_set = voyagecast::features::parse_feature_set(o.feature_set);
    } catch (const std::invalid_argument& e) {
      throw vp::ConfigError(e.what());
    }
  }
  if (!o.ablation.empty()) {
    try {
      cfg.model.ablation = voyagecast::nn::parse_ablation(o.ablation);
    } catch (const std::invalid_argument& e) {
      throw vp::ConfigError(e.what());
    }
  }
  if (o.epochs) cfg.train.max_epochs = *o.epochs;
  if (o.vessels) cfg.synth_vessels = *o.vessels;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vessel trajectory forecasting: synthetic AIS, ingest, probabilistic features and a CNN-LSTM forecaster."};
  app.require_subcommand(1, 1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Seed for every random stream");
  app.add_option("--feature-set", o.feature_set, "standard | probabilistic | trigonometric");
  app.add_option("--ablation", o.ablation, "Model variant C1..C5");
  app.add_option("--out", o.out, "Artifact directory");

  std::filesystem::path predictions;
  std::map<std::string, std::function<std::string(const vp::PipelineConfig&)>> stages{
      {"synth", vp::run_synth},         {"grid", vp::run_grid},       {"ingest", vp::run_ingest},
      {"fit-prob", vp::run_fit_prob},   {"featurize", vp::run_featurize}, {"train", vp::run_train},
      {"predict", vp::run_predict},
      {"evaluate", [&](const vp::PipelineConfig& c) { return vp::run_evaluate(c, predictions); }}};
  const std::map<std::string, std::string> help{
      {"synth", "Generate a synthetic AIS corpus with known routes and destinations"},
      {"grid", "Build the hexagonal grid over the region"},
      {"ingest", "Segment, clean, interpolate and split AIS tracks"},
      {"fit-prob", "Fit the per-cell probability store on training tracks"},
      {"featurize", "Compute feature windows for every split"},
      {"train", "Train the forecaster"},
      {"predict", "Forecast the test windows"},
      {"evaluate", "Score forecasts with haversine error statistics"}};
  for (const auto& [name, text] : help) {
    auto* sub = app.add_subcommand(name, text);
    if (name == "synth") sub->add_option("--vessels", o.vessels, "Number of simulated vessels");
    if (name == "train") sub->add_option("--epochs", o.epochs, "Maximum training epochs");
    if (name == "evaluate") sub->add_option("--predictions", predictions, "Predictions CSV to score");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const auto cfg = resolve(o);
    const std::string stage = app.get_subcommands().front()->get_name();
    std::cout << stages.at(stage)(cfg) << '\n';
    return 0;
  } catch (const vp::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
