#include "mtmc/commands.hpp"
#include "mtmc/types.hpp"

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Multi-camera multi-target tracker"};
  app.require_subcommand(1);

  std::string config, out, weights, detections, gt, pred;

  auto* simulate = app.add_subcommand(
      "simulate", "Generate a scenario's GT and detection track files");
  simulate->add_option("--config", config, "Run config file")->required();
  simulate->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand(
      "train", "Train the association model on the configured scenario");
  train->add_option("--config", config, "Run config file")->required();
  train->add_option("--out", out, "Weights output path")->required();

  auto* track = app.add_subcommand(
      "track", "Run the online tracker over a detection track file");
  track->add_option("--weights", weights, "Trained weights file")->required();
  track->add_option("--detections", detections, "Detection track file")
      ->required();
  track->add_option("--config", config, "Run config file")->required();
  track->add_option("--out", out, "Prediction track file to write")
      ->required();

  auto* evaluate = app.add_subcommand(
      "evaluate", "Score a prediction track file against ground truth");
  evaluate->add_option("--gt", gt, "Ground-truth track file")->required();
  evaluate->add_option("--pred", pred, "Prediction track file")->required();

  app.add_subcommand("selftest", "Run the built-in oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) {
      mtmc::cmd_simulate(config, out);
    } else if (train->parsed()) {
      mtmc::cmd_train(config, out);
    } else if (track->parsed()) {
      mtmc::cmd_track(weights, detections, config, out);
    } else if (evaluate->parsed()) {
      mtmc::cmd_evaluate(gt, pred, std::cout);
    } else {
      return mtmc::cmd_selftest(std::cout) ? 0 : 3;
    }
  } catch (const mtmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const mtmc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
