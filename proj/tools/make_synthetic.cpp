// Writes a synthetic parallel embedding pair (EMB1) for trying the pipeline
// without an encoder: targets are random unit vectors, sources are a fixed
// nonlinear distortion of them plus noise.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bitext/corpus_io.hpp"
#include "bitext/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic source/target embedding pair"};
  bitext::SyntheticConfig config;
  std::string source_out, target_out;
  double noise = -1.0;
  app.add_option("--count", config.count)->capture_default_str();
  app.add_option("--dim", config.dim)->capture_default_str();
  app.add_option("--seed", config.seed)->capture_default_str();
  app.add_option("--strength", config.strength)->capture_default_str();
  app.add_option("--gain", config.gain)->capture_default_str();
  app.add_option("--noise", noise, "Fixed noise level (default: calibrated)");
  app.add_option("--target-top1", config.target_raw_top1, "Raw Top-1 accuracy to calibrate to")
      ->capture_default_str();
  app.add_option("--source-out", source_out)->required();
  app.add_option("--target-out", target_out)->required();
  CLI11_PARSE(app, argc, argv);

  try {
    if (noise >= 0.0) config.noise = noise;
    const auto task = bitext::make_synthetic_task(config);
    bitext::save_embeddings(task.sources, source_out);
    bitext::save_embeddings(task.targets, target_out);
    std::printf("rows %zu dim %zu noise %.4f raw top-1 %.4f\n", task.targets.count(),
                task.targets.dim(), task.noise, task.raw_top1);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
