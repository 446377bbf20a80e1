#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "mcbn/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo batch-normalization super-resolution"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file");
    sub->add_option("--set", overrides,
                    "override a config value, e.g. --set training.lr=1e-3");
  };

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train);
  auto* stats = app.add_subcommand("estimate-stats",
                                   "estimate stochastic BN parameter sets from a trained model");
  add_common(stats);
  auto* sr = app.add_subcommand("super-resolve", "reconstruct one LR image with uncertainty");
  add_common(sr);
  std::string input_image;
  sr->add_option("input", input_image, "LR input PNG")->required();
  auto* eval = app.add_subcommand("evaluate", "score reconstructions on a test directory");
  add_common(eval);
  mcbn::EvaluateOptions eval_opts;
  eval->add_flag("--bypass", eval_opts.bypass,
                 "score each HR image against itself (pipeline check)");
  eval->add_flag("--sweep-T", eval_opts.sweep_t, "one aggregate row per MC sample count");
  auto* bench = app.add_subcommand("benchmark", "time naive vs fast MC generation");
  add_common(bench);

  CLI11_PARSE(app, argc, argv);

  mcbn::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = mcbn::load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::cerr << "bad --set value (expected key=value): " << kv << "\n";
        return 2;
      }
      mcbn::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  return mcbn::run_command(name, cfg, input_image, eval_opts);
}
