#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mcbn {

// Resolved run configuration. File format: "[section]" headers and
// "key = value" lines, '#' comments; CLI flags override file values.
struct RunConfig {
  std::uint64_t seed = 1;

  // [network]
  int depth = 8;
  int channels = 32;
  int kernel = 3;

  // [training]
  int patch_size = 64;
  int batch_size = 16;
  int total_updates = 1000;
  double lr = 1e-4;
  int lr_halve_period = 400;
  bool augment = true;
  int validate_every = 50;
  int val_patches_per_image = 4;

  // [inference]
  int scale = 2;
  int mc_samples = 25;  // T
  double var_floor = 1e-6;
  bool clip_samples = true;

  // [benchmark]
  int bench_image_size = 276;
  int bench_repeats = 5;
  std::vector<int> bench_t_values = {5, 10, 15};

  // [paths]
  std::string train_dir;
  std::string val_dir;
  std::string test_dir;
  std::string checkpoint = "model.mcsr";
  std::string stats_file = "stats.mcbn";
  std::string output_dir = ".";
};

RunConfig load_config(const std::string& path);

// key -> value view of a config, grouped as "section.key".
std::map<std::string, std::string> config_to_map(const RunConfig& cfg);

void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

// Serializes the fully resolved config; the output is itself a loadable
// config file and doubles as the run manifest body.
std::string config_to_text(const RunConfig& cfg);

void validate_config(const RunConfig& cfg);

}  // namespace mcbn
