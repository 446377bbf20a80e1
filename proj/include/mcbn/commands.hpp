#pragma once

#include <string>

#include "mcbn/config.hpp"

namespace mcbn {

// Derived-seed stream ids; documented here so manifests stay meaningful.
enum SeedStream : std::uint64_t {
  kStreamInit = 1,
  kStreamTraining = 2,
  kStreamValidation = 3,
  kStreamStats = 4,
  kStreamBench = 5,
};

struct EvaluateOptions {
  bool bypass = false;    // score the HR image against itself (pipeline check)
  bool sweep_t = false;   // one aggregate row per T in {3,5,10,15,25}
};

// Exit codes: 0 success, 2 usage/input error, 3 numeric failure. The cmd_*
// functions throw (ShapeError / invalid_argument -> 2, NumericError -> 3);
// run_command maps exceptions to codes and prints the message to stderr.
void cmd_train(const RunConfig& cfg);
void cmd_estimate_stats(const RunConfig& cfg);
void cmd_super_resolve(const RunConfig& cfg, const std::string& input_image);
void cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opts = {});
void cmd_benchmark(const RunConfig& cfg);

int run_command(const std::string& name, const RunConfig& cfg,
                const std::string& input_image = {}, const EvaluateOptions& eval_opts = {});

}  // namespace mcbn
