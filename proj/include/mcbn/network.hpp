#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mcbn/ops.hpp"

namespace mcbn {

// D-layer residual network: conv+BN+ReLU blocks with a conv-only last layer
// and a global input-to-output skip. Single channel in and out.
struct NetworkConfig {
  Eigen::Index depth = 8;     // >= 3
  Eigen::Index channels = 32;
  Eigen::Index kernel = 3;    // odd
  float bn_eps = 1e-5f;
};

struct ModelParams {
  NetworkConfig cfg;
  std::vector<ConvLayerParams> conv;  // size depth
  std::vector<BnLayerParams> bn;      // size depth-1, none after the last conv

  Eigen::Index parameter_count() const;
};

// Batch statistics of every BN layer, captured during one training-mode pass.
using BatchStatsRecord = std::vector<ChannelStats>;  // size depth-1

ModelParams build_network(const NetworkConfig& cfg, Rng& rng);

struct ForwardCaches {
  std::vector<Tensor> conv_input;  // per layer
  std::vector<BnCache> bn_cache;   // per BN layer
  std::vector<Tensor> relu_input;  // per BN layer (BN output)
};

struct TrainForwardResult {
  Tensor output;
  BatchStatsRecord stats;
  ForwardCaches caches;
};

TrainForwardResult forward_train(const ModelParams& params, const Tensor& batch);

// BN layers use the supplied statistics instead of batch statistics.
Tensor forward_eval_fixed(const ModelParams& params, const Tensor& input,
                          const BatchStatsRecord& stats);

// Batch element t is normalized with stats_per_sample[t] at every BN layer;
// requires input.n == stats_per_sample.size().
Tensor forward_eval_per_sample(const ModelParams& params, const Tensor& input,
                               const std::vector<BatchStatsRecord>& stats_per_sample);

struct NetworkAdamState {
  std::vector<AdamState> conv;
  std::vector<AdamState> gamma;
  std::vector<AdamState> beta;
};

NetworkAdamState make_adam_state(const ModelParams& params);

double train_step(ModelParams& params, NetworkAdamState& state,
                  const Tensor& batch_lr, const Tensor& batch_hr, double lr);

struct TrainSchedule {
  double lr_initial = 1e-4;
  Eigen::Index lr_halve_period = 400;  // in batch updates
  Eigen::Index total_updates = 1000;
  Eigen::Index validate_every = 50;
};

double lr_at(const TrainSchedule& s, Eigen::Index update_index);  // 0-based

// Supplies the LR/HR patch batch for one update.
using BatchProvider = std::function<void(Eigen::Index update, Tensor& lr, Tensor& hr)>;

struct TrainLog {
  std::vector<double> loss;              // one entry per update
  std::vector<double> validation_loss;   // one entry per validation
  Eigen::Index best_validation_update = -1;
};

// Runs the update loop, tracks validation MSE on val_lr/val_hr, and leaves
// the best-validation parameters in `params`.
TrainLog train_loop(ModelParams& params, const TrainSchedule& schedule,
                    const BatchProvider& next_batch,
                    const Tensor& val_lr, const Tensor& val_hr);

// "MCSR" checkpoint, byte layout in docs/formats.md.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace mcbn
