#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mcbn/rng.hpp"
#include "mcbn/tensor.hpp"

namespace mcbn {

// Stride-1, zero same-padded convolution weights, no bias.
struct ConvLayerParams {
  Eigen::Index c_out = 0, c_in = 0, k = 0;
  ArrayXf weights;  // (C_out, C_in, k, k) row-major flat

  ConvLayerParams() = default;
  ConvLayerParams(Eigen::Index c_out_, Eigen::Index c_in_, Eigen::Index k_)
      : c_out(c_out_), c_in(c_in_), k(k_),
        weights(ArrayXf::Zero(c_out_ * c_in_ * k_ * k_)) {}
};

struct BnLayerParams {
  ArrayXf gamma;
  ArrayXf beta;
  float eps = 1e-5f;

  BnLayerParams() = default;
  explicit BnLayerParams(Eigen::Index channels, float eps_ = 1e-5f)
      : gamma(ArrayXf::Ones(channels)), beta(ArrayXf::Zero(channels)), eps(eps_) {}
  Eigen::Index channels() const { return gamma.size(); }
};

struct AdamState {
  ArrayXd m;  // first moment, 64-bit
  ArrayXd v;  // second moment, 64-bit
  std::int64_t step_count = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  AdamState() = default;
  explicit AdamState(Eigen::Index size)
      : m(ArrayXd::Zero(size)), v(ArrayXd::Zero(size)) {}
};

// ---- convolution ----

Tensor conv2d_forward(const Tensor& input, const ConvLayerParams& params);

struct ConvGrads {
  Tensor grad_input;
  ArrayXf grad_weights;  // same flat layout as params.weights
};

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& cached_input,
                          const ConvLayerParams& params);

// ---- batch normalization ----

struct BnCache {
  Tensor xhat;       // normalized input
  ArrayXf inv_std;   // per channel, 1/sqrt(var + eps)
  ArrayXf gamma;
  bool valid = false;
};

struct BnTrainResult {
  Tensor output;
  ArrayXf batch_mean;  // exactly the values used for normalization
  ArrayXf batch_var;   // population (biased) variance over N*H*W
  BnCache cache;
};

BnTrainResult batchnorm_train_forward(const Tensor& input, const BnLayerParams& params);

struct BnGrads {
  Tensor grad_input;
  ArrayXf grad_gamma;
  ArrayXf grad_beta;
};

BnGrads batchnorm_backward(const Tensor& grad_out, const BnCache& cache);

Tensor batchnorm_eval_forward(const Tensor& input, const BnLayerParams& params,
                              const ArrayXf& mean, const ArrayXf& var);

// One (mean, var) pair per channel for one batch element.
struct ChannelStats {
  ArrayXf mean;
  ArrayXf var;
};

// Batch element t is normalized with stats[t]; nothing is pooled across the batch.
Tensor batchnorm_per_sample_forward(const Tensor& input, const BnLayerParams& params,
                                    const std::vector<ChannelStats>& stats);

// ---- activation / loss / optimizer / init ----

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& grad_out, const Tensor& cached_input);

struct MseResult {
  double loss = 0.0;
  Tensor grad_pred;
};

MseResult mse_loss(const Tensor& pred, const Tensor& target);

// Bias-corrected Adam update, in place.
void adam_step(ArrayXf& params, const ArrayXf& grads, AdamState& state, double lr);

// Uniform in +/- sqrt(6 / (fan_in + fan_out)).
ArrayXf xavier_init(Eigen::Index size, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

Tensor xavier_init_conv(Eigen::Index c_out, Eigen::Index c_in, Eigen::Index k, Rng& rng);

}  // namespace mcbn
