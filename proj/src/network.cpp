#include "mcbn/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace mcbn {

namespace {

void check_finite(const Tensor& t, const std::string& where) {
  if (!t.all_finite()) {
    throw NumericError("non-finite activations at " + where);
  }
}

void check_config(const NetworkConfig& cfg) {
  require_shape(cfg.depth >= 3, "network depth must be >= 3");
  require_shape(cfg.channels >= 1, "network channels must be >= 1");
  require_shape(cfg.kernel % 2 == 1, "network kernel must be odd");
}

}  // namespace

Eigen::Index ModelParams::parameter_count() const {
  Eigen::Index count = 0;
  for (const auto& c : conv) count += c.weights.size();
  for (const auto& b : bn) count += b.gamma.size() + b.beta.size();
  return count;
}

ModelParams build_network(const NetworkConfig& cfg, Rng& rng) {
  check_config(cfg);
  ModelParams p;
  p.cfg = cfg;
  p.conv.reserve(cfg.depth);
  for (Eigen::Index l = 0; l < cfg.depth; ++l) {
    const Eigen::Index c_in = (l == 0) ? 1 : cfg.channels;
    const Eigen::Index c_out = (l == cfg.depth - 1) ? 1 : cfg.channels;
    ConvLayerParams layer(c_out, c_in, cfg.kernel);
    layer.weights = xavier_init(layer.weights.size(), c_in * cfg.kernel * cfg.kernel,
                                c_out * cfg.kernel * cfg.kernel, rng);
    p.conv.push_back(std::move(layer));
    if (l < cfg.depth - 1) {
      p.bn.emplace_back(c_out, cfg.bn_eps);
    }
  }
  return p;
}

TrainForwardResult forward_train(const ModelParams& params, const Tensor& batch) {
  require_shape(batch.c == 1, "network input must be single-channel");
  TrainForwardResult r;
  const Eigen::Index depth = params.cfg.depth;
  r.caches.conv_input.reserve(depth);
  r.caches.bn_cache.reserve(depth - 1);
  r.caches.relu_input.reserve(depth - 1);
  r.stats.reserve(depth - 1);
  Tensor x = batch;
  for (Eigen::Index l = 0; l < depth; ++l) {
    r.caches.conv_input.push_back(x);
    x = conv2d_forward(x, params.conv[l]);
    if (l < depth - 1) {
      auto bnr = batchnorm_train_forward(x, params.bn[l]);
      r.stats.push_back({bnr.batch_mean, bnr.batch_var});
      r.caches.bn_cache.push_back(std::move(bnr.cache));
      r.caches.relu_input.push_back(bnr.output);
      x = relu_forward(bnr.output);
    }
    check_finite(x, "layer " + std::to_string(l + 1));
  }
  r.output = Tensor(batch.n, batch.c, batch.h, batch.w);
  r.output.data = batch.data + x.data;  // global residual skip
  return r;
}

namespace {

// Shared eval-mode graph; stats_for(layer, sample) supplies the BN statistics.
template <typename StatsFor>
Tensor forward_eval_impl(const ModelParams& params, const Tensor& input,
                         const StatsFor& bn_apply) {
  require_shape(input.c == 1, "network input must be single-channel");
  const Eigen::Index depth = params.cfg.depth;
  Tensor x = input;
  for (Eigen::Index l = 0; l < depth; ++l) {
    x = conv2d_forward(x, params.conv[l]);
    if (l < depth - 1) {
      x = bn_apply(l, x);
      x = relu_forward(x);
    }
    check_finite(x, "layer " + std::to_string(l + 1));
  }
  Tensor out(input.n, input.c, input.h, input.w);
  out.data = input.data + x.data;
  return out;
}

}  // namespace

Tensor forward_eval_fixed(const ModelParams& params, const Tensor& input,
                          const BatchStatsRecord& stats) {
  require_shape(static_cast<Eigen::Index>(stats.size()) == params.cfg.depth - 1,
                "stats record must have one entry per BN layer");
  return forward_eval_impl(params, input, [&](Eigen::Index l, const Tensor& x) {
    return batchnorm_eval_forward(x, params.bn[l], stats[l].mean, stats[l].var);
  });
}

Tensor forward_eval_per_sample(const ModelParams& params, const Tensor& input,
                               const std::vector<BatchStatsRecord>& stats_per_sample) {
  require_shape(static_cast<Eigen::Index>(stats_per_sample.size()) == input.n,
                "per-sample eval: batch size " + std::to_string(input.n) +
                    " != stats count " + std::to_string(stats_per_sample.size()));
  for (const auto& rec : stats_per_sample) {
    require_shape(static_cast<Eigen::Index>(rec.size()) == params.cfg.depth - 1,
                  "stats record must have one entry per BN layer");
  }
  return forward_eval_impl(params, input, [&](Eigen::Index l, const Tensor& x) {
    std::vector<ChannelStats> per_sample;
    per_sample.reserve(stats_per_sample.size());
    for (const auto& rec : stats_per_sample) per_sample.push_back(rec[l]);
    return batchnorm_per_sample_forward(x, params.bn[l], per_sample);
  });
}

NetworkAdamState make_adam_state(const ModelParams& params) {
  NetworkAdamState s;
  for (const auto& c : params.conv) s.conv.emplace_back(c.weights.size());
  for (const auto& b : params.bn) {
    s.gamma.emplace_back(b.gamma.size());
    s.beta.emplace_back(b.beta.size());
  }
  return s;
}

double train_step(ModelParams& params, NetworkAdamState& state,
                  const Tensor& batch_lr, const Tensor& batch_hr, double lr) {
  auto fwd = forward_train(params, batch_lr);
  auto mse = mse_loss(fwd.output, batch_hr);

  const Eigen::Index depth = params.cfg.depth;
  std::vector<ArrayXf> grad_w(depth);
  std::vector<ArrayXf> grad_gamma(depth - 1), grad_beta(depth - 1);

  // Residual skip: the branch sees the same gradient as the output.
  Tensor grad = mse.grad_pred;
  for (Eigen::Index l = depth - 1; l >= 0; --l) {
    if (l < depth - 1) {
      grad = relu_backward(grad, fwd.caches.relu_input[l]);
      auto bng = batchnorm_backward(grad, fwd.caches.bn_cache[l]);
      grad_gamma[l] = std::move(bng.grad_gamma);
      grad_beta[l] = std::move(bng.grad_beta);
      grad = std::move(bng.grad_input);
    }
    auto cg = conv2d_backward(grad, fwd.caches.conv_input[l], params.conv[l]);
    grad_w[l] = std::move(cg.grad_weights);
    grad = std::move(cg.grad_input);
  }

  for (Eigen::Index l = 0; l < depth; ++l) {
    adam_step(params.conv[l].weights, grad_w[l], state.conv[l], lr);
    if (l < depth - 1) {
      adam_step(params.bn[l].gamma, grad_gamma[l], state.gamma[l], lr);
      adam_step(params.bn[l].beta, grad_beta[l], state.beta[l], lr);
    }
  }
  return mse.loss;
}

double lr_at(const TrainSchedule& s, Eigen::Index update_index) {
  const Eigen::Index halvings = update_index / s.lr_halve_period;
  return s.lr_initial * std::pow(0.5, static_cast<double>(halvings));
}

TrainLog train_loop(ModelParams& params, const TrainSchedule& schedule,
                    const BatchProvider& next_batch,
                    const Tensor& val_lr, const Tensor& val_hr) {
  NetworkAdamState state = make_adam_state(params);
  TrainLog log;
  ModelParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  Tensor lr_batch, hr_batch;
  for (Eigen::Index u = 0; u < schedule.total_updates; ++u) {
    next_batch(u, lr_batch, hr_batch);
    const double loss = train_step(params, state, lr_batch, hr_batch, lr_at(schedule, u));
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite training loss at update " + std::to_string(u));
    }
    log.loss.push_back(loss);
    const bool last = (u == schedule.total_updates - 1);
    if ((u + 1) % schedule.validate_every == 0 || last) {
      // Validation in training-stats mode on the held-out patch batch.
      auto vf = forward_train(params, val_lr);
      const double vloss = mse_loss(vf.output, val_hr).loss;
      log.validation_loss.push_back(vloss);
      if (vloss < best_val) {
        best_val = vloss;
        best = params;
        log.best_validation_update = u;
      }
    }
  }
  params = best;
  return log;
}

// ---- checkpoint I/O ----

namespace {

constexpr char kCheckpointMagic[4] = {'M', 'C', 'S', 'R'};
constexpr std::uint16_t kCheckpointVersion = 1;

void write_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

std::uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_f32_array(std::ostream& os, const ArrayXf& a) {
  // Little-endian host assumed; asserted in save/load.
  os.write(reinterpret_cast<const char*>(a.data()),
           static_cast<std::streamsize>(a.size() * sizeof(float)));
}

void read_f32_array(std::istream& is, ArrayXf& a) {
  is.read(reinterpret_cast<char*>(a.data()),
          static_cast<std::streamsize>(a.size() * sizeof(float)));
}

void assert_little_endian() {
  const std::uint16_t probe = 1;
  unsigned char first;
  std::memcpy(&first, &probe, 1);
  if (first != 1) throw std::runtime_error("big-endian hosts are not supported");
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  assert_little_endian();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 4);
  write_u16(os, kCheckpointVersion);
  write_u16(os, static_cast<std::uint16_t>(params.cfg.depth));
  write_u16(os, static_cast<std::uint16_t>(params.cfg.channels));
  write_u16(os, static_cast<std::uint16_t>(params.cfg.kernel));
  const ArrayXf eps = ArrayXf::Constant(1, params.cfg.bn_eps);
  write_f32_array(os, eps);
  for (Eigen::Index l = 0; l < params.cfg.depth; ++l) {
    write_f32_array(os, params.conv[l].weights);
    if (l < params.cfg.depth - 1) {
      write_f32_array(os, params.bn[l].gamma);
      write_f32_array(os, params.bn[l].beta);
    }
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  assert_little_endian();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("bad checkpoint magic in " + path);
  }
  const std::uint16_t version = read_u16(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  NetworkConfig cfg;
  cfg.depth = read_u16(is);
  cfg.channels = read_u16(is);
  cfg.kernel = read_u16(is);
  ArrayXf eps(1);
  read_f32_array(is, eps);
  cfg.bn_eps = eps[0];
  check_config(cfg);
  ModelParams p;
  p.cfg = cfg;
  for (Eigen::Index l = 0; l < cfg.depth; ++l) {
    const Eigen::Index c_in = (l == 0) ? 1 : cfg.channels;
    const Eigen::Index c_out = (l == cfg.depth - 1) ? 1 : cfg.channels;
    ConvLayerParams layer(c_out, c_in, cfg.kernel);
    read_f32_array(is, layer.weights);
    p.conv.push_back(std::move(layer));
    if (l < cfg.depth - 1) {
      BnLayerParams bnp(c_out, cfg.bn_eps);
      read_f32_array(is, bnp.gamma);
      read_f32_array(is, bnp.beta);
      p.bn.push_back(std::move(bnp));
    }
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return p;
}

}  // namespace mcbn
