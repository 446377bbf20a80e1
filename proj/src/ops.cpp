#include "mcbn/ops.hpp"

#include <cmath>

namespace mcbn {

namespace {

using RowMajorMatrixXf =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajorMatrixXf> weight_matrix(const ConvLayerParams& p) {
  return {p.weights.data(), p.c_out, p.c_in * p.k * p.k};
}

// Columns of one sample: (C_in*k*k) x (H*W), zero padding outside the image.
void im2col(const Tensor& input, Eigen::Index sample, Eigen::Index k, MatrixXf& cols) {
  const Eigen::Index h = input.h, w = input.w, c_in = input.c;
  const Eigen::Index pad = (k - 1) / 2;
  cols.setZero(c_in * k * k, h * w);
  for (Eigen::Index ic = 0; ic < c_in; ++ic) {
    const float* src = input.data.data() + ((sample * c_in + ic) * h) * w;
    for (Eigen::Index ky = 0; ky < k; ++ky) {
      for (Eigen::Index kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (ic * k + ky) * k + kx;
        const Eigen::Index dy = ky - pad, dx = kx - pad;
        const Eigen::Index y0 = std::max<Eigen::Index>(0, -dy);
        const Eigen::Index y1 = std::min(h, h - dy);
        const Eigen::Index x0 = std::max<Eigen::Index>(0, -dx);
        const Eigen::Index x1 = std::min(w, w - dx);
        for (Eigen::Index y = y0; y < y1; ++y) {
          const float* in_row = src + (y + dy) * w + dx;
          float* dst = cols.data() + row;  // stride = rows()
          const Eigen::Index stride = cols.rows();
          for (Eigen::Index x = x0; x < x1; ++x) {
            dst[(y * w + x) * stride] = in_row[x];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the image grid.
void col2im(const MatrixXf& cols, Eigen::Index sample, Eigen::Index k, Tensor& out) {
  const Eigen::Index h = out.h, w = out.w, c_in = out.c;
  const Eigen::Index pad = (k - 1) / 2;
  for (Eigen::Index ic = 0; ic < c_in; ++ic) {
    float* dst = out.data.data() + ((sample * c_in + ic) * h) * w;
    for (Eigen::Index ky = 0; ky < k; ++ky) {
      for (Eigen::Index kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (ic * k + ky) * k + kx;
        const Eigen::Index dy = ky - pad, dx = kx - pad;
        const Eigen::Index y0 = std::max<Eigen::Index>(0, -dy);
        const Eigen::Index y1 = std::min(h, h - dy);
        const Eigen::Index x0 = std::max<Eigen::Index>(0, -dx);
        const Eigen::Index x1 = std::min(w, w - dx);
        const Eigen::Index stride = cols.rows();
        for (Eigen::Index y = y0; y < y1; ++y) {
          float* out_row = dst + (y + dy) * w + dx;
          const float* src = cols.data() + row;
          for (Eigen::Index x = x0; x < x1; ++x) {
            out_row[x] += src[(y * w + x) * stride];
          }
        }
      }
    }
  }
}

void check_conv_shapes(const Tensor& input, const ConvLayerParams& params) {
  require_shape(params.k % 2 == 1, "conv kernel size must be odd, got k=" +
                                       std::to_string(params.k));
  require_shape(input.c == params.c_in,
                "conv input channels " + std::to_string(input.c) +
                    " != kernel C_in " + std::to_string(params.c_in));
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvLayerParams& params) {
  check_conv_shapes(input, params);
  Tensor out(input.n, params.c_out, input.h, input.w);
  const auto wmat = weight_matrix(params);
  MatrixXf cols;
  for (Eigen::Index in = 0; in < input.n; ++in) {
    im2col(input, in, params.k, cols);
    Eigen::Map<RowMajorMatrixXf> omat(
        out.data.data() + (in * params.c_out) * input.h * input.w,
        params.c_out, input.h * input.w);
    omat.noalias() = wmat * cols;
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& cached_input,
                          const ConvLayerParams& params) {
  check_conv_shapes(cached_input, params);
  require_shape(grad_out.n == cached_input.n && grad_out.c == params.c_out &&
                    grad_out.h == cached_input.h && grad_out.w == cached_input.w,
                "conv grad_out shape " + grad_out.shape_str() +
                    " does not match forward output");
  ConvGrads g;
  g.grad_input = Tensor(cached_input.n, cached_input.c, cached_input.h, cached_input.w);
  const Eigen::Index ck = params.c_in * params.k * params.k;
  RowMajorMatrixXf gw = RowMajorMatrixXf::Zero(params.c_out, ck);
  const auto wmat = weight_matrix(params);
  MatrixXf cols, gcols;
  const Eigen::Index hw = cached_input.h * cached_input.w;
  for (Eigen::Index in = 0; in < grad_out.n; ++in) {
    Eigen::Map<const RowMajorMatrixXf> gmat(
        grad_out.data.data() + (in * params.c_out) * hw, params.c_out, hw);
    im2col(cached_input, in, params.k, cols);
    gw.noalias() += gmat * cols.transpose();
    gcols.noalias() = wmat.transpose() * gmat;
    col2im(gcols, in, params.k, g.grad_input);
  }
  g.grad_weights = Eigen::Map<const ArrayXf>(gw.data(), gw.size());
  return g;
}

BnTrainResult batchnorm_train_forward(const Tensor& input, const BnLayerParams& params) {
  require_shape(input.c == params.channels(),
                "batchnorm channels " + std::to_string(params.channels()) +
                    " != input channels " + std::to_string(input.c));
  require_shape(input.n * input.h * input.w >= 1, "batchnorm needs at least one element");
  BnTrainResult r;
  const Eigen::Index c = input.c;
  r.batch_mean.resize(c);
  r.batch_var.resize(c);
  // 64-bit accumulation for the reductions, independent of storage precision.
  for (Eigen::Index ic = 0; ic < c; ++ic) {
    double sum = 0.0, sumsq = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index in = 0; in < input.n; ++in) {
      auto p = input.plane(in, ic);
      sum += p.cast<double>().sum();
      sumsq += p.cast<double>().square().sum();
      count += p.size();
    }
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(0.0, sumsq / static_cast<double>(count) - mean * mean);
    r.batch_mean[ic] = static_cast<float>(mean);
    r.batch_var[ic] = static_cast<float>(var);
  }
  r.cache.xhat = Tensor(input.n, input.c, input.h, input.w);
  r.cache.inv_std.resize(c);
  r.cache.gamma = params.gamma;
  r.cache.valid = true;
  r.output = Tensor(input.n, input.c, input.h, input.w);
  for (Eigen::Index ic = 0; ic < c; ++ic) {
    const float inv_std =
        1.0f / std::sqrt(r.batch_var[ic] + params.eps);
    r.cache.inv_std[ic] = inv_std;
    for (Eigen::Index in = 0; in < input.n; ++in) {
      auto xh = r.cache.xhat.plane(in, ic);
      xh = (input.plane(in, ic) - r.batch_mean[ic]) * inv_std;
      r.output.plane(in, ic) = params.gamma[ic] * xh + params.beta[ic];
    }
  }
  return r;
}

BnGrads batchnorm_backward(const Tensor& grad_out, const BnCache& cache) {
  if (!cache.valid) throw std::invalid_argument("batchnorm_backward: missing cache");
  require_shape(grad_out.same_shape(cache.xhat),
                "batchnorm grad_out shape " + grad_out.shape_str() +
                    " != cached " + cache.xhat.shape_str());
  const Eigen::Index c = grad_out.c;
  BnGrads g;
  g.grad_input = Tensor(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
  g.grad_gamma.resize(c);
  g.grad_beta.resize(c);
  const double m = static_cast<double>(grad_out.n) * grad_out.h * grad_out.w;
  for (Eigen::Index ic = 0; ic < c; ++ic) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (Eigen::Index in = 0; in < grad_out.n; ++in) {
      auto go = grad_out.plane(in, ic);
      auto xh = cache.xhat.plane(in, ic);
      sum_g += go.cast<double>().sum();
      sum_gx += (go.cast<double>() * xh.cast<double>()).sum();
    }
    g.grad_beta[ic] = static_cast<float>(sum_g);
    g.grad_gamma[ic] = static_cast<float>(sum_gx);
    // d/dx of gamma * xhat + beta with xhat depending on batch mean/variance
    const double scale = cache.gamma[ic] * cache.inv_std[ic] / m;
    for (Eigen::Index in = 0; in < grad_out.n; ++in) {
      auto go = grad_out.plane(in, ic);
      auto xh = cache.xhat.plane(in, ic);
      g.grad_input.plane(in, ic) =
          static_cast<float>(scale) *
          (m * go - static_cast<float>(sum_g) - xh * static_cast<float>(sum_gx));
    }
  }
  return g;
}

Tensor batchnorm_eval_forward(const Tensor& input, const BnLayerParams& params,
                              const ArrayXf& mean, const ArrayXf& var) {
  require_shape(mean.size() == input.c && var.size() == input.c,
                "batchnorm stats length != channel count " + std::to_string(input.c));
  if ((var < 0.0f).any()) {
    throw std::invalid_argument("batchnorm_eval_forward: negative variance supplied");
  }
  Tensor out(input.n, input.c, input.h, input.w);
  for (Eigen::Index ic = 0; ic < input.c; ++ic) {
    const float inv_std = 1.0f / std::sqrt(var[ic] + params.eps);
    const float scale = params.gamma[ic] * inv_std;
    const float shift = params.beta[ic] - scale * mean[ic];
    for (Eigen::Index in = 0; in < input.n; ++in) {
      out.plane(in, ic) = scale * input.plane(in, ic) + shift;
    }
  }
  return out;
}

Tensor batchnorm_per_sample_forward(const Tensor& input, const BnLayerParams& params,
                                    const std::vector<ChannelStats>& stats) {
  require_shape(static_cast<Eigen::Index>(stats.size()) == input.n,
                "per-sample batchnorm: batch size " + std::to_string(input.n) +
                    " != stats count " + std::to_string(stats.size()));
  Tensor out(input.n, input.c, input.h, input.w);
  for (Eigen::Index in = 0; in < input.n; ++in) {
    const auto& s = stats[static_cast<std::size_t>(in)];
    require_shape(s.mean.size() == input.c && s.var.size() == input.c,
                  "per-sample batchnorm: stats channel mismatch");
    if ((s.var < 0.0f).any()) {
      throw std::invalid_argument("batchnorm_per_sample_forward: negative variance");
    }
    for (Eigen::Index ic = 0; ic < input.c; ++ic) {
      const float inv_std = 1.0f / std::sqrt(s.var[ic] + params.eps);
      const float scale = params.gamma[ic] * inv_std;
      const float shift = params.beta[ic] - scale * s.mean[ic];
      out.plane(in, ic) = scale * input.plane(in, ic) + shift;
    }
  }
  return out;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out(input.n, input.c, input.h, input.w);
  out.data = input.data.max(0.0f);
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& cached_input) {
  require_shape(grad_out.same_shape(cached_input),
                "relu grad_out shape " + grad_out.shape_str() + " != input " +
                    cached_input.shape_str());
  Tensor g(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
  g.data = (cached_input.data > 0.0f).select(grad_out.data, 0.0f);
  return g;
}

MseResult mse_loss(const Tensor& pred, const Tensor& target) {
  require_shape(pred.same_shape(target), "mse shapes differ: " + pred.shape_str() +
                                             " vs " + target.shape_str());
  MseResult r;
  const Eigen::Index count = pred.size();
  const ArrayXd diff = (pred.data - target.data).cast<double>();
  r.loss = diff.square().sum() / static_cast<double>(count);
  r.grad_pred = Tensor(pred.n, pred.c, pred.h, pred.w);
  r.grad_pred.data = (2.0 / static_cast<double>(count) * diff).cast<float>();
  return r;
}

void adam_step(ArrayXf& params, const ArrayXf& grads, AdamState& state, double lr) {
  require_shape(params.size() == grads.size() && params.size() == state.m.size(),
                "adam: parameter/gradient/state size mismatch");
  state.step_count += 1;
  const ArrayXd g = grads.cast<double>();
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * g;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * g.square();
  const double mc = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double vc = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  const ArrayXd update =
      lr * (state.m / mc) / ((state.v / vc).sqrt() + state.eps);
  params = (params.cast<double>() - update).cast<float>();
}

ArrayXf xavier_init(Eigen::Index size, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  ArrayXf out(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    out[i] = static_cast<float>(uniform(rng, -bound, bound));
  }
  return out;
}

Tensor xavier_init_conv(Eigen::Index c_out, Eigen::Index c_in, Eigen::Index k, Rng& rng) {
  Tensor t(c_out, c_in, k, k);
  t.data = xavier_init(t.size(), c_in * k * k, c_out * k * k, rng);
  return t;
}

}  // namespace mcbn
