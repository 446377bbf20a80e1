#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mcbn {

using ArrayXf = Eigen::ArrayXf;
using ArrayXd = Eigen::ArrayXd;
using MatrixXf = Eigen::MatrixXf;

// Rank-4 array in NCHW order, float storage. Shapes are value types; all
// kernels below operate on flat Eigen arrays addressed through at().
struct Tensor {
  Eigen::Index n = 0, c = 0, h = 0, w = 0;
  ArrayXf data;

  Tensor() = default;
  Tensor(Eigen::Index n_, Eigen::Index c_, Eigen::Index h_, Eigen::Index w_)
      : n(n_), c(c_), h(h_), w(w_), data(ArrayXf::Zero(n_ * c_ * h_ * w_)) {}

  Eigen::Index size() const { return n * c * h * w; }

  float& at(Eigen::Index in, Eigen::Index ic, Eigen::Index iy, Eigen::Index ix) {
    return data[((in * c + ic) * h + iy) * w + ix];
  }
  float at(Eigen::Index in, Eigen::Index ic, Eigen::Index iy, Eigen::Index ix) const {
    return data[((in * c + ic) * h + iy) * w + ix];
  }

  // Contiguous H*W plane of one (sample, channel) pair.
  Eigen::Map<ArrayXf> plane(Eigen::Index in, Eigen::Index ic) {
    return Eigen::Map<ArrayXf>(data.data() + ((in * c + ic) * h) * w, h * w);
  }
  Eigen::Map<const ArrayXf> plane(Eigen::Index in, Eigen::Index ic) const {
    return Eigen::Map<const ArrayXf>(data.data() + ((in * c + ic) * h) * w, h * w);
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  std::string shape_str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }

  bool all_finite() const { return data.isFinite().all(); }
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values where finite ones are required (exit code 3 at the CLI).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

}  // namespace mcbn
