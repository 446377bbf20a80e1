#include "mcbn/image.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mcbn {

namespace {

// Keys cubic convolution kernel, a = -0.5 (Catmull-Rom).
double cubic_kernel(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

struct AxisWeights {
  // For each output index: first source index and normalized weights.
  std::vector<Eigen::Index> first;
  std::vector<std::vector<double>> weights;
};

// Half-pixel-center mapping with edge clamp. When minifying the kernel is
// stretched by 1/scale to act as an anti-aliasing filter.
AxisWeights compute_axis_weights(Eigen::Index in_n, Eigen::Index out_n) {
  AxisWeights aw;
  aw.first.resize(out_n);
  aw.weights.resize(out_n);
  const double scale = static_cast<double>(out_n) / static_cast<double>(in_n);
  const double filter_scale = std::min(1.0, scale);
  const double support = 2.0 / filter_scale;
  for (Eigen::Index i = 0; i < out_n; ++i) {
    const double src = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const Eigen::Index lo = static_cast<Eigen::Index>(std::ceil(src - support));
    const Eigen::Index hi = static_cast<Eigen::Index>(std::floor(src + support));
    std::vector<double> w;
    w.reserve(hi - lo + 1);
    double sum = 0.0;
    for (Eigen::Index j = lo; j <= hi; ++j) {
      const double v = cubic_kernel((src - static_cast<double>(j)) * filter_scale);
      w.push_back(v);
      sum += v;
    }
    for (double& v : w) v /= sum;
    aw.first[i] = lo;
    aw.weights[i] = std::move(w);
  }
  return aw;
}

Eigen::Index clamp_index(Eigen::Index j, Eigen::Index n) {
  return std::clamp<Eigen::Index>(j, 0, n - 1);
}

}  // namespace

ImagePlane bicubic_resize(const ImagePlane& img, Eigen::Index out_w, Eigen::Index out_h) {
  if (out_w < 1 || out_h < 1) {
    throw std::invalid_argument("bicubic_resize: output size must be >= 1x1");
  }
  const AxisWeights wx = compute_axis_weights(img.width, out_w);
  const AxisWeights wy = compute_axis_weights(img.height, out_h);

  // Horizontal pass at double precision, then vertical.
  std::vector<double> tmp(static_cast<std::size_t>(img.height) * out_w);
  for (Eigen::Index y = 0; y < img.height; ++y) {
    for (Eigen::Index x = 0; x < out_w; ++x) {
      double acc = 0.0;
      const auto& w = wx.weights[x];
      for (std::size_t t = 0; t < w.size(); ++t) {
        const Eigen::Index j = clamp_index(wx.first[x] + static_cast<Eigen::Index>(t), img.width);
        acc += w[t] * img.at(y, j);
      }
      tmp[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  ImagePlane out(out_w, out_h);
  for (Eigen::Index y = 0; y < out_h; ++y) {
    const auto& w = wy.weights[y];
    for (Eigen::Index x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < w.size(); ++t) {
        const Eigen::Index j = clamp_index(wy.first[y] + static_cast<Eigen::Index>(t), img.height);
        acc += w[t] * tmp[static_cast<std::size_t>(j) * out_w + x];
      }
      out.at(y, x) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  }
  return out;
}

ImagePlane crop_to_multiple(const ImagePlane& img, Eigen::Index s) {
  const Eigen::Index w = (img.width / s) * s;
  const Eigen::Index h = (img.height / s) * s;
  if (w == img.width && h == img.height) return img;
  ImagePlane out(w, h);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) out.at(y, x) = img.at(y, x);
  }
  return out;
}

ImagePlane make_interpolated_lr(const ImagePlane& hr, Eigen::Index scale) {
  if (scale < 1) throw std::invalid_argument("make_interpolated_lr: scale must be >= 1");
  if (scale == 1) return hr;
  if (hr.width % scale != 0 || hr.height % scale != 0) {
    throw std::invalid_argument("make_interpolated_lr: dimensions must be divisible by scale");
  }
  ImagePlane down = bicubic_resize(hr, hr.width / scale, hr.height / scale);
  return bicubic_resize(down, hr.width, hr.height);
}

std::vector<PatchPair> extract_patch_pairs(const ImagePlane& hr, const ImagePlane& lr,
                                           Eigen::Index n, Eigen::Index count, Rng& rng) {
  if (hr.width != lr.width || hr.height != lr.height) {
    throw std::invalid_argument("extract_patch_pairs: plane sizes differ");
  }
  if (hr.width < n || hr.height < n) {
    throw std::invalid_argument("extract_patch_pairs: image smaller than patch size");
  }
  std::vector<PatchPair> out;
  out.reserve(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::Index x0 = static_cast<Eigen::Index>(uniform_index(rng, hr.width - n + 1));
    const Eigen::Index y0 = static_cast<Eigen::Index>(uniform_index(rng, hr.height - n + 1));
    PatchPair p;
    p.lr = ImagePlane(n, n);
    p.hr = ImagePlane(n, n);
    for (Eigen::Index y = 0; y < n; ++y) {
      for (Eigen::Index x = 0; x < n; ++x) {
        p.lr.at(y, x) = lr.at(y0 + y, x0 + x);
        p.hr.at(y, x) = hr.at(y0 + y, x0 + x);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

ImagePlane flip_horizontal(const ImagePlane& img) {
  ImagePlane out(img.width, img.height);
  for (Eigen::Index y = 0; y < img.height; ++y) {
    for (Eigen::Index x = 0; x < img.width; ++x) {
      out.at(y, x) = img.at(y, img.width - 1 - x);
    }
  }
  return out;
}

ImagePlane flip_vertical(const ImagePlane& img) {
  ImagePlane out(img.width, img.height);
  for (Eigen::Index y = 0; y < img.height; ++y) {
    for (Eigen::Index x = 0; x < img.width; ++x) {
      out.at(y, x) = img.at(img.height - 1 - y, x);
    }
  }
  return out;
}

ImagePlane rotate90(const ImagePlane& img) {
  ImagePlane out(img.height, img.width);
  for (Eigen::Index y = 0; y < img.height; ++y) {
    for (Eigen::Index x = 0; x < img.width; ++x) {
      out.at(img.width - 1 - x, y) = img.at(y, x);
    }
  }
  return out;
}

PatchPair augment(const PatchPair& pair, Rng& rng) {
  PatchPair out = pair;
  // Coin order is part of the reproducibility contract: hflip, vflip, rot90.
  const bool do_h = uniform01(rng) < 0.5;
  const bool do_v = uniform01(rng) < 0.5;
  const bool do_r = uniform01(rng) < 0.5;
  if (do_h) {
    out.lr = flip_horizontal(out.lr);
    out.hr = flip_horizontal(out.hr);
  }
  if (do_v) {
    out.lr = flip_vertical(out.lr);
    out.hr = flip_vertical(out.hr);
  }
  if (do_r) {
    out.lr = rotate90(out.lr);
    out.hr = rotate90(out.hr);
  }
  return out;
}

ImagePlane rgb_to_y(const RgbImage& rgb) {
  ImagePlane y(rgb.width(), rgb.height());
  y.values = (0.299f * rgb.r.values + 0.587f * rgb.g.values + 0.114f * rgb.b.values)
                 .min(1.0f).max(0.0f);
  return y;
}

RgbImage y_to_rgb_merge(const ImagePlane& y, const RgbImage& chroma_source) {
  if (y.width != chroma_source.width() || y.height != chroma_source.height()) {
    throw std::invalid_argument("y_to_rgb_merge: plane sizes differ");
  }
  if (chroma_source.is_gray) {
    RgbImage out;
    out.r = y;
    out.g = y;
    out.b = y;
    out.is_gray = true;
    return out;
  }
  // BT.601 full-range: Cb = (B - Y) / 1.772, Cr = (R - Y) / 1.402.
  RgbImage out;
  out.r = ImagePlane(y.width, y.height);
  out.g = ImagePlane(y.width, y.height);
  out.b = ImagePlane(y.width, y.height);
  const ImagePlane src_y = rgb_to_y(chroma_source);
  const ArrayXf cb = (chroma_source.b.values - src_y.values) / 1.772f;
  const ArrayXf cr = (chroma_source.r.values - src_y.values) / 1.402f;
  out.r.values = (y.values + 1.402f * cr).min(1.0f).max(0.0f);
  out.b.values = (y.values + 1.772f * cb).min(1.0f).max(0.0f);
  // G from the luma identity: Y = 0.299 R + 0.587 G + 0.114 B.
  out.g.values = ((y.values - 0.299f * (y.values + 1.402f * cr) -
                   0.114f * (y.values + 1.772f * cb)) / 0.587f)
                     .min(1.0f).max(0.0f);
  return out;
}

ImagePlane crop_boundary(const ImagePlane& img, Eigen::Index s) {
  if (s == 0) return img;
  if (img.width <= 2 * s || img.height <= 2 * s) {
    throw std::invalid_argument("crop_boundary: image too small for crop " + std::to_string(s));
  }
  ImagePlane out(img.width - 2 * s, img.height - 2 * s);
  for (Eigen::Index y = 0; y < out.height; ++y) {
    for (Eigen::Index x = 0; x < out.width; ++x) {
      out.at(y, x) = img.at(y + s, x + s);
    }
  }
  return out;
}

std::vector<std::string> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

std::vector<ImagePlane> load_luminance_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("not a directory: " + dir);
  }
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") {
      paths.push_back(e.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ImagePlane> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(rgb_to_y(load_png(p)));
  return out;
}

}  // namespace mcbn
