#pragma once

#include <string>
#include <vector>

#include "mcbn/rng.hpp"
#include "mcbn/tensor.hpp"

namespace mcbn {

// Single-channel image, values in [0,1], row-major.
struct ImagePlane {
  Eigen::Index width = 0, height = 0;
  ArrayXf values;

  ImagePlane() = default;
  ImagePlane(Eigen::Index w, Eigen::Index h)
      : width(w), height(h), values(ArrayXf::Zero(w * h)) {}

  float& at(Eigen::Index y, Eigen::Index x) { return values[y * width + x]; }
  float at(Eigen::Index y, Eigen::Index x) const { return values[y * width + x]; }
};

struct RgbImage {
  ImagePlane r, g, b;
  bool is_gray = false;  // loaded from a grayscale PNG

  Eigen::Index width() const { return r.width; }
  Eigen::Index height() const { return r.height; }
};

struct PatchPair {
  ImagePlane lr;  // pre-interpolated to the HR grid
  ImagePlane hr;
};

// Separable cubic convolution resize, Keys kernel a = -0.5, half-pixel
// centers, edge clamp. The kernel support is widened when minifying.
// Output clamped to [0,1].
ImagePlane bicubic_resize(const ImagePlane& img, Eigen::Index out_w, Eigen::Index out_h);

// Crop so both dimensions are divisible by `s` (top-left anchored).
ImagePlane crop_to_multiple(const ImagePlane& img, Eigen::Index s);

// Downscale by 1/s then upscale by s; output matches the (pre-cropped) input size.
ImagePlane make_interpolated_lr(const ImagePlane& hr, Eigen::Index scale);

std::vector<PatchPair> extract_patch_pairs(const ImagePlane& hr, const ImagePlane& lr,
                                           Eigen::Index n, Eigen::Index count, Rng& rng);

// Three independent 50% coin flips: horizontal flip, vertical flip, rot90.
// Both planes receive identical transforms.
PatchPair augment(const PatchPair& pair, Rng& rng);

ImagePlane flip_horizontal(const ImagePlane& img);
ImagePlane flip_vertical(const ImagePlane& img);
ImagePlane rotate90(const ImagePlane& img);  // counter-clockwise

// ITU-R BT.601 full-range luma: Y = 0.299 R + 0.587 G + 0.114 B.
ImagePlane rgb_to_y(const RgbImage& rgb);

// Replaces the luma of `chroma_source` with `y`; chroma (Cb, Cr) taken from
// the source unchanged. Output clamped to [0,1].
RgbImage y_to_rgb_merge(const ImagePlane& y, const RgbImage& chroma_source);

// Removes `s` pixels from each side; s = 0 is the identity.
ImagePlane crop_boundary(const ImagePlane& img, Eigen::Index s);

RgbImage load_png(const std::string& path);
void save_png(const RgbImage& image, const std::string& path);
void save_png_gray(const ImagePlane& image, const std::string& path);

// One relative path per line, '#' starts a comment.
std::vector<std::string> read_manifest(const std::string& path);

// Loads every PNG in a directory (sorted by filename) as luminance planes.
std::vector<ImagePlane> load_luminance_dir(const std::string& dir);

}  // namespace mcbn
