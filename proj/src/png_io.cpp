#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mcbn/image.hpp"

namespace mcbn {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

float byte_to_unit(unsigned char b) { return static_cast<float>(b) / 255.0f; }

// Round half up after clipping, per the documented quantization rule.
unsigned char unit_to_byte(float v) {
  const float c = std::min(1.0f, std::max(0.0f, v));
  return static_cast<unsigned char>(std::floor(c * 255.0f + 0.5f));
}

}  // namespace

RgbImage load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open PNG: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed to decode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);
  const bool gray_source =
      color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA;

  // Normalize everything to 8-bit RGB.
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (gray_source) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  std::vector<unsigned char> row(png_get_rowbytes(png, info));
  RgbImage out;
  out.r = ImagePlane(w, h);
  out.g = ImagePlane(w, h);
  out.b = ImagePlane(w, h);
  out.is_gray = gray_source;
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      out.r.at(y, x) = byte_to_unit(row[3 * x + 0]);
      out.g.at(y, x) = byte_to_unit(row[3 * x + 1]);
      out.b.at(y, x) = byte_to_unit(row[3 * x + 2]);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

namespace {

void write_png_impl(const std::string& path, png_uint_32 w, png_uint_32 h, int color_type,
                    const std::vector<unsigned char>& pixels, std::size_t row_bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open PNG for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to encode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * row_bytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void save_png(const RgbImage& image, const std::string& path) {
  const png_uint_32 w = static_cast<png_uint_32>(image.width());
  const png_uint_32 h = static_cast<png_uint_32>(image.height());
  std::vector<unsigned char> pixels(static_cast<std::size_t>(w) * h * 3);
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
      pixels[i + 0] = unit_to_byte(image.r.at(y, x));
      pixels[i + 1] = unit_to_byte(image.g.at(y, x));
      pixels[i + 2] = unit_to_byte(image.b.at(y, x));
    }
  }
  write_png_impl(path, w, h, PNG_COLOR_TYPE_RGB, pixels, static_cast<std::size_t>(w) * 3);
}

void save_png_gray(const ImagePlane& image, const std::string& path) {
  const png_uint_32 w = static_cast<png_uint_32>(image.width);
  const png_uint_32 h = static_cast<png_uint_32>(image.height);
  std::vector<unsigned char> pixels(static_cast<std::size_t>(w) * h);
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      pixels[static_cast<std::size_t>(y) * w + x] = unit_to_byte(image.at(y, x));
    }
  }
  write_png_impl(path, w, h, PNG_COLOR_TYPE_GRAY, pixels, w);
}

}  // namespace mcbn
