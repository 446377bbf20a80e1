#pragma once

#include <cmath>

#include "mcbn/image.hpp"
#include "mcbn/rng.hpp"

namespace mcbn {

// Deterministic textured test image: smooth sinusoidal background plus
// sharp-edged rectangles and lines. Sharp structure is what separates a
// trained reconstruction from plain bicubic interpolation.
inline ImagePlane make_textured_image(Eigen::Index width, Eigen::Index height, Rng& rng) {
  ImagePlane img(width, height);
  const double fx1 = uniform(rng, 0.02, 0.10), fy1 = uniform(rng, 0.02, 0.10);
  const double fx2 = uniform(rng, 0.10, 0.25), fy2 = uniform(rng, 0.10, 0.25);
  const double p1 = uniform(rng, 0.0, 6.28), p2 = uniform(rng, 0.0, 6.28);
  for (Eigen::Index y = 0; y < height; ++y) {
    for (Eigen::Index x = 0; x < width; ++x) {
      const double v = 0.5 + 0.18 * std::sin(fx1 * x + fy1 * y + p1) +
                       0.12 * std::sin(fx2 * x - fy2 * y + p2);
      img.at(y, x) = static_cast<float>(v);
    }
  }
  const int rects = 6 + static_cast<int>(uniform_index(rng, 5));
  for (int i = 0; i < rects; ++i) {
    const Eigen::Index rw = 4 + static_cast<Eigen::Index>(uniform_index(rng, width / 3));
    const Eigen::Index rh = 4 + static_cast<Eigen::Index>(uniform_index(rng, height / 3));
    const Eigen::Index x0 = static_cast<Eigen::Index>(uniform_index(rng, std::max<Eigen::Index>(1, width - rw)));
    const Eigen::Index y0 = static_cast<Eigen::Index>(uniform_index(rng, std::max<Eigen::Index>(1, height - rh)));
    const float level = static_cast<float>(uniform(rng, 0.1, 0.9));
    const float alpha = static_cast<float>(uniform(rng, 0.4, 1.0));
    for (Eigen::Index y = y0; y < std::min(height, y0 + rh); ++y) {
      for (Eigen::Index x = x0; x < std::min(width, x0 + rw); ++x) {
        img.at(y, x) = (1.0f - alpha) * img.at(y, x) + alpha * level;
      }
    }
  }
  const int lines = 4 + static_cast<int>(uniform_index(rng, 4));
  for (int i = 0; i < lines; ++i) {
    const bool horizontal = uniform01(rng) < 0.5;
    const Eigen::Index pos = static_cast<Eigen::Index>(
        uniform_index(rng, horizontal ? height : width));
    const float level = static_cast<float>(uniform(rng, 0.0, 1.0));
    const Eigen::Index extent = horizontal ? width : height;
    for (Eigen::Index t = 0; t < extent; ++t) {
      if (horizontal) img.at(pos, t) = level;
      else img.at(t, pos) = level;
    }
  }
  img.values = img.values.min(1.0f).max(0.0f);
  return img;
}

}  // namespace mcbn
