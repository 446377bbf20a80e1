#include "mcbn/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace mcbn {

BatchStatsRecord StatsSets::record(Eigen::Index t) const {
  BatchStatsRecord rec;
  rec.reserve(layers.size());
  for (const auto& l : layers) rec.push_back(l[static_cast<std::size_t>(t)]);
  return rec;
}

std::vector<Tensor> draw_stat_batches(const std::vector<ImagePlane>& training_images,
                                      Eigen::Index T, const BatchSpec& spec, Rng& rng) {
  if (training_images.empty()) {
    throw std::invalid_argument("draw_stat_batches: no training images");
  }
  const Eigen::Index needed = T * spec.batch_size;
  const Eigen::Index num_images = static_cast<Eigen::Index>(training_images.size());
  const Eigen::Index per_image = (needed + num_images - 1) / num_images;
  for (const auto& img : training_images) {
    if (img.width < spec.patch_size || img.height < spec.patch_size) {
      throw std::invalid_argument(
          "draw_stat_batches: training image smaller than patch size; need " +
          std::to_string(T) + " batches of " + std::to_string(spec.batch_size) +
          " patches of " + std::to_string(spec.patch_size));
    }
  }
  // Random crops from every image, pooled and shuffled, then partitioned.
  std::vector<ImagePlane> pool;
  pool.reserve(per_image * num_images);
  for (const auto& img : training_images) {
    for (Eigen::Index i = 0; i < per_image; ++i) {
      const Eigen::Index x0 =
          static_cast<Eigen::Index>(uniform_index(rng, img.width - spec.patch_size + 1));
      const Eigen::Index y0 =
          static_cast<Eigen::Index>(uniform_index(rng, img.height - spec.patch_size + 1));
      ImagePlane p(spec.patch_size, spec.patch_size);
      for (Eigen::Index y = 0; y < spec.patch_size; ++y) {
        for (Eigen::Index x = 0; x < spec.patch_size; ++x) {
          p.at(y, x) = img.at(y0 + y, x0 + x);
        }
      }
      pool.push_back(std::move(p));
    }
  }
  if (static_cast<Eigen::Index>(pool.size()) < needed) {
    throw std::invalid_argument("draw_stat_batches: need " + std::to_string(needed) +
                                " patches, have " + std::to_string(pool.size()));
  }
  // Fisher-Yates with the shared generator.
  for (std::size_t i = pool.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i + 1));
    std::swap(pool[i], pool[j]);
  }
  std::vector<Tensor> batches;
  batches.reserve(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    Tensor b(spec.batch_size, 1, spec.patch_size, spec.patch_size);
    for (Eigen::Index i = 0; i < spec.batch_size; ++i) {
      b.plane(i, 0) = pool[static_cast<std::size_t>(t * spec.batch_size + i)].values;
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

StatsSets estimate_stats_sets(const ModelParams& params,
                              const std::vector<ImagePlane>& training_images,
                              Eigen::Index T, const BatchSpec& spec, Rng& rng) {
  if (T < 1) throw std::invalid_argument("estimate_stats_sets: T must be >= 1");
  const auto batches = draw_stat_batches(training_images, T, spec, rng);
  StatsSets out;
  out.T = T;
  out.layers.assign(static_cast<std::size_t>(params.cfg.depth - 1), {});
  for (auto& l : out.layers) l.reserve(T);
  for (const auto& batch : batches) {
    const auto fwd = forward_train(params, batch);
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
      out.layers[l].push_back(fwd.stats[l]);
    }
  }
  return out;
}

namespace {

ImagePlane tensor_slice_to_plane(const Tensor& t, Eigen::Index sample, bool clip) {
  ImagePlane p(t.w, t.h);
  p.values = t.plane(sample, 0);
  if (clip) p.values = p.values.min(1.0f).max(0.0f);
  return p;
}

McOutput aggregate_samples(std::vector<ImagePlane> samples) {
  McOutput out;
  out.T = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index w = samples[0].width, h = samples[0].height;
  out.mean_image = ImagePlane(w, h);
  out.variance_map = ImagePlane(w, h);
  ArrayXd sum = ArrayXd::Zero(w * h), sumsq = ArrayXd::Zero(w * h);
  for (const auto& s : samples) {
    sum += s.values.cast<double>();
    sumsq += s.values.cast<double>().square();
  }
  const double T = static_cast<double>(out.T);
  const ArrayXd mean = sum / T;
  out.mean_image.values = mean.cast<float>();
  out.variance_map.values = (sumsq / T - mean.square()).max(0.0).cast<float>();
  out.samples = std::move(samples);
  return out;
}

Tensor plane_to_batch(const ImagePlane& img, Eigen::Index copies) {
  Tensor t(copies, 1, img.height, img.width);
  for (Eigen::Index i = 0; i < copies; ++i) t.plane(i, 0) = img.values;
  return t;
}

}  // namespace

McOutput mc_infer_fast(const ModelParams& params, const ImagePlane& lr_image,
                       const StatsSets& stats, Eigen::Index T_use,
                       const McOptions& opts) {
  if (T_use < 1) throw std::invalid_argument("mc_infer_fast: T_use must be >= 1");
  if (T_use > stats.T) {
    throw std::invalid_argument("mc_infer_fast: T_use " + std::to_string(T_use) +
                                " exceeds available stats sets " + std::to_string(stats.T));
  }
  const Tensor batch = plane_to_batch(lr_image, T_use);
  std::vector<BatchStatsRecord> records;
  records.reserve(T_use);
  for (Eigen::Index t = 0; t < T_use; ++t) records.push_back(stats.record(t));
  const Tensor out = forward_eval_per_sample(params, batch, records);
  std::vector<ImagePlane> samples;
  samples.reserve(T_use);
  for (Eigen::Index t = 0; t < T_use; ++t) {
    samples.push_back(tensor_slice_to_plane(out, t, opts.clip_samples));
  }
  return aggregate_samples(std::move(samples));
}

McOutput mc_infer_naive(const ModelParams& params, const ImagePlane& lr_image,
                        const std::vector<ImagePlane>& training_images,
                        Eigen::Index T, const BatchSpec& spec, Rng& rng,
                        const McOptions& opts) {
  if (T < 1) throw std::invalid_argument("mc_infer_naive: T must be >= 1");
  const auto batches = draw_stat_batches(training_images, T, spec, rng);
  const Tensor input = plane_to_batch(lr_image, 1);
  std::vector<ImagePlane> samples;
  samples.reserve(T);
  for (const auto& batch : batches) {
    // Statistics come from the training-batch members only; the test image
    // is normalized with them in a separate pass.
    const auto fwd = forward_train(params, batch);
    const Tensor out = forward_eval_fixed(params, input, fwd.stats);
    samples.push_back(tensor_slice_to_plane(out, 0, opts.clip_samples));
  }
  return aggregate_samples(std::move(samples));
}

namespace {

// Viridis anchors, interpolated linearly; full table in matplotlib.
constexpr int kViridisAnchors = 16;
constexpr float kViridis[kViridisAnchors][3] = {
    {0.2670f, 0.0049f, 0.3294f}, {0.2823f, 0.1005f, 0.4224f},
    {0.2781f, 0.1803f, 0.4867f}, {0.2585f, 0.2525f, 0.5248f},
    {0.2296f, 0.3219f, 0.5456f}, {0.2007f, 0.3867f, 0.5545f},
    {0.1754f, 0.4493f, 0.5577f}, {0.1540f, 0.5110f, 0.5568f},
    {0.1360f, 0.5724f, 0.5496f}, {0.1280f, 0.6333f, 0.5303f},
    {0.1667f, 0.6925f, 0.4963f}, {0.2664f, 0.7486f, 0.4407f},
    {0.4120f, 0.7999f, 0.3571f}, {0.5859f, 0.8465f, 0.2494f},
    {0.7832f, 0.8793f, 0.1240f}, {0.9932f, 0.9062f, 0.1439f}};

void viridis(float v, float& r, float& g, float& b) {
  const float x = std::min(1.0f, std::max(0.0f, v)) * (kViridisAnchors - 1);
  const int i = std::min(kViridisAnchors - 2, static_cast<int>(x));
  const float f = x - static_cast<float>(i);
  r = kViridis[i][0] + f * (kViridis[i + 1][0] - kViridis[i][0]);
  g = kViridis[i][1] + f * (kViridis[i + 1][1] - kViridis[i][1]);
  b = kViridis[i][2] + f * (kViridis[i + 1][2] - kViridis[i][2]);
}

}  // namespace

RgbImage render_uncertainty_map(const ImagePlane& variance_map,
                                const std::string& sidecar_path) {
  const float lo = variance_map.values.minCoeff();
  const float hi = variance_map.values.maxCoeff();
  {
    std::ofstream os(sidecar_path);
    if (!os) throw std::runtime_error("cannot write sidecar: " + sidecar_path);
    os.precision(9);
    os << "min " << lo << "\nmax " << hi << "\n";
  }
  const float range = hi - lo;
  RgbImage out;
  out.r = ImagePlane(variance_map.width, variance_map.height);
  out.g = ImagePlane(variance_map.width, variance_map.height);
  out.b = ImagePlane(variance_map.width, variance_map.height);
  for (Eigen::Index i = 0; i < variance_map.values.size(); ++i) {
    const float t = range > 0.0f ? (variance_map.values[i] - lo) / range : 0.0f;
    viridis(t, out.r.values[i], out.g.values[i], out.b.values[i]);
  }
  return out;
}

Reconstruction reconstruct_full(const ModelParams& params, const RgbImage& interpolated_lr,
                                const StatsSets& stats, Eigen::Index T,
                                Eigen::Index boundary_crop, const McOptions& opts) {
  const ImagePlane y_in = rgb_to_y(interpolated_lr);
  const McOutput mc = mc_infer_fast(params, y_in, stats, T, opts);
  ImagePlane y_out = mc.mean_image;
  y_out.values = y_out.values.min(1.0f).max(0.0f);
  Reconstruction rec;
  RgbImage merged = y_to_rgb_merge(y_out, interpolated_lr);
  if (boundary_crop > 0) {
    merged.r = crop_boundary(merged.r, boundary_crop);
    merged.g = crop_boundary(merged.g, boundary_crop);
    merged.b = crop_boundary(merged.b, boundary_crop);
    rec.variance_map = crop_boundary(mc.variance_map, boundary_crop);
  } else {
    rec.variance_map = mc.variance_map;
  }
  rec.sr = merged;
  return rec;
}

// ---- stats file I/O ----

namespace {

constexpr char kStatsMagic[4] = {'M', 'C', 'B', 'N'};
constexpr std::uint16_t kStatsVersion = 1;

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

}  // namespace

void save_stats_sets(const StatsSets& stats, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open stats file for writing: " + path);
  os.write(kStatsMagic, 4);
  write_u16(os, kStatsVersion);
  write_u16(os, static_cast<std::uint16_t>(stats.layer_count()));
  write_u16(os, static_cast<std::uint16_t>(stats.T));
  for (const auto& layer : stats.layers) {
    const Eigen::Index channels = layer[0].mean.size();
    write_u16(os, static_cast<std::uint16_t>(channels));
    // T x C means (t-major), then T x C variances.
    for (const auto& s : layer) {
      os.write(reinterpret_cast<const char*>(s.mean.data()), channels * sizeof(float));
    }
    for (const auto& s : layer) {
      os.write(reinterpret_cast<const char*>(s.var.data()), channels * sizeof(float));
    }
  }
  if (!os) throw std::runtime_error("stats file write failed: " + path);
}

StatsSets load_stats_sets(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open stats file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(kStatsMagic, 4)) {
    throw std::runtime_error("bad stats file magic in " + path);
  }
  const std::uint16_t version = read_u16(is);
  if (version != kStatsVersion) {
    throw std::runtime_error("unsupported stats file version " + std::to_string(version));
  }
  const std::uint16_t layer_count = read_u16(is);
  StatsSets out;
  out.T = read_u16(is);
  out.layers.resize(layer_count);
  for (auto& layer : out.layers) {
    const std::uint16_t channels = read_u16(is);
    layer.assign(static_cast<std::size_t>(out.T), ChannelStats{ArrayXf(channels), ArrayXf(channels)});
    for (auto& s : layer) {
      is.read(reinterpret_cast<char*>(s.mean.data()), channels * sizeof(float));
    }
    for (auto& s : layer) {
      is.read(reinterpret_cast<char*>(s.var.data()), channels * sizeof(float));
    }
  }
  if (!is) throw std::runtime_error("truncated stats file: " + path);
  return out;
}

}  // namespace mcbn
