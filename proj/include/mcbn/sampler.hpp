#pragma once

#include <string>
#include <vector>

#include "mcbn/image.hpp"
#include "mcbn/network.hpp"

namespace mcbn {

// T stochastic parameter collections: per BN layer, per t, one per-channel
// (mean, variance) pair. One set generates one MC sample.
struct StatsSets {
  Eigen::Index T = 0;
  // layers[l].size() == T for every BN layer l
  std::vector<std::vector<ChannelStats>> layers;

  Eigen::Index layer_count() const { return static_cast<Eigen::Index>(layers.size()); }

  // The t-th stats record across all BN layers.
  BatchStatsRecord record(Eigen::Index t) const;
};

struct McOutput {
  std::vector<ImagePlane> samples;  // T reconstructions
  ImagePlane mean_image;            // per-pixel arithmetic mean
  ImagePlane variance_map;          // per-pixel population variance, >= 0
  Eigen::Index T = 0;
};

struct BatchSpec {
  Eigen::Index batch_size = 16;  // b
  Eigen::Index patch_size = 64;  // n
};

struct McOptions {
  bool clip_samples = true;  // clip each sample to [0,1] before aggregation
};

// The shared batch-draw sequence: random n x n crops from every training
// image, shuffled, partitioned into T batches of b. Both the stats estimator
// and the naive sampler consume exactly this sequence, which is what makes
// the two inference paths equivalent under a common seed.
std::vector<Tensor> draw_stat_batches(const std::vector<ImagePlane>& training_images,
                                      Eigen::Index T, const BatchSpec& spec, Rng& rng);

StatsSets estimate_stats_sets(const ModelParams& params,
                              const std::vector<ImagePlane>& training_images,
                              Eigen::Index T, const BatchSpec& spec, Rng& rng);

McOutput mc_infer_fast(const ModelParams& params, const ImagePlane& lr_image,
                       const StatsSets& stats, Eigen::Index T_use,
                       const McOptions& opts = {});

McOutput mc_infer_naive(const ModelParams& params, const ImagePlane& lr_image,
                        const std::vector<ImagePlane>& training_images,
                        Eigen::Index T, const BatchSpec& spec, Rng& rng,
                        const McOptions& opts = {});

// Min-max normalized variance rendered through a viridis lookup; the raw
// (min, max) of the map is written to `sidecar_path` so maps stay comparable.
RgbImage render_uncertainty_map(const ImagePlane& variance_map,
                                const std::string& sidecar_path);

struct Reconstruction {
  RgbImage sr;
  ImagePlane variance_map;
};

// Full-color reconstruction: luminance through the fast MC path, chroma
// carried over from the interpolated-LR input, then boundary cropping.
Reconstruction reconstruct_full(const ModelParams& params, const RgbImage& interpolated_lr,
                                const StatsSets& stats, Eigen::Index T,
                                Eigen::Index boundary_crop, const McOptions& opts = {});

// "MCBN" stats file, byte layout in docs/formats.md.
void save_stats_sets(const StatsSets& stats, const std::string& path);
StatsSets load_stats_sets(const std::string& path);

}  // namespace mcbn
