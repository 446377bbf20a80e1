#include "mcbn/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mcbn/metrics.hpp"
#include "mcbn/sampler.hpp"
#include "mcbn/synthetic.hpp"

namespace mcbn {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t dataset_hash(const std::string& dir) {
  if (dir.empty() || !fs::is_directory(dir)) return 0;
  std::vector<std::string> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) {
      entries.push_back(e.path().filename().string() + ":" +
                        std::to_string(e.file_size()));
    }
  }
  std::sort(entries.begin(), entries.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& e : entries) h = fnv1a(e, h);
  return h;
}

void write_manifest(const RunConfig& cfg, const std::string& command) {
  fs::create_directories(cfg.output_dir);
  const std::string path = cfg.output_dir + "/" + command + "_manifest.cfg";
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest: " + path);
  os << "# command: " << command << "\n";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(dataset_hash(cfg.train_dir)));
  os << "# train_dataset_hash: " << buf << "\n";
  os << config_to_text(cfg);
}

NetworkConfig network_config(const RunConfig& cfg) {
  NetworkConfig nc;
  nc.depth = cfg.depth;
  nc.channels = cfg.channels;
  nc.kernel = cfg.kernel;
  return nc;
}

struct TrainingSet {
  std::vector<ImagePlane> hr;  // luminance, cropped to a multiple of scale
  std::vector<ImagePlane> lr;  // interpolated-LR counterparts
};

TrainingSet load_training_set(const std::string& dir, int scale, int min_size) {
  if (dir.empty() || !fs::is_directory(dir)) {
    throw std::invalid_argument("training directory missing or not a directory: " + dir);
  }
  TrainingSet set;
  for (auto& y : load_luminance_dir(dir)) {
    ImagePlane hr = crop_to_multiple(y, scale);
    if (hr.width < min_size || hr.height < min_size) continue;
    set.lr.push_back(make_interpolated_lr(hr, scale));
    set.hr.push_back(std::move(hr));
  }
  if (set.hr.empty()) {
    throw std::invalid_argument("no usable PNG images (>= " + std::to_string(min_size) +
                                "px after cropping) in " + dir);
  }
  return set;
}

// Highest-variance n x n crops, top K per image, on a half-patch stride grid.
void build_validation_batch(const TrainingSet& set, int n, int top_k,
                            Tensor& val_lr, Tensor& val_hr) {
  struct Crop {
    double variance;
    const ImagePlane* hr;
    const ImagePlane* lr;
    Eigen::Index x0, y0;
  };
  std::vector<Crop> selected;
  const Eigen::Index stride = std::max<Eigen::Index>(1, n / 2);
  for (std::size_t i = 0; i < set.hr.size(); ++i) {
    const ImagePlane& hr = set.hr[i];
    std::vector<Crop> per_image;
    for (Eigen::Index y0 = 0; y0 + n <= hr.height; y0 += stride) {
      for (Eigen::Index x0 = 0; x0 + n <= hr.width; x0 += stride) {
        double sum = 0.0, sumsq = 0.0;
        for (Eigen::Index y = 0; y < n; ++y) {
          for (Eigen::Index x = 0; x < n; ++x) {
            const double v = hr.at(y0 + y, x0 + x);
            sum += v;
            sumsq += v * v;
          }
        }
        const double count = static_cast<double>(n) * n;
        const double mean = sum / count;
        per_image.push_back({sumsq / count - mean * mean, &hr, &set.lr[i], x0, y0});
      }
    }
    std::sort(per_image.begin(), per_image.end(),
              [](const Crop& a, const Crop& b) { return a.variance > b.variance; });
    for (std::size_t k = 0; k < per_image.size() && k < static_cast<std::size_t>(top_k); ++k) {
      selected.push_back(per_image[k]);
    }
  }
  const Eigen::Index count = static_cast<Eigen::Index>(selected.size());
  val_lr = Tensor(count, 1, n, n);
  val_hr = Tensor(count, 1, n, n);
  for (Eigen::Index i = 0; i < count; ++i) {
    const Crop& c = selected[static_cast<std::size_t>(i)];
    for (Eigen::Index y = 0; y < n; ++y) {
      for (Eigen::Index x = 0; x < n; ++x) {
        val_lr.at(i, 0, y, x) = c.lr->at(c.y0 + y, c.x0 + x);
        val_hr.at(i, 0, y, x) = c.hr->at(c.y0 + y, c.x0 + x);
      }
    }
  }
}

void write_loss_csv(const std::string& path, const std::vector<double>& values,
                    const char* header) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write loss log: " + path);
  os.precision(12);
  os << header << "\n";
  for (std::size_t i = 0; i < values.size(); ++i) os << i << ',' << values[i] << '\n';
}

std::vector<ImagePlane> training_lr_planes_or_synthetic(const RunConfig& cfg) {
  if (!cfg.train_dir.empty() && fs::is_directory(cfg.train_dir)) {
    return load_training_set(cfg.train_dir, cfg.scale, cfg.patch_size).lr;
  }
  // Synthetic fallback keeps the benchmark self-contained.
  Rng rng = make_rng(cfg.seed, kStreamBench + 100);
  std::vector<ImagePlane> out;
  const Eigen::Index size = std::max<Eigen::Index>(cfg.patch_size, 96);
  for (int i = 0; i < 8; ++i) {
    ImagePlane hr = crop_to_multiple(make_textured_image(size, size, rng), cfg.scale);
    out.push_back(make_interpolated_lr(hr, cfg.scale));
  }
  return out;
}

void write_varm(const ImagePlane& variance, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write variance grid: " + path);
  os.write("VARM", 4);
  auto write_u32 = [&os](std::uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  write_u32(static_cast<std::uint32_t>(variance.width));
  write_u32(static_cast<std::uint32_t>(variance.height));
  os.write(reinterpret_cast<const char*>(variance.values.data()),
           variance.values.size() * sizeof(float));
}

}  // namespace

void cmd_train(const RunConfig& cfg) {
  validate_config(cfg);
  const auto train_set = load_training_set(cfg.train_dir, cfg.scale, cfg.patch_size);
  TrainingSet val_set;
  if (!cfg.val_dir.empty() && fs::is_directory(cfg.val_dir)) {
    val_set = load_training_set(cfg.val_dir, cfg.scale, cfg.patch_size);
  } else {
    val_set = train_set;  // fall back to training images for validation crops
  }
  Tensor val_lr, val_hr;
  build_validation_batch(val_set, cfg.patch_size, cfg.val_patches_per_image, val_lr, val_hr);

  Rng init_rng = make_rng(cfg.seed, kStreamInit);
  ModelParams params = build_network(network_config(cfg), init_rng);

  Rng batch_rng = make_rng(cfg.seed, kStreamTraining);
  const Eigen::Index n = cfg.patch_size, b = cfg.batch_size;
  BatchProvider provider = [&](Eigen::Index, Tensor& lr, Tensor& hr) {
    lr = Tensor(b, 1, n, n);
    hr = Tensor(b, 1, n, n);
    for (Eigen::Index i = 0; i < b; ++i) {
      const std::size_t img =
          static_cast<std::size_t>(uniform_index(batch_rng, train_set.hr.size()));
      auto pairs = extract_patch_pairs(train_set.hr[img], train_set.lr[img], n, 1, batch_rng);
      PatchPair p = cfg.augment ? augment(pairs[0], batch_rng) : pairs[0];
      lr.plane(i, 0) = p.lr.values;
      hr.plane(i, 0) = p.hr.values;
    }
  };

  TrainSchedule schedule;
  schedule.lr_initial = cfg.lr;
  schedule.lr_halve_period = cfg.lr_halve_period;
  schedule.total_updates = cfg.total_updates;
  schedule.validate_every = cfg.validate_every;

  const auto t0 = std::chrono::steady_clock::now();
  TrainLog log = train_loop(params, schedule, provider, val_lr, val_hr);

  fs::create_directories(cfg.output_dir);
  save_checkpoint(params, cfg.checkpoint);
  write_loss_csv(cfg.output_dir + "/train_loss.csv", log.loss, "update,loss");
  write_loss_csv(cfg.output_dir + "/val_loss.csv", log.validation_loss, "index,loss");
  write_manifest(cfg, "train");
  std::cout << "trained " << cfg.total_updates << " updates in " << seconds_since(t0)
            << " s; best validation at update " << log.best_validation_update
            << "; checkpoint " << cfg.checkpoint << "\n";
}

void cmd_estimate_stats(const RunConfig& cfg) {
  validate_config(cfg);
  const ModelParams params = load_checkpoint(cfg.checkpoint);
  const auto lr_planes = load_training_set(cfg.train_dir, cfg.scale, cfg.patch_size).lr;
  BatchSpec spec;
  spec.batch_size = cfg.batch_size;
  spec.patch_size = cfg.patch_size;
  Rng rng = make_rng(cfg.seed, kStreamStats);
  const StatsSets stats = estimate_stats_sets(params, lr_planes, cfg.mc_samples, spec, rng);
  fs::create_directories(cfg.output_dir);
  save_stats_sets(stats, cfg.stats_file);
  write_manifest(cfg, "estimate_stats");
  std::cout << "stats: " << stats.layer_count() << " BN layers, T=" << stats.T
            << ", channels per layer";
  for (const auto& l : stats.layers) std::cout << ' ' << l[0].mean.size();
  std::cout << "\nwrote " << cfg.stats_file << "\n";
}

void cmd_super_resolve(const RunConfig& cfg, const std::string& input_image) {
  validate_config(cfg);
  const ModelParams params = load_checkpoint(cfg.checkpoint);
  const StatsSets stats = load_stats_sets(cfg.stats_file);
  const RgbImage lr = load_png(input_image);

  // Interpolate each channel up to the HR grid before the network sees it.
  RgbImage interp;
  const Eigen::Index out_w = lr.width() * cfg.scale, out_h = lr.height() * cfg.scale;
  interp.r = bicubic_resize(lr.r, out_w, out_h);
  interp.g = bicubic_resize(lr.g, out_w, out_h);
  interp.b = bicubic_resize(lr.b, out_w, out_h);
  interp.is_gray = lr.is_gray;

  McOptions opts;
  opts.clip_samples = cfg.clip_samples;
  const Reconstruction rec =
      reconstruct_full(params, interp, stats, cfg.mc_samples, /*boundary_crop=*/0, opts);

  fs::create_directories(cfg.output_dir);
  const std::string stem =
      cfg.output_dir + "/" + fs::path(input_image).stem().string();
  if (rec.sr.is_gray) {
    save_png_gray(rec.sr.r, stem + "_sr.png");
  } else {
    save_png(rec.sr, stem + "_sr.png");
  }
  const RgbImage umap =
      render_uncertainty_map(rec.variance_map, stem + "_uncertainty_range.txt");
  save_png(umap, stem + "_uncertainty.png");
  write_varm(rec.variance_map, stem + "_variance.varm");
  write_manifest(cfg, "super_resolve");
  std::cout << "wrote " << stem << "_sr.png (" << rec.sr.width() << "x" << rec.sr.height()
            << "), uncertainty map and variance grid\n";
}

namespace {

MetricsRow score_image(const std::string& name, const ImagePlane& hr_cropped,
                       const ImagePlane& mean_cropped, const ImagePlane& var_cropped,
                       double var_floor, double seconds) {
  MetricsRow row;
  row.image = name;
  row.psnr_db = psnr(mean_cropped, hr_cropped);
  row.ssim_val = ssim(mean_cropped, hr_cropped);
  PredictiveField field{mean_cropped, var_cropped, var_floor};
  const PllResult p = pll(field, hr_cropped);
  row.pll_sum = p.sum;
  row.pll_per_pixel = p.per_pixel;
  row.crps_mean = crps(field, hr_cropped);
  row.mean_uncertainty = var_cropped.values.cast<double>().mean();
  row.seconds = seconds;
  return row;
}

}  // namespace

void cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opts) {
  validate_config(cfg);
  if (cfg.test_dir.empty() || !fs::is_directory(cfg.test_dir)) {
    throw std::invalid_argument("test directory missing: " + cfg.test_dir);
  }
  ModelParams params;
  StatsSets stats;
  if (!opts.bypass) {
    params = load_checkpoint(cfg.checkpoint);
    stats = load_stats_sets(cfg.stats_file);
  }
  std::vector<std::string> names;
  std::vector<ImagePlane> hr_images;
  for (const auto& e : fs::directory_iterator(cfg.test_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") {
      names.push_back(e.path().stem().string());
      hr_images.push_back(crop_to_multiple(rgb_to_y(load_png(e.path().string())), cfg.scale));
    }
  }
  if (hr_images.empty()) {
    throw std::invalid_argument("no PNG test images in " + cfg.test_dir);
  }
  // sort by name for order-independent aggregation
  std::vector<std::size_t> order(names.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return names[a] < names[b]; });

  std::vector<Eigen::Index> t_values;
  if (opts.sweep_t) {
    for (int t : {3, 5, 10, 15, 25}) {
      if (t <= cfg.mc_samples && (opts.bypass || t <= stats.T)) t_values.push_back(t);
    }
  } else {
    t_values.push_back(cfg.mc_samples);
  }

  fs::create_directories(cfg.output_dir);
  std::ofstream sweep_os;
  if (opts.sweep_t) {
    sweep_os.open(cfg.output_dir + "/sweep_metrics.csv");
    sweep_os.precision(9);
    sweep_os << "T,psnr_db,ssim,pll_sum,pll_per_pixel,crps_mean,mean_uncertainty\n";
  }

  McOptions mc_opts;
  mc_opts.clip_samples = cfg.clip_samples;
  MetricsReport report;
  for (Eigen::Index T : t_values) {
    report.rows.clear();
    for (std::size_t idx : order) {
      const ImagePlane& hr = hr_images[idx];
      const auto t0 = std::chrono::steady_clock::now();
      ImagePlane mean_img, var_map;
      if (opts.bypass) {
        mean_img = hr;
        var_map = ImagePlane(hr.width, hr.height);
      } else {
        const ImagePlane lr = make_interpolated_lr(hr, cfg.scale);
        const McOutput mc = mc_infer_fast(params, lr, stats, T, mc_opts);
        mean_img = mc.mean_image;
        var_map = mc.variance_map;
      }
      const double secs = seconds_since(t0);
      report.rows.push_back(score_image(
          names[idx], crop_boundary(hr, cfg.scale), crop_boundary(mean_img, cfg.scale),
          crop_boundary(var_map, cfg.scale), cfg.var_floor, secs));
    }
    const MetricsRow agg = report.aggregate();
    if (opts.sweep_t) {
      sweep_os << T << ',' << agg.psnr_db << ',' << agg.ssim_val << ',' << agg.pll_sum
               << ',' << agg.pll_per_pixel << ',' << agg.crps_mean << ','
               << agg.mean_uncertainty << '\n';
    }
    std::cout << "T=" << T << " avg psnr=" << agg.psnr_db << " dB ssim=" << agg.ssim_val
              << " pll_sum=" << agg.pll_sum << " crps=" << agg.crps_mean << "\n";
  }
  write_metrics_csv(report, cfg.output_dir + "/metrics.csv");
  if (report.rows.size() >= 2) {
    const CorrelationReport corr = correlation_report(report);
    write_scatter_csv(corr, cfg.output_dir + "/uncertainty_psnr_scatter.csv");
    std::cout << "pearson(mean_uncertainty, psnr) = " << corr.pearson << "\n";
  }
  write_manifest(cfg, "evaluate");
}

void cmd_benchmark(const RunConfig& cfg) {
  validate_config(cfg);
  ModelParams params;
  if (fs::exists(cfg.checkpoint)) {
    params = load_checkpoint(cfg.checkpoint);
  } else {
    Rng rng = make_rng(cfg.seed, kStreamInit);
    params = build_network(network_config(cfg), rng);
  }
  const std::vector<ImagePlane> train_lr = training_lr_planes_or_synthetic(cfg);
  Rng img_rng = make_rng(cfg.seed, kStreamBench);
  const ImagePlane test_image =
      make_textured_image(cfg.bench_image_size, cfg.bench_image_size, img_rng);
  BatchSpec spec;
  spec.batch_size = cfg.batch_size;
  spec.patch_size = cfg.patch_size;
  McOptions opts;
  opts.clip_samples = cfg.clip_samples;

  fs::create_directories(cfg.output_dir);
  std::ofstream os(cfg.output_dir + "/benchmark.csv");
  os.precision(6);
  os << "T,naive_median_s,fast_median_s,speedup\n";
  std::cout << "T\tnaive_s\tfast_s\tspeedup\n";
  for (std::size_t ti = 0; ti < cfg.bench_t_values.size(); ++ti) {
    const Eigen::Index T = cfg.bench_t_values[ti];
    // Stats estimation is offline for the fast path and is not timed.
    Rng stats_rng = make_rng(cfg.seed, kStreamStats);
    const StatsSets stats = estimate_stats_sets(params, train_lr, T, spec, stats_rng);
    std::vector<double> naive_times, fast_times;
    for (int r = 0; r < cfg.bench_repeats; ++r) {
      Rng naive_rng = make_rng(cfg.seed, kStreamBench + 10 + 100 * ti + r);
      auto t0 = std::chrono::steady_clock::now();
      mc_infer_naive(params, test_image, train_lr, T, spec, naive_rng, opts);
      naive_times.push_back(seconds_since(t0));
      t0 = std::chrono::steady_clock::now();
      mc_infer_fast(params, test_image, stats, T, opts);
      fast_times.push_back(seconds_since(t0));
    }
    auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    const double nm = median(naive_times), fm = median(fast_times);
    os << T << ',' << nm << ',' << fm << ',' << nm / fm << '\n';
    std::cout << T << '\t' << nm << '\t' << fm << '\t' << nm / fm << '\n';
  }
  write_manifest(cfg, "benchmark");
}

int run_command(const std::string& name, const RunConfig& cfg,
                const std::string& input_image, const EvaluateOptions& eval_opts) {
  try {
    if (name == "train") cmd_train(cfg);
    else if (name == "estimate-stats") cmd_estimate_stats(cfg);
    else if (name == "super-resolve") cmd_super_resolve(cfg, input_image);
    else if (name == "evaluate") cmd_evaluate(cfg, eval_opts);
    else if (name == "benchmark") cmd_benchmark(cfg);
    else {
      std::cerr << "unknown command: " << name << "\n";
      return 2;
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace mcbn
