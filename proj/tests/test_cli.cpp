#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcbn/commands.hpp"
#include "mcbn/network.hpp"
#include "mcbn/sampler.hpp"
#include "mcbn/synthetic.hpp"

using namespace mcbn;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("mcbn_cli_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

void write_synthetic_dataset(const std::string& dir, int count, int size,
                             std::uint64_t seed) {
  fs::create_directories(dir);
  Rng rng = make_rng(seed, 90);
  for (int i = 0; i < count; ++i) {
    const ImagePlane img = make_textured_image(size, size, rng);
    save_png_gray(img, dir + "/img" + std::to_string(i) + ".png");
  }
}

RunConfig desk_config(const TempDir& tmp) {
  RunConfig cfg;
  cfg.seed = 77;
  cfg.depth = 3;
  cfg.channels = 4;
  cfg.patch_size = 12;
  cfg.batch_size = 2;
  cfg.total_updates = 8;
  cfg.lr = 1e-3;
  cfg.validate_every = 4;
  cfg.val_patches_per_image = 2;
  cfg.scale = 2;
  cfg.mc_samples = 3;
  cfg.train_dir = tmp / "train";
  cfg.test_dir = tmp / "test";
  cfg.checkpoint = tmp / "model.mcsr";
  cfg.stats_file = tmp / "stats.mcbn";
  cfg.output_dir = tmp / "out";
  return cfg;
}

}  // namespace

TEST_CASE("config file loading and overrides") {
  TempDir tmp("config");
  const std::string path = tmp / "run.cfg";
  {
    std::ofstream os(path);
    os << "# a comment\n"
       << "seed = 123\n"
       << "[network]\n"
       << "depth = 5\n"
       << "channels = 16\n"
       << "[training]\n"
       << "lr = 0.0002   # inline comment\n"
       << "augment = false\n"
       << "[inference]\n"
       << "mc_samples = 7\n"
       << "[paths]\n"
       << "train_dir = /data/train\n";
  }
  RunConfig cfg = load_config(path);
  CHECK(cfg.seed == 123);
  CHECK(cfg.depth == 5);
  CHECK(cfg.channels == 16);
  CHECK(cfg.lr == doctest::Approx(2e-4));
  CHECK(cfg.augment == false);
  CHECK(cfg.mc_samples == 7);
  CHECK(cfg.train_dir == "/data/train");
  CHECK(cfg.kernel == 3);  // untouched default

  apply_override(cfg, "network.depth", "9");
  apply_override(cfg, "seed", "5");
  apply_override(cfg, "inference.var_floor", "1e-5");
  CHECK(cfg.depth == 9);
  CHECK(cfg.seed == 5);
  CHECK(cfg.var_floor == doctest::Approx(1e-5));
  CHECK_THROWS(apply_override(cfg, "network.nonsense", "1"));

  SUBCASE("serialized config text reloads identically") {
    const std::string round = tmp / "round.cfg";
    {
      std::ofstream os(round);
      os << config_to_text(cfg);
    }
    const RunConfig back = load_config(round);
    CHECK(config_to_map(back) == config_to_map(cfg));
  }
  SUBCASE("validation rejects bad values") {
    RunConfig bad = cfg;
    bad.scale = 1;
    CHECK_THROWS(validate_config(bad));
    bad = cfg;
    bad.kernel = 4;
    CHECK_THROWS(validate_config(bad));
    bad = cfg;
    bad.mc_samples = 0;
    CHECK_THROWS(validate_config(bad));
  }
}

TEST_CASE("train command: artifacts, manifest, byte-identical reruns") {
  TempDir tmp("train");
  write_synthetic_dataset(tmp / "train", 3, 32, 1);
  RunConfig cfg = desk_config(tmp);

  CHECK(run_command("train", cfg) == 0);
  CHECK(fs::exists(cfg.checkpoint));
  const ModelParams p = load_checkpoint(cfg.checkpoint);
  CHECK(p.cfg.depth == 3);
  CHECK(p.cfg.channels == 4);

  // loss log: header + one line per update
  std::ifstream f(cfg.output_dir + "/train_loss.csv");
  std::string line;
  int lines = 0;
  while (std::getline(f, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 9);
  CHECK(fs::exists(cfg.output_dir + "/val_loss.csv"));

  // manifest is itself a loadable config reproducing the run parameters
  const std::string manifest = cfg.output_dir + "/train_manifest.cfg";
  REQUIRE(fs::exists(manifest));
  const RunConfig replay = load_config(manifest);
  CHECK(replay.seed == cfg.seed);
  CHECK(replay.depth == cfg.depth);
  CHECK(replay.total_updates == cfg.total_updates);

  SUBCASE("a rerun with the same seed produces a byte-identical checkpoint") {
    RunConfig again = cfg;
    again.checkpoint = tmp / "model2.mcsr";
    again.output_dir = tmp / "out2";
    CHECK(run_command("train", again) == 0);
    CHECK(read_bytes(cfg.checkpoint) == read_bytes(again.checkpoint));
  }
  SUBCASE("a different seed produces a different checkpoint") {
    RunConfig other = cfg;
    other.seed = 78;
    other.checkpoint = tmp / "model3.mcsr";
    other.output_dir = tmp / "out3";
    CHECK(run_command("train", other) == 0);
    CHECK(read_bytes(cfg.checkpoint) != read_bytes(other.checkpoint));
  }
}

TEST_CASE("run_command maps usage errors to exit code 2") {
  TempDir tmp("errors");
  RunConfig cfg = desk_config(tmp);
  SUBCASE("missing training directory") {
    cfg.train_dir = tmp / "missing";
    CHECK(run_command("train", cfg) == 2);
  }
  SUBCASE("training images smaller than the patch size") {
    write_synthetic_dataset(tmp / "train", 2, 32, 2);
    cfg.patch_size = 64;
    CHECK(run_command("train", cfg) == 2);
  }
  SUBCASE("unknown command") {
    CHECK(run_command("frobnicate", cfg) == 2);
  }
  SUBCASE("estimate-stats without a checkpoint") {
    write_synthetic_dataset(tmp / "train", 2, 32, 3);
    CHECK(run_command("estimate-stats", cfg) == 2);
  }
  SUBCASE("invalid config value") {
    write_synthetic_dataset(tmp / "train", 2, 32, 4);
    cfg.scale = 0;
    CHECK(run_command("train", cfg) == 2);
  }
}

TEST_CASE("estimate-stats and super-resolve pipeline") {
  TempDir tmp("pipeline");
  write_synthetic_dataset(tmp / "train", 3, 32, 5);
  RunConfig cfg = desk_config(tmp);
  REQUIRE(run_command("train", cfg) == 0);

  REQUIRE(run_command("estimate-stats", cfg) == 0);
  REQUIRE(fs::exists(cfg.stats_file));
  const StatsSets stats = load_stats_sets(cfg.stats_file);
  CHECK(stats.T == 3);
  CHECK(stats.layer_count() == 2);

  SUBCASE("rerun writes a byte-identical stats file") {
    const std::string first = read_bytes(cfg.stats_file);
    REQUIRE(run_command("estimate-stats", cfg) == 0);
    CHECK(read_bytes(cfg.stats_file) == first);
  }

  SUBCASE("super-resolve writes the SR image and uncertainty artifacts") {
    // 14x14 gray input so the x2 output lands on a 28x28 grid
    Rng rng = make_rng(9, 91);
    const ImagePlane small = make_textured_image(14, 14, rng);
    const std::string input = tmp / "input.png";
    save_png_gray(small, input);

    REQUIRE(run_command("super-resolve", cfg, input) == 0);
    const std::string stem = cfg.output_dir + "/input";
    REQUIRE(fs::exists(stem + "_sr.png"));
    REQUIRE(fs::exists(stem + "_uncertainty.png"));
    REQUIRE(fs::exists(stem + "_uncertainty_range.txt"));
    REQUIRE(fs::exists(stem + "_variance.varm"));

    const RgbImage sr = load_png(stem + "_sr.png");
    CHECK(sr.width() == 28);
    CHECK(sr.height() == 28);
    CHECK(sr.is_gray);

    // the stored luminance must match an in-process fast MC pass up to
    // 8-bit quantization; start from the loaded PNG, as the command does
    const ModelParams params = load_checkpoint(cfg.checkpoint);
    const ImagePlane interp = bicubic_resize(rgb_to_y(load_png(input)), 28, 28);
    const McOutput mc = mc_infer_fast(params, interp, stats, cfg.mc_samples);
    const ArrayXf want = mc.mean_image.values.min(1.0f).max(0.0f);
    CHECK((sr.r.values - want).abs().maxCoeff() <= 1.0f / 510.0f + 1e-6f);

    // the variance grid round-trips through its binary format
    const std::string varm = read_bytes(stem + "_variance.varm");
    REQUIRE(varm.size() == 12 + 28 * 28 * 4);
    CHECK(varm.compare(0, 4, "VARM") == 0);

    SUBCASE("T = 1 renders a single-color uncertainty map") {
      RunConfig single = cfg;
      single.mc_samples = 1;
      single.output_dir = tmp / "out_t1";
      REQUIRE(run_command("super-resolve", single, input) == 0);
      const RgbImage umap = load_png(single.output_dir + "/input_uncertainty.png");
      CHECK((umap.r.values - umap.r.values[0]).abs().maxCoeff() == 0.0f);
      CHECK((umap.g.values - umap.g.values[0]).abs().maxCoeff() == 0.0f);
      CHECK((umap.b.values - umap.b.values[0]).abs().maxCoeff() == 0.0f);
    }
  }

  SUBCASE("requesting more samples than the stats file holds fails cleanly") {
    RunConfig more = cfg;
    more.mc_samples = 10;
    Rng rng = make_rng(9, 92);
    const std::string input = tmp / "input.png";
    save_png_gray(make_textured_image(14, 14, rng), input);
    CHECK(run_command("super-resolve", more, input) == 2);
  }
}

TEST_CASE("evaluate command") {
  TempDir tmp("evaluate");
  write_synthetic_dataset(tmp / "train", 3, 32, 6);
  write_synthetic_dataset(tmp / "test", 3, 28, 7);
  RunConfig cfg = desk_config(tmp);
  cfg.mc_samples = 5;

  SUBCASE("bypass mode scores the ground truth against itself") {
    EvaluateOptions opts;
    opts.bypass = true;
    REQUIRE(run_command("evaluate", cfg, "", opts) == 0);
    std::ifstream f(cfg.output_dir + "/metrics.csv");
    REQUIRE(f.good());
    std::string header, line, average;
    std::getline(f, header);
    int rows = 0;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      ++rows;
      if (line.rfind("average,", 0) == 0) average = line;
    }
    CHECK(rows == 4);  // 3 images + average
    REQUIRE(!average.empty());
    // columns: image,psnr_db,ssim,pll_sum,pll_per_pixel,crps_mean,...
    std::stringstream ss(average);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 8);
    CHECK(std::stod(cells[2]) == doctest::Approx(1.0).epsilon(1e-9));  // ssim
    CHECK(std::stod(cells[5]) < 1e-3);                                // crps near 0
    CHECK(std::stod(cells[6]) == doctest::Approx(0.0));               // zero variance
    CHECK(fs::exists(cfg.output_dir + "/uncertainty_psnr_scatter.csv"));
  }

  SUBCASE("real evaluation after train + estimate-stats") {
    REQUIRE(run_command("train", cfg) == 0);
    REQUIRE(run_command("estimate-stats", cfg) == 0);
    REQUIRE(run_command("evaluate", cfg) == 0);
    std::ifstream f(cfg.output_dir + "/metrics.csv");
    REQUIRE(f.good());
    std::string header, line, average;
    std::getline(f, header);
    while (std::getline(f, line)) {
      if (line.rfind("average,", 0) == 0) average = line;
    }
    REQUIRE(!average.empty());
    std::stringstream ss(average);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 8);
    // an 8-update smoke run only has to produce sane finite scores;
    // reconstruction quality is covered by the acceptance suite
    const double avg_psnr = std::stod(cells[1]);
    CHECK(std::isfinite(avg_psnr));
    CHECK(avg_psnr > 0.0);
    CHECK(avg_psnr < 100.0);
  }

  SUBCASE("sweep mode writes one aggregate row per T value") {
    REQUIRE(run_command("train", cfg) == 0);
    REQUIRE(run_command("estimate-stats", cfg) == 0);
    EvaluateOptions opts;
    opts.sweep_t = true;
    REQUIRE(run_command("evaluate", cfg, "", opts) == 0);
    std::ifstream f(cfg.output_dir + "/sweep_metrics.csv");
    REQUIRE(f.good());
    std::string line;
    std::getline(f, line);
    CHECK(line.rfind("T,", 0) == 0);
    std::vector<std::string> rows;
    while (std::getline(f, line))
      if (!line.empty()) rows.push_back(line);
    // mc_samples = 5, stats hold T = 5 -> sweep values 3 and 5
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].rfind("3,", 0) == 0);
    CHECK(rows[1].rfind("5,", 0) == 0);
  }
}

TEST_CASE("benchmark command writes timing rows") {
  TempDir tmp("benchmark");
  RunConfig cfg = desk_config(tmp);
  cfg.train_dir.clear();  // exercise the synthetic fallback
  cfg.bench_image_size = 32;
  cfg.bench_repeats = 1;
  cfg.bench_t_values = {2};

  REQUIRE(run_command("benchmark", cfg) == 0);
  std::ifstream f(cfg.output_dir + "/benchmark.csv");
  REQUIRE(f.good());
  std::string header, row;
  std::getline(f, header);
  CHECK(header == "T,naive_median_s,fast_median_s,speedup");
  REQUIRE(std::getline(f, row));
  std::stringstream ss(row);
  std::string cell;
  std::vector<std::string> cells;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  REQUIRE(cells.size() == 4);
  CHECK(cells[0] == "2");
  CHECK(std::stod(cells[1]) > 0.0);
  CHECK(std::stod(cells[2]) > 0.0);
  CHECK(std::stod(cells[3]) > 0.0);
}
