#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mcbn/sampler.hpp"
#include "oracles.hpp"

using namespace mcbn;

namespace {

NetworkConfig tiny_cfg() {
  NetworkConfig cfg;
  cfg.depth = 3;
  cfg.channels = 4;
  cfg.kernel = 3;
  return cfg;
}

std::vector<ImagePlane> training_set(Rng& rng, int count = 2, int size = 24) {
  std::vector<ImagePlane> imgs;
  for (int i = 0; i < count; ++i) imgs.push_back(oracle::random_plane(size, size, rng));
  return imgs;
}

}  // namespace

TEST_CASE("draw_stat_batches: T batches of b patches of size n x n") {
  Rng data_rng = make_rng(3, 60);
  const auto imgs = training_set(data_rng);
  BatchSpec spec;
  spec.batch_size = 4;
  spec.patch_size = 8;
  Rng rng = make_rng(7, 61);
  const auto batches = draw_stat_batches(imgs, 5, spec, rng);
  REQUIRE(batches.size() == 5);
  for (const auto& b : batches) {
    CHECK(b.n == 4);
    CHECK(b.c == 1);
    CHECK(b.h == 8);
    CHECK(b.w == 8);
    CHECK(b.data.minCoeff() >= 0.0f);
    CHECK(b.data.maxCoeff() <= 1.0f);
  }
  SUBCASE("patch larger than the training images is an error") {
    BatchSpec big = spec;
    big.patch_size = 64;
    Rng r = make_rng(7, 61);
    CHECK_THROWS(draw_stat_batches(imgs, 5, big, r));
  }
}

TEST_CASE("estimate_stats_sets: structure is (depth-1) layers x T x channels") {
  Rng data_rng = make_rng(5, 62);
  const auto imgs = training_set(data_rng);
  Rng init_rng = make_rng(11, 63);
  const ModelParams p = build_network(tiny_cfg(), init_rng);
  BatchSpec spec;
  spec.batch_size = 4;
  spec.patch_size = 8;
  Rng rng = make_rng(13, 64);
  const StatsSets s = estimate_stats_sets(p, imgs, 6, spec, rng);
  CHECK(s.T == 6);
  REQUIRE(s.layer_count() == 2);
  for (const auto& layer : s.layers) {
    REQUIRE(layer.size() == 6);
    for (const auto& cs : layer) {
      CHECK(cs.mean.size() == 4);
      CHECK(cs.var.size() == 4);
      CHECK((cs.var >= 0.0f).all());
    }
  }
  SUBCASE("a different seed changes the estimated stats") {
    Rng rng2 = make_rng(14, 64);
    const StatsSets s2 = estimate_stats_sets(p, imgs, 6, spec, rng2);
    CHECK((s.layers[0][0].mean - s2.layers[0][0].mean).abs().maxCoeff() > 0.0f);
  }
}

TEST_CASE("estimate_stats_sets: first-layer means match batch pixel means under an identity conv") {
  Rng data_rng = make_rng(17, 65);
  const auto imgs = training_set(data_rng);
  Rng init_rng = make_rng(19, 66);
  ModelParams p = build_network(tiny_cfg(), init_rng);
  // first conv: every output channel is the center-tap identity of the input
  p.conv[0].weights.setZero();
  for (Eigen::Index oc = 0; oc < 4; ++oc) p.conv[0].weights[oc * 9 + 4] = 1.0f;
  BatchSpec spec;
  spec.batch_size = 4;
  spec.patch_size = 8;
  Rng stats_rng = make_rng(23, 67);
  const StatsSets s = estimate_stats_sets(p, imgs, 3, spec, stats_rng);
  // redraw the identical batch sequence and compute the pixel means directly
  Rng redraw = make_rng(23, 67);
  const auto batches = draw_stat_batches(imgs, 3, spec, redraw);
  for (Eigen::Index t = 0; t < 3; ++t) {
    const double want = batches[t].data.cast<double>().mean();
    for (Eigen::Index c = 0; c < 4; ++c) {
      CHECK(std::abs(s.layers[0][t].mean[c] - want) < 1e-6);
    }
  }
}

TEST_CASE("mc_infer_fast") {
  Rng data_rng = make_rng(29, 68);
  const auto imgs = training_set(data_rng);
  Rng init_rng = make_rng(31, 69);
  const ModelParams p = build_network(tiny_cfg(), init_rng);
  BatchSpec spec;
  spec.batch_size = 4;
  spec.patch_size = 8;
  Rng stats_rng = make_rng(37, 70);
  const StatsSets s = estimate_stats_sets(p, imgs, 5, spec, stats_rng);
  const ImagePlane lr = oracle::random_plane(16, 16, data_rng);

  SUBCASE("T_use = 1 gives a zero variance map") {
    const McOutput out = mc_infer_fast(p, lr, s, 1);
    CHECK(out.T == 1);
    CHECK(out.variance_map.values.maxCoeff() == 0.0f);
    CHECK((out.mean_image.values - out.samples[0].values).abs().maxCoeff() == 0.0f);
  }
  SUBCASE("identical stats sets give a zero variance map") {
    StatsSets same;
    same.T = 3;
    same.layers.resize(2);
    for (Eigen::Index l = 0; l < 2; ++l)
      same.layers[l] = {s.layers[l][0], s.layers[l][0], s.layers[l][0]};
    const McOutput out = mc_infer_fast(p, lr, same, 3);
    CHECK(out.variance_map.values.maxCoeff() == 0.0f);
  }
  SUBCASE("mean and variance reproduce a direct recomputation from the samples") {
    const McOutput out = mc_infer_fast(p, lr, s, 5);
    REQUIRE(out.samples.size() == 5);
    for (Eigen::Index i = 0; i < lr.values.size(); ++i) {
      double sum = 0.0, sumsq = 0.0;
      for (const auto& sample : out.samples) {
        sum += sample.values[i];
        sumsq += static_cast<double>(sample.values[i]) * sample.values[i];
      }
      const double mean = sum / 5.0;
      const double var = std::max(0.0, sumsq / 5.0 - mean * mean);
      CHECK(std::abs(out.mean_image.values[i] - mean) < 1e-6);
      CHECK(std::abs(out.variance_map.values[i] - var) < 1e-6);
      CHECK(out.variance_map.values[i] >= 0.0f);
    }
  }
  SUBCASE("each sample matches a fixed-stats pass with that stats record") {
    const McOutput out = mc_infer_fast(p, lr, s, 3);
    Tensor in(1, 1, lr.height, lr.width);
    in.data = lr.values;
    for (Eigen::Index t = 0; t < 3; ++t) {
      Tensor want = forward_eval_fixed(p, in, s.record(t));
      want.data = want.data.min(1.0f).max(0.0f);
      CHECK((out.samples[t].values - want.data).abs().maxCoeff() < 1e-6f);
    }
  }
  SUBCASE("mean and variance are invariant to sample order") {
    StatsSets perm = s;
    for (auto& layer : perm.layers) std::swap(layer[0], layer[3]);
    const McOutput a = mc_infer_fast(p, lr, s, 5);
    const McOutput b = mc_infer_fast(p, lr, perm, 5);
    CHECK((a.mean_image.values - b.mean_image.values).abs().maxCoeff() < 1e-6f);
    CHECK((a.variance_map.values - b.variance_map.values).abs().maxCoeff() < 1e-6f);
  }
  SUBCASE("T_use beyond the stored T is an error") {
    CHECK_THROWS(mc_infer_fast(p, lr, s, 6));
  }
}

TEST_CASE("naive and fast inference agree under a shared seed") {
  Rng data_rng = make_rng(41, 71);
  const auto imgs = training_set(data_rng);
  Rng init_rng = make_rng(43, 72);
  const ModelParams p = build_network(tiny_cfg(), init_rng);
  BatchSpec spec;
  spec.batch_size = 4;
  spec.patch_size = 8;
  const ImagePlane lr = oracle::random_plane(16, 16, data_rng);

  Rng rng_fast = make_rng(47, 73);
  const StatsSets s = estimate_stats_sets(p, imgs, 4, spec, rng_fast);
  const McOutput fast = mc_infer_fast(p, lr, s, 4);
  Rng rng_naive = make_rng(47, 73);
  const McOutput naive = mc_infer_naive(p, lr, imgs, 4, spec, rng_naive);

  REQUIRE(naive.samples.size() == 4);
  for (Eigen::Index t = 0; t < 4; ++t) {
    CHECK((fast.samples[t].values - naive.samples[t].values).abs().maxCoeff() < 1e-5f);
  }
  CHECK((fast.mean_image.values - naive.mean_image.values).abs().maxCoeff() < 1e-5f);
  CHECK((fast.variance_map.values - naive.variance_map.values).abs().maxCoeff() < 1e-5f);
}

TEST_CASE("stats file round trip") {
  namespace fs = std::filesystem;
  const std::string path1 = (fs::temp_directory_path() / "mcbn_test_stats1.mcbn").string();
  const std::string path2 = (fs::temp_directory_path() / "mcbn_test_stats2.mcbn").string();
  Rng data_rng = make_rng(53, 74);
  const auto imgs = training_set(data_rng);
  Rng init_rng = make_rng(59, 75);
  const ModelParams p = build_network(tiny_cfg(), init_rng);
  BatchSpec spec;
  spec.batch_size = 4;
  spec.patch_size = 8;
  Rng rng = make_rng(61, 76);
  const StatsSets s = estimate_stats_sets(p, imgs, 3, spec, rng);
  save_stats_sets(s, path1);
  const StatsSets q = load_stats_sets(path1);
  CHECK(q.T == 3);
  REQUIRE(q.layer_count() == 2);
  for (Eigen::Index l = 0; l < 2; ++l) {
    for (Eigen::Index t = 0; t < 3; ++t) {
      CHECK((s.layers[l][t].mean - q.layers[l][t].mean).abs().maxCoeff() == 0.0f);
      CHECK((s.layers[l][t].var - q.layers[l][t].var).abs().maxCoeff() == 0.0f);
    }
  }
  // save of the loaded copy must be byte-identical
  save_stats_sets(q, path2);
  std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(!b1.empty());
  SUBCASE("bad magic is rejected") {
    std::ofstream os(path1, std::ios::binary | std::ios::trunc);
    os << "XXXX junk";
    os.close();
    CHECK_THROWS(load_stats_sets(path1));
  }
  std::remove(path1.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("render_uncertainty_map") {
  namespace fs = std::filesystem;
  const std::string sidecar = (fs::temp_directory_path() / "mcbn_test_range.txt").string();
  SUBCASE("constant variance renders a single color and an equal min/max sidecar") {
    ImagePlane var(6, 5);
    var.values.setConstant(0.25f);
    const RgbImage img = render_uncertainty_map(var, sidecar);
    CHECK(img.width() == 6);
    CHECK((img.r.values - img.r.values[0]).abs().maxCoeff() == 0.0f);
    CHECK((img.g.values - img.g.values[0]).abs().maxCoeff() == 0.0f);
    std::ifstream f(sidecar);
    std::string key;
    double mn = -1, mx = -1;
    f >> key >> mn >> key >> mx;
    CHECK(mn == doctest::Approx(0.25));
    CHECK(mx == doctest::Approx(0.25));
  }
  SUBCASE("a single hot pixel is the only one at the top of the scale") {
    ImagePlane var(5, 5);
    var.values.setZero();
    var.at(2, 3) = 1.0f;
    const RgbImage img = render_uncertainty_map(var, sidecar);
    const Eigen::Index hot = 2 * 5 + 3;
    for (Eigen::Index i = 0; i < 25; ++i) {
      if (i == hot) continue;
      CHECK(img.r.values[i] == img.r.values[(hot + 1) % 25]);
    }
    const float hot_diff = std::abs(img.r.values[hot] - img.r.values[0]) +
                           std::abs(img.g.values[hot] - img.g.values[0]) +
                           std::abs(img.b.values[hot] - img.b.values[0]);
    CHECK(hot_diff > 0.1f);
    std::ifstream f(sidecar);
    std::string key;
    double mn = -1, mx = -1;
    f >> key >> mn >> key >> mx;
    CHECK(mn == doctest::Approx(0.0));
    CHECK(mx == doctest::Approx(1.0));
  }
  std::remove(sidecar.c_str());
}

TEST_CASE("reconstruct_full: luminance equals the fast MC mean, chroma is carried over") {
  Rng data_rng = make_rng(67, 77);
  const auto imgs = training_set(data_rng);
  Rng init_rng = make_rng(71, 78);
  const ModelParams p = build_network(tiny_cfg(), init_rng);
  BatchSpec spec;
  spec.batch_size = 4;
  spec.patch_size = 8;
  Rng rng = make_rng(73, 79);
  const StatsSets s = estimate_stats_sets(p, imgs, 3, spec, rng);

  RgbImage lr;
  lr.r = oracle::random_plane(16, 16, data_rng);
  lr.g = lr.r;
  lr.b = lr.r;
  lr.is_gray = true;

  const Reconstruction rec = reconstruct_full(p, lr, s, 3, 0);
  CHECK(rec.sr.width() == 16);
  CHECK(rec.sr.height() == 16);
  CHECK(rec.variance_map.width == 16);
  const McOutput direct = mc_infer_fast(p, rgb_to_y(lr), s, 3);
  const ArrayXf want = direct.mean_image.values.min(1.0f).max(0.0f);
  CHECK((rgb_to_y(rec.sr).values - want).abs().maxCoeff() < 1e-5f);
  CHECK((rec.variance_map.values - direct.variance_map.values).abs().maxCoeff() < 1e-6f);
  SUBCASE("boundary crop shrinks both outputs") {
    const Reconstruction cropped = reconstruct_full(p, lr, s, 3, 2);
    CHECK(cropped.sr.width() == 12);
    CHECK(cropped.variance_map.width == 12);
  }
}
