#pragma once

#include <string>
#include <vector>

#include "mcbn/image.hpp"

namespace mcbn {

// Independent per-pixel Gaussian predictive distribution from MC statistics.
// var_floor keeps PLL and CRPS defined at zero sample variance.
struct PredictiveField {
  ImagePlane mu;
  ImagePlane sigma2;
  double var_floor = 1e-6;
};

// 10 log10(peak^2 / MSE); identical images return +infinity.
double psnr(const ImagePlane& a, const ImagePlane& b, double peak = 1.0);

// Windowed SSIM: 11x11 Gaussian window sigma = 1.5, K1 = 0.01, K2 = 0.03,
// L = 1, mean over valid (unpadded) window positions.
double ssim(const ImagePlane& a, const ImagePlane& b);

struct PllResult {
  double sum = 0.0;        // summed over pixels
  double per_pixel = 0.0;  // averaged over pixels
};

PllResult pll(const PredictiveField& field, const ImagePlane& target);

// Mean closed-form Gaussian CRPS over pixels.
double crps(const PredictiveField& field, const ImagePlane& target);

// Direct trapezoid integration of the CDF-vs-step integrand over mu +/- 10
// sigma, step sigma/2000. Oracle for the closed form.
double crps_numeric(double mu, double sigma2, double y);

double crps_gaussian(double mu, double sigma2, double y);  // scalar closed form

struct MetricsRow {
  std::string image;
  double psnr_db = 0.0;
  double ssim_val = 0.0;
  double pll_sum = 0.0;
  double pll_per_pixel = 0.0;
  double crps_mean = 0.0;
  double mean_uncertainty = 0.0;
  double seconds = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  MetricsRow aggregate() const;  // arithmetic means, image = "average"
};

void write_metrics_csv(const MetricsReport& report, const std::string& path);

struct CorrelationReport {
  double pearson = 0.0;  // NaN when undefined (fewer than 2 distinct points)
  // (mean_uncertainty, psnr) pairs, each axis min-max normalized to [0,1]
  std::vector<std::pair<double, double>> scatter;
};

CorrelationReport correlation_report(const MetricsReport& report);

void write_scatter_csv(const CorrelationReport& report, const std::string& path);

}  // namespace mcbn
