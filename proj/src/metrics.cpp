#include "mcbn/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mcbn {

namespace {

void require_same_size(const ImagePlane& a, const ImagePlane& b, const char* who) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument(std::string(who) + ": image sizes differ");
  }
}

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

double psnr(const ImagePlane& a, const ImagePlane& b, double peak) {
  require_same_size(a, b, "psnr");
  const double mse =
      (a.values.cast<double>() - b.values.cast<double>()).square().mean();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const ImagePlane& a, const ImagePlane& b) {
  require_same_size(a, b, "ssim");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;  // (K1 L)^2, L = 1
  constexpr double kC2 = 0.03 * 0.03;
  if (a.width < kWin || a.height < kWin) {
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  }
  double win[kWin][kWin];
  double wsum = 0.0;
  for (int y = 0; y < kWin; ++y) {
    for (int x = 0; x < kWin; ++x) {
      const double dy = y - (kWin - 1) / 2.0, dx = x - (kWin - 1) / 2.0;
      win[y][x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      wsum += win[y][x];
    }
  }
  for (auto& row : win)
    for (auto& v : row) v /= wsum;

  double total = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index y0 = 0; y0 + kWin <= a.height; ++y0) {
    for (Eigen::Index x0 = 0; x0 + kWin <= a.width; ++x0) {
      double ma = 0.0, mb = 0.0;
      for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
          ma += win[y][x] * a.at(y0 + y, x0 + x);
          mb += win[y][x] * b.at(y0 + y, x0 + x);
        }
      }
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
          const double da = a.at(y0 + y, x0 + x) - ma;
          const double db = b.at(y0 + y, x0 + x) - mb;
          va += win[y][x] * da * da;
          vb += win[y][x] * db * db;
          cov += win[y][x] * da * db;
        }
      }
      total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

PllResult pll(const PredictiveField& field, const ImagePlane& target) {
  require_same_size(field.mu, target, "pll");
  require_same_size(field.mu, field.sigma2, "pll");
  constexpr double kLog2Pi = 1.8378770664093454836;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < target.values.size(); ++i) {
    const double s2 = static_cast<double>(field.sigma2.values[i]) + field.var_floor;
    const double d = static_cast<double>(target.values[i]) - field.mu.values[i];
    sum += -0.5 * (kLog2Pi + std::log(s2) + d * d / s2);
  }
  PllResult r;
  r.sum = sum;
  r.per_pixel = sum / static_cast<double>(target.values.size());
  return r;
}

double crps_gaussian(double mu, double sigma2, double y) {
  const double sigma = std::sqrt(sigma2);
  const double z = (y - mu) / sigma;
  return sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) -
                  1.0 / std::sqrt(std::numbers::pi));
}

double crps(const PredictiveField& field, const ImagePlane& target) {
  require_same_size(field.mu, target, "crps");
  require_same_size(field.mu, field.sigma2, "crps");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < target.values.size(); ++i) {
    const double s2 = field.sigma2.values[i];
    const double d = static_cast<double>(target.values[i]) - field.mu.values[i];
    if (s2 <= 0.0) {
      // sigma -> 0 limit: CRPS of a point mass is the absolute error, so a
      // perfect zero-variance prediction scores exactly 0.
      sum += std::abs(d);
    } else {
      sum += crps_gaussian(field.mu.values[i], s2 + field.var_floor, target.values[i]);
    }
  }
  return sum / static_cast<double>(target.values.size());
}

double crps_numeric(double mu, double sigma2, double y) {
  const double sigma = std::sqrt(sigma2);
  const double step = sigma / 2000.0;
  const double lo = mu - 10.0 * sigma;
  const double hi = mu + 10.0 * sigma;
  // The integrand (F - H)^2 jumps at y; integrating the two smooth pieces
  // separately keeps the trapezoid rule second order.
  auto piece = [&](double a, double b, double h_val) {
    if (b <= a) return 0.0;
    const long n = std::max(1L, std::lround((b - a) / step));
    const double dx = (b - a) / static_cast<double>(n);
    auto f = [&](double x) {
      const double d = normal_cdf((x - mu) / sigma) - h_val;
      return d * d;
    };
    double sum = 0.5 * (f(a) + f(b));
    for (long i = 1; i < n; ++i) sum += f(a + dx * static_cast<double>(i));
    return sum * dx;
  };
  const double split = std::min(hi, std::max(lo, y));
  return piece(lo, split, 0.0) + piece(split, hi, 1.0);
}

MetricsRow MetricsReport::aggregate() const {
  MetricsRow agg;
  agg.image = "average";
  if (rows.empty()) return agg;
  for (const auto& r : rows) {
    agg.psnr_db += r.psnr_db;
    agg.ssim_val += r.ssim_val;
    agg.pll_sum += r.pll_sum;
    agg.pll_per_pixel += r.pll_per_pixel;
    agg.crps_mean += r.crps_mean;
    agg.mean_uncertainty += r.mean_uncertainty;
    agg.seconds += r.seconds;
  }
  const double n = static_cast<double>(rows.size());
  agg.psnr_db /= n;
  agg.ssim_val /= n;
  agg.pll_sum /= n;
  agg.pll_per_pixel /= n;
  agg.crps_mean /= n;
  agg.mean_uncertainty /= n;
  agg.seconds /= n;
  return agg;
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write metrics table: " + path);
  os.precision(9);
  os << "image,psnr_db,ssim,pll_sum,pll_per_pixel,crps_mean,mean_uncertainty,seconds\n";
  auto emit = [&os](const MetricsRow& r) {
    os << r.image << ',' << r.psnr_db << ',' << r.ssim_val << ',' << r.pll_sum << ','
       << r.pll_per_pixel << ',' << r.crps_mean << ',' << r.mean_uncertainty << ','
       << r.seconds << '\n';
  };
  for (const auto& r : report.rows) emit(r);
  emit(report.aggregate());
}

CorrelationReport correlation_report(const MetricsReport& report) {
  CorrelationReport out;
  const std::size_t n = report.rows.size();
  double mx = 0.0, my = 0.0;
  for (const auto& r : report.rows) {
    mx += r.mean_uncertainty;
    my += r.psnr_db;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& r : report.rows) {
    const double dx = r.mean_uncertainty - mx;
    const double dy = r.psnr_db - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (n < 2 || sxx == 0.0 || syy == 0.0) {
    out.pearson = std::numeric_limits<double>::quiet_NaN();
  } else {
    out.pearson = sxy / std::sqrt(sxx * syy);
  }
  // Scatter axes min-max normalized to [0,1].
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& r : report.rows) {
    xmin = std::min(xmin, r.mean_uncertainty);
    xmax = std::max(xmax, r.mean_uncertainty);
    ymin = std::min(ymin, r.psnr_db);
    ymax = std::max(ymax, r.psnr_db);
  }
  for (const auto& r : report.rows) {
    const double x = xmax > xmin ? (r.mean_uncertainty - xmin) / (xmax - xmin) : 0.0;
    const double y = ymax > ymin ? (r.psnr_db - ymin) / (ymax - ymin) : 0.0;
    out.scatter.emplace_back(x, y);
  }
  return out;
}

void write_scatter_csv(const CorrelationReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write scatter data: " + path);
  os.precision(9);
  os << "mean_uncertainty_norm,psnr_norm\n";
  for (const auto& [x, y] : report.scatter) os << x << ',' << y << '\n';
}

}  // namespace mcbn
