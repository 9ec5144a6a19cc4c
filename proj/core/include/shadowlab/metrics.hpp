#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "shadowlab/image.hpp"

namespace shadowlab {

// Reported for identical images, where the MSE is zero.
inline constexpr double kPsnrCap = 100.0;

// RMSE and PSNR are on the 0-255 scale.
double rmse(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b);
// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic
// range 1, valid-region mean, averaged over channels.
double ssim(const Image& a, const Image& b);

struct MetricRow {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  double rmse = 0.0;
  double psnr_y = 0.0;
  double ssim_y = 0.0;
  double rmse_y = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;  // sorted by id
  MetricRow mean;               // id = "mean"
  std::size_t count = 0;

  std::string to_csv() const;
};

// RGB metrics plus the same three on the Y channel of YCrCb. Grayscale inputs use
// the single channel for both.
MetricRow evaluate_pair(const Image& a, const Image& b, const std::string& id = "");
MetricReport aggregate(std::vector<MetricRow> rows);

// Pairs PNG files by file stem; unmatched ids on either side raise ValidationError.
MetricReport evaluate_dataset(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

}  // namespace shadowlab
