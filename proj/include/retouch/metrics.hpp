#pragma once

#include <string>
#include <vector>

#include "retouch/common.hpp"
#include "retouch/image.hpp"
#include "retouch/parallel.hpp"

namespace retouch {

/// Peak signal-to-noise ratio in dB with MAX = 1; MSE taken over all channels
/// in double. Identical images return +infinity (printed as "inf").
double psnr(const ImageRGB& a, const ImageRGB& b);

/// Structural similarity: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
/// C2 = 0.03^2, valid window positions only, per-channel then averaged.
/// Window results are reduced in fixed order, so the value is identical for
/// any thread count.
double ssim(const ImageRGB& a, const ImageRGB& b, Exec exec = Exec::Serial);

/// Formats a metric value for CSV/console ("inf" for the PSNR sentinel).
std::string fmt_metric(double v);

struct EvalRow {
  std::string id;
  int group_id = -1;
  double psnr = 0, ssim = 0;
};

struct GroupMean {
  int group_id = -1;
  double mean_psnr = 0, mean_ssim = 0;
  int count = 0;
};

/// Per-image rows plus aggregate means; when group ids are present the
/// grouped means average within each group first, then across groups.
struct EvalReport {
  std::vector<EvalRow> rows;

  double mean_psnr() const;
  double mean_ssim() const;
  bool has_groups() const;
  std::vector<GroupMean> group_means() const;
  double grouped_mean_psnr() const;
  double grouped_mean_ssim() const;

  void write_csv(const std::string& path) const;
  std::string summary_json() const;
};

}  // namespace retouch
