#include "retouch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "json.hpp"

namespace retouch {

double psnr(const ImageRGB& a, const ImageRGB& b) {
  if (!a.valid() || !b.valid()) throw ConfigError("psnr: invalid image");
  if (a.width != b.width || a.height != b.height)
    throw ConfigError("psnr: dimension mismatch");
  double sq = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(a.data.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_kernel() {
  static const std::vector<double> k = [] {
    std::vector<double> w(static_cast<std::size_t>(kWin) * kWin);
    const double sigma = 1.5;
    double total = 0;
    for (int y = 0; y < kWin; ++y)
      for (int x = 0; x < kWin; ++x) {
        const double dx = x - kWin / 2, dy = y - kWin / 2;
        const double v = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
        w[static_cast<std::size_t>(y) * kWin + x] = v;
        total += v;
      }
    for (double& v : w) v /= total;
    return w;
  }();
  return k;
}

}  // namespace

double ssim(const ImageRGB& a, const ImageRGB& b, Exec exec) {
  if (!a.valid() || !b.valid()) throw ConfigError("ssim: invalid image");
  if (a.width != b.width || a.height != b.height)
    throw ConfigError("ssim: dimension mismatch");
  if (a.width < kWin || a.height < kWin)
    throw ConfigError("ssim: image smaller than the " + std::to_string(kWin) + "x" +
                      std::to_string(kWin) + " window");
  const std::vector<double>& w = gaussian_kernel();
  const int ww = a.width - kWin + 1, wh = a.height - kWin + 1;
  const std::int64_t n_windows = static_cast<std::int64_t>(ww) * wh;
  // Window scores are written independently, then summed in fixed order.
  std::vector<double> scores(static_cast<std::size_t>(n_windows) * 3);
  par_for(n_windows, exec, [&](std::int64_t win) {
    const int wx = static_cast<int>(win % ww);
    const int wy = static_cast<int>(win / ww);
    for (int c = 0; c < 3; ++c) {
      double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
      for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
          const double wt = w[static_cast<std::size_t>(y) * kWin + x];
          const double va = a.px(wx + x, wy + y)[c];
          const double vb = b.px(wx + x, wy + y)[c];
          mu_a += wt * va;
          mu_b += wt * vb;
          aa += wt * va * va;
          bb += wt * vb * vb;
          ab += wt * va * vb;
        }
      }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      scores[static_cast<std::size_t>(win) * 3 + c] =
          ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
          ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
    }
  });
  double total = 0;
  for (double s : scores) total += s;
  return total / static_cast<double>(scores.size());
}

std::string fmt_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

namespace {
double mean_of(const std::vector<EvalRow>& rows, double EvalRow::* field) {
  if (rows.empty()) throw ConfigError("eval report: no rows");
  double s = 0;
  for (const auto& r : rows) s += r.*field;
  return s / static_cast<double>(rows.size());
}
}  // namespace

double EvalReport::mean_psnr() const { return mean_of(rows, &EvalRow::psnr); }
double EvalReport::mean_ssim() const { return mean_of(rows, &EvalRow::ssim); }

bool EvalReport::has_groups() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(),
                                      [](const EvalRow& r) { return r.group_id >= 0; });
}

std::vector<GroupMean> EvalReport::group_means() const {
  std::map<int, GroupMean> acc;
  for (const auto& r : rows) {
    GroupMean& g = acc[r.group_id];
    g.group_id = r.group_id;
    g.mean_psnr += r.psnr;
    g.mean_ssim += r.ssim;
    ++g.count;
  }
  std::vector<GroupMean> out;
  for (auto& [gid, g] : acc) {
    g.mean_psnr /= g.count;
    g.mean_ssim /= g.count;
    out.push_back(g);
  }
  return out;
}

double EvalReport::grouped_mean_psnr() const {
  const auto gm = group_means();
  double s = 0;
  for (const auto& g : gm) s += g.mean_psnr;
  return s / static_cast<double>(gm.size());
}

double EvalReport::grouped_mean_ssim() const {
  const auto gm = group_means();
  double s = 0;
  for (const auto& g : gm) s += g.mean_ssim;
  return s / static_cast<double>(gm.size());
}

void EvalReport::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("eval: cannot open " + path);
  f << "image_id,psnr,ssim\n";
  for (const auto& r : rows) f << r.id << "," << fmt_metric(r.psnr) << "," << fmt_metric(r.ssim) << "\n";
  if (!f) throw IoError("eval: write failed for " + path);
}

std::string EvalReport::summary_json() const {
  using nlohmann::json;
  auto num = [](double v) -> json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  json j{{"n", rows.size()}, {"mean_psnr", num(mean_psnr())}, {"mean_ssim", num(mean_ssim())}};
  if (has_groups()) {
    json groups = json::array();
    for (const auto& g : group_means())
      groups.push_back(json{{"group_id", g.group_id},
                            {"mean_psnr", num(g.mean_psnr)},
                            {"mean_ssim", num(g.mean_ssim)},
                            {"count", g.count}});
    j["groups"] = groups;
    j["grouped_mean_psnr"] = num(grouped_mean_psnr());
    j["grouped_mean_ssim"] = num(grouped_mean_ssim());
  }
  return j.dump(2);
}

}  // namespace retouch
