#include "retouch/colorlab.hpp"

#include <cmath>
#include <cstdint>

namespace retouch {

namespace {

// sRGB <-> linear transfer curve
double srgb_decode(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}
double srgb_encode(double c) {
  return c <= 0.0031308 ? c * 12.92 : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

constexpr double kXn = 0.95047, kYn = 1.00000, kZn = 1.08883;  // D65
constexpr double kDelta = 6.0 / 29.0;

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t)
                                      : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}
double lab_f_inv(double ft) {
  return ft > kDelta ? ft * ft * ft : 3.0 * kDelta * kDelta * (ft - 4.0 / 29.0);
}

}  // namespace

Lab srgb_to_lab(float r, float g, float b) {
  double rl = srgb_decode(r), gl = srgb_decode(g), bl = srgb_decode(b);
  double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
  Lab out;
  out.L = static_cast<float>(116.0 * fy - 16.0);
  out.a = static_cast<float>(500.0 * (fx - fy));
  out.b = static_cast<float>(200.0 * (fy - fz));
  return out;
}

std::array<float, 3> lab_to_srgb(const Lab& lab) {
  double fy = (lab.L + 16.0) / 116.0;
  double fx = fy + lab.a / 500.0;
  double fz = fy - lab.b / 200.0;
  double x = kXn * lab_f_inv(fx);
  double y = kYn * lab_f_inv(fy);
  double z = kZn * lab_f_inv(fz);
  double rl = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  double gl = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  double bl = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  auto clamp01 = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
  return {static_cast<float>(clamp01(srgb_encode(rl))),
          static_cast<float>(clamp01(srgb_encode(gl))),
          static_cast<float>(clamp01(srgb_encode(bl)))};
}

std::vector<Lab> srgb_to_lab_image(const ImageRGB& img, Exec exec) {
  std::vector<Lab> out(img.pixel_count());
  const float* d = img.data.data();
  par_for(static_cast<std::int64_t>(out.size()), exec, [&](std::int64_t i) {
    out[i] = srgb_to_lab(d[i * 3], d[i * 3 + 1], d[i * 3 + 2]);
  });
  return out;
}

namespace {

inline int bin_of(float value, float lo, float hi, int bins) {
  float t = (value - lo) / (hi - lo) * static_cast<float>(bins);
  int idx = static_cast<int>(t);
  if (idx < 0) idx = 0;
  if (idx >= bins) idx = bins - 1;
  return idx;
}

}  // namespace

ColorToneFeature color_tone_feature(const ImageRGB& img, Exec exec) {
  std::vector<Lab> lab = srgb_to_lab_image(img, exec);

  // Integer counts, binned serially: deterministic for any thread count.
  std::array<std::uint64_t, ColorToneFeature::kLBins> lc{};
  std::array<std::uint64_t, ColorToneFeature::kAbBins * ColorToneFeature::kAbBins> abc{};
  for (const Lab& p : lab) {
    lc[bin_of(p.L, 0.0f, 100.0f, ColorToneFeature::kLBins)]++;
    int ia = bin_of(p.a, -128.0f, 128.0f, ColorToneFeature::kAbBins);
    int ib = bin_of(p.b, -128.0f, 128.0f, ColorToneFeature::kAbBins);
    abc[ia * ColorToneFeature::kAbBins + ib]++;
  }

  ColorToneFeature f;
  const double n = static_cast<double>(lab.size());
  for (int i = 0; i < ColorToneFeature::kLBins; ++i)
    f.l_hist()[i] = static_cast<double>(lc[i]) / n;
  for (int i = 0; i < ColorToneFeature::kAbBins * ColorToneFeature::kAbBins; ++i)
    f.ab_hist()[i] = static_cast<double>(abc[i]) / n;
  return f;
}

double chi_square(const ColorToneFeature& h1, const ColorToneFeature& h2) {
  constexpr double eps = 1e-10;
  double d = 0.0;
  for (int i = 0; i < ColorToneFeature::kDim; ++i) {
    double diff = h1.v[i] - h2.v[i];
    d += diff * diff / (h1.v[i] + h2.v[i] + eps);
  }
  return d;
}

}  // namespace retouch
