#pragma once

#include <array>
#include <vector>

#include "retouch/image.hpp"
#include "retouch/parallel.hpp"

namespace retouch {

/// CIELAB pixel, D65 white point. L in [0,100]; a,b clamped to [-128,127]
/// before histogram binning.
struct Lab {
  float L = 0, a = 0, b = 0;
};

Lab srgb_to_lab(float r, float g, float b);
std::array<float, 3> lab_to_srgb(const Lab& lab);

/// Per-pixel conversion of a whole image.
std::vector<Lab> srgb_to_lab_image(const ImageRGB& img, Exec exec = Exec::Parallel);

/// 272-D color-tone descriptor: 16-bin L histogram over [0,100] followed by
/// a 16x16 joint (a,b) histogram over [-128,127]^2, each part L1-normalized
/// independently.
struct ColorToneFeature {
  static constexpr int kLBins = 16;
  static constexpr int kAbBins = 16;
  static constexpr int kDim = kLBins + kAbBins * kAbBins;  // 272

  std::array<double, kDim> v{};

  double* l_hist() { return v.data(); }
  const double* l_hist() const { return v.data(); }
  double* ab_hist() { return v.data() + kLBins; }
  const double* ab_hist() const { return v.data() + kLBins; }
};

ColorToneFeature color_tone_feature(const ImageRGB& img, Exec exec = Exec::Parallel);

/// Chi-square histogram distance: sum (h1-h2)^2 / (h1+h2+eps), eps = 1e-10.
double chi_square(const ColorToneFeature& h1, const ColorToneFeature& h2);

}  // namespace retouch
