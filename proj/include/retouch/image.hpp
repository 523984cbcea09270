#pragma once

#include <string>
#include <vector>

namespace retouch {

/// H x W x 3 sRGB image, row-major, channel values in [0, 1].
struct ImageRGB {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // height * width * 3

  ImageRGB() = default;
  ImageRGB(int w, int h, float fill = 0.0f)
      : width(w), height(h),
        data(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }
  float* px(int x, int y) {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const float* px(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  bool valid() const;

  /// Aligned sub-rectangle copy. Throws ConfigError if out of bounds.
  ImageRGB crop(int x0, int y0, int w, int h) const;
};

bool operator==(const ImageRGB& a, const ImageRGB& b);

/// Dispatches on extension: .png or .ppm.
ImageRGB load_image(const std::string& path);
void save_image(const std::string& path, const ImageRGB& img);

ImageRGB load_png(const std::string& path);
void save_png(const std::string& path, const ImageRGB& img);
ImageRGB load_ppm(const std::string& path);
void save_ppm(const std::string& path, const ImageRGB& img);

}  // namespace retouch
