#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "retouch/common.hpp"
#include "retouch/image.hpp"

using namespace retouch;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path d = fs::temp_directory_path() / "retouch_imageio_test";
  fs::create_directories(d);
  return d;
}

// Deterministic gradient-with-noise test card exercising all 256 byte levels.
ImageRGB test_card(int w, int h) {
  ImageRGB img(w, h);
  Rng rng(99);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float* p = img.px(x, y);
      p[0] = static_cast<float>(x) / (w - 1);
      p[1] = static_cast<float>(y) / (h - 1);
      p[2] = static_cast<float>(rng.uniform());
    }
  return img;
}

// Quantize to the nearest 8-bit level, the round trip's fixed points.
ImageRGB quantized(const ImageRGB& img) {
  ImageRGB q = img;
  for (float& v : q.data)
    v = static_cast<float>(static_cast<int>(v * 255.0f + 0.5f)) / 255.0f;
  return q;
}

}  // namespace

TEST_CASE("png round trip is exact at 8-bit resolution") {
  const fs::path p = temp_dir() / "card.png";
  const ImageRGB img = quantized(test_card(33, 17));
  save_png(p.string(), img);
  const ImageRGB back = load_png(p.string());
  REQUIRE(back.width == 33);
  REQUIRE(back.height == 17);
  CHECK(back == img);
}

TEST_CASE("ppm round trip is exact at 8-bit resolution") {
  const fs::path p = temp_dir() / "card.ppm";
  const ImageRGB img = quantized(test_card(21, 40));
  save_ppm(p.string(), img);
  const ImageRGB back = load_ppm(p.string());
  REQUIRE(back.width == 21);
  REQUIRE(back.height == 40);
  CHECK(back == img);
}

TEST_CASE("png and ppm agree on the same image") {
  const fs::path d = temp_dir();
  const ImageRGB img = test_card(16, 16);
  save_image((d / "a.png").string(), img);
  save_image((d / "a.ppm").string(), img);
  CHECK(load_image((d / "a.png").string()) == load_image((d / "a.ppm").string()));
}

TEST_CASE("save clamps out-of-range values instead of wrapping") {
  const fs::path p = temp_dir() / "clamp.png";
  ImageRGB img(2, 1);
  img.data = {-0.5f, 1.5f, 0.5f, 2.0f, -1.0f, 1.0f};
  save_png(p.string(), img);
  const ImageRGB back = load_png(p.string());
  CHECK(back.data[0] == 0.0f);
  CHECK(back.data[1] == 1.0f);
  CHECK(back.data[3] == 1.0f);
  CHECK(back.data[4] == 0.0f);
}

TEST_CASE("byte-identical file for identical pixels") {
  const fs::path d = temp_dir();
  const ImageRGB img = test_card(24, 24);
  save_png((d / "r1.png").string(), img);
  save_png((d / "r2.png").string(), img);
  std::ifstream f1(d / "r1.png", std::ios::binary), f2(d / "r2.png", std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {});
  const std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  CHECK(!b1.empty());
}

TEST_CASE("crop copies the exact sub-rectangle") {
  const ImageRGB img = test_card(10, 8);
  const ImageRGB c = img.crop(3, 2, 4, 5);
  REQUIRE(c.width == 4);
  REQUIRE(c.height == 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 4; ++x)
      for (int ch = 0; ch < 3; ++ch) CHECK(c.px(x, y)[ch] == img.px(x + 3, y + 2)[ch]);

  CHECK_THROWS_AS(img.crop(7, 0, 4, 4), ConfigError);
  CHECK_THROWS_AS(img.crop(-1, 0, 2, 2), ConfigError);
  CHECK_THROWS_AS(img.crop(0, 0, 0, 1), ConfigError);
}

TEST_CASE("loading errors are reported, not crashed on") {
  CHECK_THROWS_AS(load_png("/nonexistent/dir/file.png"), IoError);
  CHECK_THROWS_AS(load_image("/tmp/file.bmp"), IoError);  // unsupported extension

  const fs::path bad = temp_dir() / "truncated.png";
  std::ofstream(bad) << "not a png at all";
  CHECK_THROWS_AS(load_png(bad.string()), IoError);
}

TEST_CASE("invalid images are rejected by save") {
  ImageRGB bad;
  bad.width = 4;
  bad.height = 4;
  bad.data.resize(7);  // wrong size
  CHECK(!bad.valid());
  CHECK_THROWS_AS(save_png((temp_dir() / "bad.png").string(), bad), ConfigError);
  CHECK_THROWS_AS(save_ppm((temp_dir() / "bad.ppm").string(), bad), ConfigError);

  // Out-of-range samples are fine: the 8-bit quantizer clamps, so raw model
  // outputs can be saved without a separate clamping pass.
  ImageRGB hot(2, 2, 1.5f);
  const fs::path hot_path = temp_dir() / "hot.png";
  save_png(hot_path.string(), hot);
  const ImageRGB back = load_png(hot_path.string());
  for (float v : back.data) CHECK(v == 1.0f);
}
