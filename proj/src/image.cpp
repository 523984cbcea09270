#include "retouch/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "retouch/common.hpp"

namespace retouch {

bool ImageRGB::valid() const {
  if (width < 1 || height < 1) return false;
  if (data.size() != static_cast<std::size_t>(width) * height * 3) return false;
  for (float v : data) {
    if (!(v >= 0.0f && v <= 1.0f)) return false;  // catches NaN too
  }
  return true;
}

ImageRGB ImageRGB::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > width || y0 + h > height)
    throw ConfigError("crop rectangle out of bounds");
  ImageRGB out(w, h);
  for (int y = 0; y < h; ++y) {
    std::memcpy(out.px(0, y), px(x0, y0 + y),
                static_cast<std::size_t>(w) * 3 * sizeof(float));
  }
  return out;
}

bool operator==(const ImageRGB& a, const ImageRGB& b) {
  return a.width == b.width && a.height == b.height && a.data == b.data;
}

namespace {

unsigned char to_byte(float v) {
  float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<unsigned char>(std::lround(c * 255.0f));
}

// Savers tolerate out-of-range samples (to_byte clamps) but must reject a
// buffer that disagrees with the declared dimensions before indexing into it.
bool shape_ok(const ImageRGB& img) {
  return img.width >= 1 && img.height >= 1 &&
         img.data.size() == static_cast<std::size_t>(img.width) * img.height * 3;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports failures via longjmp, which must not cross frames holding
// C++ objects. These helpers keep the jump target in a frame whose only
// state is unmodified parameters; the caller owns every C++ object and all
// buffer updates go through pointers (plain memory writes survive the jump).
bool png_read_all(png_structp png, png_infop info, std::FILE* f, png_uint_32* w,
                  png_uint_32* h, std::vector<unsigned char>* buf,
                  std::vector<png_bytep>* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_read_info(png, info);

  *w = png_get_image_width(png, info);
  *h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  buf->resize(static_cast<std::size_t>(*w) * *h * 3);
  rows->resize(*h);
  for (png_uint_32 y = 0; y < *h; ++y)
    (*rows)[y] = buf->data() + static_cast<std::size_t>(y) * *w * 3;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  return true;
}

bool png_write_all(png_structp png, png_infop info, std::FILE* f, int w, int h,
                   png_bytep* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

ImageRGB load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  png_uint_32 w = 0;
  png_uint_32 h = 0;
  std::vector<unsigned char> buf;
  std::vector<png_bytep> rows;
  const bool ok = png_read_all(png, info, fp.get(), &w, &h, &buf, &rows);
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) throw IoError("failed to decode PNG " + path);

  ImageRGB img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < buf.size(); ++i)
    img.data[i] = static_cast<float>(buf[i]) / 255.0f;
  return img;
}

void save_png(const std::string& path, const ImageRGB& img) {
  if (!shape_ok(img))
    throw ConfigError("cannot save image whose buffer does not match its dimensions");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path + " for writing");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<unsigned char> buf(img.pixel_count() * 3);
  std::vector<png_bytep> rows(img.height);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(img.data[i]);
  for (int y = 0; y < img.height; ++y)
    rows[y] = buf.data() + static_cast<std::size_t>(y) * img.width * 3;
  const bool ok = png_write_all(png, info, fp.get(), img.width, img.height, rows.data());
  png_destroy_write_struct(&png, &info);
  if (!ok) throw IoError("failed to encode PNG " + path);
}

ImageRGB load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw IoError(path + ": not a binary PPM (P6)");

  auto next_int = [&in, &path]() {
    // skip whitespace and '#' comments
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    int v = -1;
    in >> v;
    if (!in || v < 0) throw IoError(path + ": malformed PPM header");
    return v;
  };
  int w = next_int();
  int h = next_int();
  int maxval = next_int();
  if (maxval != 255) throw IoError(path + ": only maxval 255 supported");
  in.get();  // single whitespace after header

  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw IoError(path + ": truncated PPM payload");

  ImageRGB img(w, h);
  for (std::size_t i = 0; i < buf.size(); ++i)
    img.data[i] = static_cast<float>(buf[i]) / 255.0f;
  return img;
}

void save_ppm(const std::string& path, const ImageRGB& img) {
  if (!shape_ok(img))
    throw ConfigError("cannot save image whose buffer does not match its dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> buf(img.pixel_count() * 3);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(img.data[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing " + path);
}

ImageRGB load_image(const std::string& path) {
  if (ends_with(path, ".png") || ends_with(path, ".PNG")) return load_png(path);
  if (ends_with(path, ".ppm") || ends_with(path, ".PPM")) return load_ppm(path);
  throw IoError("unsupported image format: " + path);
}

void save_image(const std::string& path, const ImageRGB& img) {
  if (ends_with(path, ".png") || ends_with(path, ".PNG")) {
    save_png(path, img);
  } else if (ends_with(path, ".ppm") || ends_with(path, ".PPM")) {
    save_ppm(path, img);
  } else {
    throw IoError("unsupported image format: " + path);
  }
}

}  // namespace retouch
