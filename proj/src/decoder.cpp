#include "retouch/decoder.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace retouch {

ImageRGB apply_lut(const std::vector<float>& lut, int n, const ImageRGB& img, Exec exec) {
  if (n < 2 || lut.size() != static_cast<std::size_t>(n) * n * n * 3)
    throw ConfigError("apply_lut: lattice size mismatch");
  if (!img.valid()) throw ConfigError("apply_lut: invalid image");
  ImageRGB out;
  out.width = img.width;
  out.height = img.height;
  out.data.resize(img.data.size());
  auto cell = [&](int r, int g, int b) {
    return lut.data() + (static_cast<std::size_t>(b) * n * n + static_cast<std::size_t>(g) * n + r) * 3;
  };
  par_for(img.pixel_count(), exec, [&](std::int64_t p) {
    double f[3];
    int i0[3], i1[3];
    for (int c = 0; c < 3; ++c) {
      double u = std::clamp(static_cast<double>(img.data[p * 3 + c]), 0.0, 1.0) * (n - 1);
      double fl = std::floor(u);
      i0[c] = std::min(static_cast<int>(fl), n - 2);
      i1[c] = i0[c] + 1;
      f[c] = u - i0[c];
    }
    for (int c = 0; c < 3; ++c) {
      double c00 = cell(i0[0], i0[1], i0[2])[c] * (1 - f[0]) + cell(i1[0], i0[1], i0[2])[c] * f[0];
      double c10 = cell(i0[0], i1[1], i0[2])[c] * (1 - f[0]) + cell(i1[0], i1[1], i0[2])[c] * f[0];
      double c01 = cell(i0[0], i0[1], i1[2])[c] * (1 - f[0]) + cell(i1[0], i0[1], i1[2])[c] * f[0];
      double c11 = cell(i0[0], i1[1], i1[2])[c] * (1 - f[0]) + cell(i1[0], i1[1], i1[2])[c] * f[0];
      double c0 = c00 * (1 - f[1]) + c10 * f[1];
      double c1 = c01 * (1 - f[1]) + c11 * f[1];
      out.data[p * 3 + c] = static_cast<float>(c0 * (1 - f[2]) + c1 * f[2]);
    }
  });
  return out;
}

void save_cube(const std::string& path, const std::vector<float>& lut, int n,
               const std::string& title) {
  if (lut.size() != static_cast<std::size_t>(n) * n * n * 3)
    throw ConfigError("save_cube: lattice size mismatch");
  std::ofstream f(path);
  if (!f) throw IoError("save_cube: cannot open " + path);
  f << "TITLE \"" << title << "\"\n";
  f << "LUT_3D_SIZE " << n << "\n";
  char line[96];
  for (std::size_t i = 0; i < lut.size(); i += 3) {
    std::snprintf(line, sizeof line, "%.6f %.6f %.6f\n", lut[i], lut[i + 1], lut[i + 2]);
    f << line;
  }
  if (!f) throw IoError("save_cube: write failed for " + path);
}

std::pair<std::vector<float>, int> load_cube(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_cube: cannot open " + path);
  int n = 0;
  std::vector<float> lut;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "TITLE" || tok == "DOMAIN_MIN" || tok == "DOMAIN_MAX") continue;
    if (tok == "LUT_3D_SIZE") {
      ss >> n;
      if (n < 2) throw IoError("load_cube: bad lattice size in " + path);
      lut.reserve(static_cast<std::size_t>(n) * n * n * 3);
      continue;
    }
    float r, g, b;
    std::istringstream row(line);
    if (!(row >> r >> g >> b)) throw IoError("load_cube: bad row in " + path);
    lut.push_back(r);
    lut.push_back(g);
    lut.push_back(b);
  }
  if (n == 0 || lut.size() != static_cast<std::size_t>(n) * n * n * 3)
    throw IoError("load_cube: truncated table in " + path);
  return {std::move(lut), n};
}

}  // namespace retouch
