// Benchmarks the OpenMP-parallel kernels against their serial counterparts
// and verifies the two produce identical results. On a single core the two
// paths should run at parity; the interesting output there is the equality
// column, which guards the parallel decompositions against reduction-order
// drift.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "retouch/colorlab.hpp"
#include "retouch/decoder.hpp"
#include "retouch/encoder.hpp"
#include "retouch/image.hpp"
#include "retouch/metrics.hpp"
#include "retouch/model.hpp"
#include "retouch/parallel.hpp"
#include "retouch/presetlab.hpp"
#include "retouch/refselect.hpp"

using namespace retouch;

namespace {

double time_ms(const std::function<void()>& fn, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

bool same_image(const ImageRGB& a, const ImageRGB& b) {
  if (a.width != b.width || a.height != b.height) return false;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-28s %10.2f ms %10.2f ms   %5.2fx   %s\n", name.c_str(), serial_ms, parallel_ms,
              parallel_ms > 0 ? serial_ms / parallel_ms : 0.0,
              identical ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
  set_threads_from_env();
  std::printf("%-28s %13s %13s %8s   %s\n", "kernel", "serial", "parallel", "speedup",
              "serial == parallel");

  Model<float> model;
  model.init(7);
  const ImageRGB img = synth_image(256, 256, 11);
  const ImageRGB img2 = synth_image(256, 256, 12);
  const std::vector<float> z = encode(model, img, img2, Exec::Serial);

  {
    ImageRGB a, b, c;
    const double ts = time_ms([&] { a = decode_image(model, img, z, Exec::Serial); });
    const double tp = time_ms([&] { b = decode_image(model, img, z, Exec::Parallel); });
    c = decode_image_reference(model, img, z);
    report("decode 256x256", ts, tp, same_image(a, b) && same_image(a, c));
  }
  {
    std::vector<float> za, zb;
    const double ts = time_ms([&] { za = encode(model, img, img2, Exec::Serial); });
    const double tp = time_ms([&] { zb = encode(model, img, img2, Exec::Parallel); });
    report("encode 256x256 pair", ts, tp, za == zb);
  }
  {
    ColorToneFeature fa, fb;
    const double ts = time_ms([&] { fa = color_tone_feature(img, Exec::Serial); });
    const double tp = time_ms([&] { fb = color_tone_feature(img, Exec::Parallel); });
    report("color/tone feature 256x256", ts, tp, fa.v == fb.v);
  }
  {
    const ImageRGB big = synth_image(512, 512, 13);
    Rng rng(3);
    const SyntheticPreset p = SyntheticPreset::random_preset(1, rng);
    ImageRGB a, b;
    const double ts = time_ms([&] { a = apply_preset(big, p, Exec::Serial); });
    const double tp = time_ms([&] { b = apply_preset(big, p, Exec::Parallel); });
    report("preset render 512x512", ts, tp, same_image(a, b));
  }
  {
    double sa = 0, sb = 0;
    const double ts = time_ms([&] { sa = ssim(img, img2, Exec::Serial); });
    const double tp = time_ms([&] { sb = ssim(img, img2, Exec::Parallel); });
    report("ssim 256x256", ts, tp, sa == sb);
  }
  {
    std::vector<ColorToneFeature> feats;
    for (int i = 0; i < 48; ++i) feats.push_back(color_tone_feature(synth_image(64, 64, 100 + i)));
    std::vector<std::vector<double>> da, db;
    const double ts = time_ms([&] { da = pairwise_distances(feats, Exec::Serial); });
    const double tp = time_ms([&] { db = pairwise_distances(feats, Exec::Parallel); });
    report("pairwise chi-square 48x48", ts, tp, da == db);
  }
  return 0;
}
