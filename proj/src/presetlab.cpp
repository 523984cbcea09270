#include "retouch/presetlab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "retouch/trainer.hpp"

namespace retouch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
}

SyntheticPreset SyntheticPreset::random_preset(int id, Rng& rng) {
  SyntheticPreset p;
  p.id = id;
  for (int c = 0; c < 3; ++c) p.gains[c] = rng.uniform(0.7, 1.3);
  for (int c = 0; c < 3; ++c) p.gamma[c] = rng.uniform(0.55, 1.8);
  p.saturation = rng.uniform(0.4, 1.6);
  p.scurve = rng.uniform(-0.35, 0.35);
  p.offset = rng.uniform(-0.06, 0.06);
  p.validate();
  return p;
}

bool SyntheticPreset::is_identity() const {
  for (int c = 0; c < 3; ++c)
    if (gamma[c] != 1.0 || gains[c] != 1.0) return false;
  return saturation == 1.0 && scurve == 0.0 && offset == 0.0;
}

void SyntheticPreset::validate() const {
  for (int c = 0; c < 3; ++c) {
    if (gamma[c] < 0.4 || gamma[c] > 2.5)
      throw ConfigError("preset " + std::to_string(id) + ": gamma out of [0.4, 2.5]");
    if (gains[c] < 0.6 || gains[c] > 1.4)
      throw ConfigError("preset " + std::to_string(id) + ": gain out of [0.6, 1.4]");
  }
  if (saturation < 0 || saturation > 2)
    throw ConfigError("preset " + std::to_string(id) + ": saturation out of [0, 2]");
  if (scurve < -0.5 || scurve > 0.5)
    throw ConfigError("preset " + std::to_string(id) + ": scurve out of [-0.5, 0.5]");
  if (offset < -0.1 || offset > 0.1)
    throw ConfigError("preset " + std::to_string(id) + ": offset out of [-0.1, 0.1]");
}

ImageRGB apply_preset(const ImageRGB& img, const SyntheticPreset& p, Exec exec) {
  if (!img.valid()) throw ConfigError("apply_preset: invalid image");
  p.validate();
  ImageRGB out;
  out.width = img.width;
  out.height = img.height;
  out.data.resize(img.data.size());
  // Each stage is skipped at its identity parameters so the identity preset
  // reproduces the input bit-exactly.
  const bool do_gain = p.gains[0] != 1.0 || p.gains[1] != 1.0 || p.gains[2] != 1.0;
  const bool do_gamma = p.gamma[0] != 1.0 || p.gamma[1] != 1.0 || p.gamma[2] != 1.0;
  const bool do_sat = p.saturation != 1.0;
  const bool do_curve = p.scurve != 0.0;
  const bool do_offset = p.offset != 0.0;
  par_for(img.pixel_count(), exec, [&](std::int64_t i) {
    double v[3];
    for (int c = 0; c < 3; ++c) v[c] = img.data[i * 3 + c];
    if (do_gain)
      for (int c = 0; c < 3; ++c) v[c] *= p.gains[c];
    if (do_gamma)
      for (int c = 0; c < 3; ++c)
        if (p.gamma[c] != 1.0) v[c] = std::pow(v[c], p.gamma[c]);
    if (do_sat) {
      const double luma = 0.2126 * v[0] + 0.7152 * v[1] + 0.0722 * v[2];
      for (int c = 0; c < 3; ++c) v[c] = luma + p.saturation * (v[c] - luma);
    }
    if (do_curve)
      for (int c = 0; c < 3; ++c) v[c] += p.scurve * std::sin(kTwoPi * v[c]) / kTwoPi;
    if (do_offset)
      for (int c = 0; c < 3; ++c) v[c] += p.offset;
    for (int c = 0; c < 3; ++c)
      out.data[i * 3 + c] = static_cast<float>(std::clamp(v[c], 0.0, 1.0));
  });
  return out;
}

void save_presets(const std::string& path, const std::vector<SyntheticPreset>& presets) {
  json arr = json::array();
  for (const auto& p : presets) {
    arr.push_back(json{{"id", p.id},
                       {"gamma", {p.gamma[0], p.gamma[1], p.gamma[2]}},
                       {"gains", {p.gains[0], p.gains[1], p.gains[2]}},
                       {"saturation", p.saturation},
                       {"scurve", p.scurve},
                       {"offset", p.offset}});
  }
  std::ofstream f(path);
  if (!f) throw IoError("save_presets: cannot open " + path);
  f << arr.dump(2) << "\n";
  if (!f) throw IoError("save_presets: write failed for " + path);
}

std::vector<SyntheticPreset> load_presets(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_presets: cannot open " + path);
  json arr;
  try {
    f >> arr;
  } catch (const json::parse_error& e) {
    throw IoError("load_presets: " + path + ": " + e.what());
  }
  if (!arr.is_array()) throw IoError("load_presets: " + path + ": expected a JSON array");
  std::vector<SyntheticPreset> out;
  for (const auto& j : arr) {
    SyntheticPreset p;
    p.id = j.at("id").get<int>();
    for (int c = 0; c < 3; ++c) {
      p.gamma[c] = j.at("gamma").at(c).get<double>();
      p.gains[c] = j.at("gains").at(c).get<double>();
    }
    p.saturation = j.at("saturation").get<double>();
    p.scurve = j.at("scurve").get<double>();
    p.offset = j.at("offset").get<double>();
    p.validate();
    out.push_back(p);
  }
  return out;
}

namespace {

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c; g = x;
  } else if (hp < 2) {
    r = x; g = c;
  } else if (hp < 3) {
    g = c; b = x;
  } else if (hp < 4) {
    g = x; b = c;
  } else if (hp < 5) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

double pixel_noise(std::uint64_t seed, int x, int y, int width) {
  Rng r(mix_seed(seed ^ 0x6e6f697365ull, static_cast<std::uint64_t>(y) * width + x));
  return r.uniform() - 0.5;
}

}  // namespace

ImageRGB synth_image(int width, int height, std::uint64_t seed, double hue_center_deg,
                     double hue_span_deg) {
  if (width < 1 || height < 1) throw ConfigError("synth_image: bad dimensions");
  Rng rng(seed);
  auto palette_color = [&]() {
    return hsv_to_rgb(hue_center_deg + rng.uniform(-hue_span_deg / 2, hue_span_deg / 2),
                      rng.uniform(0.35, 0.85), rng.uniform(0.25, 0.9));
  };
  const std::array<double, 3> c00 = palette_color(), c10 = palette_color(),
                              c01 = palette_color(), c11 = palette_color();
  ImageRGB img;
  img.width = width;
  img.height = height;
  img.data.resize(static_cast<std::size_t>(width) * height * 3);
  std::vector<double> buf(img.data.size());
  for (int y = 0; y < height; ++y) {
    const double fy = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
    for (int x = 0; x < width; ++x) {
      const double fx = width > 1 ? static_cast<double>(x) / (width - 1) : 0.0;
      double* px = buf.data() + (static_cast<std::size_t>(y) * width + x) * 3;
      for (int c = 0; c < 3; ++c) {
        const double top = c00[c] * (1 - fx) + c10[c] * fx;
        const double bot = c01[c] * (1 - fx) + c11[c] * fx;
        px[c] = top * (1 - fy) + bot * fy;
      }
    }
  }
  const int n_shapes = 3 + static_cast<int>(rng.below(4));
  for (int s = 0; s < n_shapes; ++s) {
    const double cx = rng.uniform(0.1, 0.9) * width;
    const double cy = rng.uniform(0.1, 0.9) * height;
    const double rx = rng.uniform(0.08, 0.3) * width;
    const double ry = rng.uniform(0.08, 0.3) * height;
    const std::array<double, 3> col = palette_color();
    const double opacity = rng.uniform(0.55, 0.9);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        const double d = dx * dx + dy * dy;
        if (d >= 1.0) continue;
        // Soft edge: fully opaque inside 70% radius, fading to the rim.
        const double t = std::clamp((1.0 - d) / 0.51, 0.0, 1.0);
        const double alpha = opacity * t * t * (3 - 2 * t);
        double* px = buf.data() + (static_cast<std::size_t>(y) * width + x) * 3;
        for (int c = 0; c < 3; ++c) px[c] += alpha * (col[c] - px[c]);
      }
    }
  }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double n = 0.03 * pixel_noise(seed, x, y, width);
      double* px = buf.data() + (static_cast<std::size_t>(y) * width + x) * 3;
      for (int c = 0; c < 3; ++c)
        img.data[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
            static_cast<float>(std::clamp(px[c] + n, 0.0, 1.0));
    }
  return img;
}

ImageRGB synth_image(int width, int height, std::uint64_t seed) {
  Rng r(mix_seed(seed, 0x68756533ull));
  return synth_image(width, height, seed, r.uniform(0.0, 360.0));
}

KMeansResult kmeans_ab(const std::vector<ColorToneFeature>& feats, int k, std::uint64_t seed) {
  const int n = static_cast<int>(feats.size());
  if (k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (k > n) throw ConfigError("kmeans: k = " + std::to_string(k) + " exceeds n = " +
                               std::to_string(n));
  constexpr int D = ColorToneFeature::kAbBins * ColorToneFeature::kAbBins;
  auto dist2 = [&](const double* a, const double* b) {
    double s = 0;
    for (int d = 0; d < D; ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
    }
    return s;
  };

  KMeansResult res;
  res.centroids.assign(k, std::vector<double>(D, 0.0));
  Rng rng(seed);

  // k-means++ seeding: distance-squared-proportional draws.
  std::vector<double> d2(n, std::numeric_limits<double>::max());
  {
    const int first = static_cast<int>(rng.below(n));
    std::copy(feats[first].ab_hist(), feats[first].ab_hist() + D, res.centroids[0].begin());
    for (int c = 1; c < k; ++c) {
      double total = 0;
      for (int i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], dist2(feats[i].ab_hist(), res.centroids[c - 1].data()));
        total += d2[i];
      }
      int pick;
      if (total <= 0) {
        pick = static_cast<int>(rng.below(n));  // all points coincide
      } else {
        const double r = rng.uniform() * total;
        double cum = 0;
        pick = n - 1;
        for (int i = 0; i < n; ++i) {
          cum += d2[i];
          if (cum > r) {
            pick = i;
            break;
          }
        }
      }
      std::copy(feats[pick].ab_hist(), feats[pick].ab_hist() + D, res.centroids[c].begin());
    }
  }

  res.assign.assign(n, 0);
  std::vector<std::vector<double>> next(k, std::vector<double>(D));
  std::vector<int> count(k);
  for (int iter = 1; iter <= 100; ++iter) {
    res.iterations = iter;
    res.sse = 0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bestd = dist2(feats[i].ab_hist(), res.centroids[0].data());
      for (int c = 1; c < k; ++c) {
        const double d = dist2(feats[i].ab_hist(), res.centroids[c].data());
        if (d < bestd) {  // strict: ties keep the lowest cluster index
          bestd = d;
          best = c;
        }
      }
      res.assign[i] = best;
      res.sse += bestd;
    }
    for (int c = 0; c < k; ++c) {
      std::fill(next[c].begin(), next[c].end(), 0.0);
      count[c] = 0;
    }
    for (int i = 0; i < n; ++i) {
      const double* f = feats[i].ab_hist();
      auto& acc = next[res.assign[i]];
      for (int d = 0; d < D; ++d) acc[d] += f[d];
      ++count[res.assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] == 0) {
        // Reseed an emptied cluster with the globally farthest point.
        int far_i = 0;
        double far_d = -1;
        for (int i = 0; i < n; ++i) {
          const double d = dist2(feats[i].ab_hist(), res.centroids[res.assign[i]].data());
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        std::copy(feats[far_i].ab_hist(), feats[far_i].ab_hist() + D, next[c].begin());
        res.assign[far_i] = c;
        count[c] = 1;
      } else {
        for (int d = 0; d < D; ++d) next[c][d] /= count[c];
      }
    }
    double shift = 0;
    for (int c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(dist2(next[c].data(), res.centroids[c].data())));
    res.centroids = next;
    if (shift < 1e-6) break;
  }
  return res;
}

void DatasetConfig::validate() const {
  if (n_images < 1) throw ConfigError("make_dataset: need at least one image");
  if (n_presets < 1) throw ConfigError("make_dataset: need at least one preset");
  if (image_size < 16) throw ConfigError("make_dataset: image size must be >= 16");
  const int k = clusters > 0 ? clusters : n_presets;
  if (k > n_images) throw ConfigError("make_dataset: more clusters than images");
  if (holdout_groups < 0 || holdout_groups >= k)
    throw ConfigError("make_dataset: held-out group count must be in [0, clusters)");
  if (out_dir.empty()) throw ConfigError("make_dataset: no output directory");
}

DatasetPaths make_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  const int k = cfg.clusters > 0 ? cfg.clusters : cfg.n_presets;
  const fs::path out(cfg.out_dir);
  fs::create_directories(out / "src");
  fs::create_directories(out / "tgt");

  // Source images: hue families laid out round-robin so the corpus contains k
  // coherent color populations for the clustering stage to find.
  std::vector<ImageRGB> images(cfg.n_images);
  std::vector<ColorToneFeature> feats(cfg.n_images);
  std::vector<std::string> src_paths(cfg.n_images);
  char name[64];
  for (int i = 0; i < cfg.n_images; ++i) {
    const double hue = 360.0 * (i % k) / k;
    images[i] = synth_image(cfg.image_size, cfg.image_size, mix_seed(cfg.seed, 0x1000 + i), hue);
    feats[i] = color_tone_feature(images[i]);
    std::snprintf(name, sizeof name, "img_%04d.png", i);
    src_paths[i] = (out / "src" / name).string();
    save_image(src_paths[i], images[i]);
  }

  const KMeansResult km = kmeans_ab(feats, k, mix_seed(cfg.seed, 0x2000));

  std::vector<SyntheticPreset> presets;
  Rng prng(mix_seed(cfg.seed, 0x3000));
  for (int id = 0; id < cfg.n_presets; ++id)
    presets.push_back(id == 0 ? SyntheticPreset::identity(0)
                              : SyntheticPreset::random_preset(id, prng));

  // Seeded round-robin preset assignment: permute presets, then deal them out
  // to clusters in order.
  std::vector<int> perm(cfg.n_presets);
  for (int i = 0; i < cfg.n_presets; ++i) perm[i] = i;
  Rng srng(mix_seed(cfg.seed, 0x4000));
  for (int i = cfg.n_presets - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<int>(srng.below(i + 1))]);
  std::vector<int> preset_of_cluster(k);
  for (int c = 0; c < k; ++c) preset_of_cluster[c] = perm[c % cfg.n_presets];

  std::vector<ManifestEntry> all(cfg.n_images);
  for (int i = 0; i < cfg.n_images; ++i) {
    const int cluster = km.assign[i];
    const SyntheticPreset& p = presets[preset_of_cluster[cluster]];
    ImageRGB tgt = apply_preset(images[i], p, Exec::Parallel);
    std::snprintf(name, sizeof name, "img_%04d.png", i);
    const std::string tgt_path = (out / "tgt" / name).string();
    save_image(tgt_path, tgt);
    all[i] = {src_paths[i], tgt_path, p.id, cluster};
  }

  // Held-out split by group; identity-preset groups always stay in training
  // so the identity style is learnable.
  std::vector<int> candidates;
  for (int c = 0; c < k; ++c)
    if (preset_of_cluster[c] != 0) candidates.push_back(c);
  if (cfg.holdout_groups > static_cast<int>(candidates.size()))
    throw ConfigError("make_dataset: not enough non-identity groups to hold out");
  Rng hrng(mix_seed(cfg.seed, 0x5000));
  for (int i = static_cast<int>(candidates.size()) - 1; i > 0; --i)
    std::swap(candidates[i], candidates[static_cast<int>(hrng.below(i + 1))]);
  std::vector<bool> held(k, false);
  for (int i = 0; i < cfg.holdout_groups; ++i) held[candidates[i]] = true;

  std::vector<ManifestEntry> train, holdout;
  for (const auto& e : all) (held[e.group_id] ? holdout : train).push_back(e);
  if (train.empty()) throw ConfigError("make_dataset: empty training split");

  DatasetPaths paths;
  paths.train_manifest = (out / "train_manifest.jsonl").string();
  paths.holdout_manifest = (out / "holdout_manifest.jsonl").string();
  paths.presets_json = (out / "presets.json").string();
  paths.groups_json = (out / "groups.json").string();
  save_manifest(paths.train_manifest, train);
  save_manifest(paths.holdout_manifest, holdout);
  save_presets(paths.presets_json, presets);

  json groups = json::array();
  for (int c = 0; c < k; ++c) {
    json members = json::array();
    for (int i = 0; i < cfg.n_images; ++i)
      if (km.assign[i] == c) members.push_back(i);
    groups.push_back(json{{"group_id", c},
                          {"preset_id", preset_of_cluster[c]},
                          {"held_out", static_cast<bool>(held[c])},
                          {"members", members},
                          {"centroid", km.centroids[c]}});
  }
  std::ofstream gf(paths.groups_json);
  if (!gf) throw IoError("make_dataset: cannot open " + paths.groups_json);
  gf << groups.dump(2) << "\n";
  if (!gf) throw IoError("make_dataset: write failed for " + paths.groups_json);
  return paths;
}

}  // namespace retouch
