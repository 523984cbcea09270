#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retouch/colorlab.hpp"
#include "retouch/common.hpp"
#include "retouch/image.hpp"
#include "retouch/parallel.hpp"

namespace retouch {

/// Parametric global color/tone transform standing in for a curated editing
/// preset. Composition order (fixed): white-balance gains, per-channel gamma,
/// saturation about Rec.709 luma, sine S-curve, lift/offset, clamp to [0,1].
struct SyntheticPreset {
  int id = 0;
  double gamma[3] = {1, 1, 1};  // each in [0.4, 2.5]
  double gains[3] = {1, 1, 1};  // each in [0.6, 1.4]
  double saturation = 1;        // [0, 2]
  double scurve = 0;            // [-0.5, 0.5]
  double offset = 0;            // [-0.1, 0.1]

  static SyntheticPreset identity(int id) {
    SyntheticPreset p;
    p.id = id;
    return p;
  }
  static SyntheticPreset random_preset(int id, Rng& rng);
  bool is_identity() const;
  void validate() const;
};

ImageRGB apply_preset(const ImageRGB& img, const SyntheticPreset& p, Exec exec = Exec::Serial);

/// JSON array of {id, gamma, gains, saturation, scurve, offset}.
void save_presets(const std::string& path, const std::vector<SyntheticPreset>& presets);
std::vector<SyntheticPreset> load_presets(const std::string& path);

/// Deterministic procedural test image: a bilinear color-gradient base with
/// soft ellipses and light value noise. Colors are drawn from a hue
/// neighborhood, so images sharing hue_center_deg form a coherent color
/// population (separable by ab-histogram clustering).
ImageRGB synth_image(int width, int height, std::uint64_t seed, double hue_center_deg,
                     double hue_span_deg = 70.0);
ImageRGB synth_image(int width, int height, std::uint64_t seed);

struct KMeansResult {
  std::vector<int> assign;                     // image -> cluster
  std::vector<std::vector<double>> centroids;  // k x 256
  int iterations = 0;
  double sse = 0;  // final within-cluster sum of squares
};

/// Lloyd's k-means over the 256-D ab-histogram part of the features,
/// k-means++ seeded. Ties in assignment and seeding go to the lowest index;
/// an emptied cluster is reseeded with the point farthest from its centroid.
/// Stops after 100 iterations or when no centroid moves more than 1e-6.
KMeansResult kmeans_ab(const std::vector<ColorToneFeature>& feats, int k, std::uint64_t seed);

struct DatasetConfig {
  int n_images = 240;
  int n_presets = 24;
  int clusters = 0;  // 0 = one cluster per preset
  int image_size = 96;
  int holdout_groups = 4;  // style groups excluded from the training split
  std::uint64_t seed = 0;
  std::string out_dir;

  void validate() const;
};

struct DatasetPaths {
  std::string train_manifest;
  std::string holdout_manifest;
  std::string presets_json;
  std::string groups_json;
};

/// Builds the synthetic corpus: renders source images, clusters them by
/// ab histogram into style groups, assigns one preset per group (seeded
/// round-robin; preset 0 is the identity and always lands in the training
/// split), renders targets, and writes train/held-out manifests split by
/// group so held-out groups' presets are never seen in training.
DatasetPaths make_dataset(const DatasetConfig& cfg);

}  // namespace retouch
