#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retouch/image.hpp"
#include "retouch/model.hpp"
#include "retouch/parallel.hpp"

namespace retouch {

/// One dataset record: an input image, its retouched target, and the preset /
/// style-group bookkeeping used for held-out splits and grouped evaluation.
struct ManifestEntry {
  std::string input_path, target_path;
  int preset_id = -1;
  int group_id = -1;
};

/// JSON-lines manifest, one {input_path, target_path, preset_id, group_id}
/// object per line.
std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

struct LoadedPair {
  ImageRGB x, y;
  int preset_id = -1;
  int group_id = -1;
};

/// Eagerly loads every pair in the manifest; dimensions of x and y must match
/// within each pair.
std::vector<LoadedPair> load_pairs(const std::vector<ManifestEntry>& entries);

struct TrainConfig {
  int steps = 10000;
  int batch = 8;
  int crop = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int checkpoint_interval = 500;
  int log_every = 10;
  bool cosine_lr = false;  // cosine decay to zero over `steps`; default constant
  std::string manifest_path;
  std::string out_checkpoint;
  std::string loss_csv;
  std::string resume_from;  // checkpoint to continue; empty = fresh init
  bool verbose = false;
  Exec exec = Exec::Parallel;

  void validate() const;
};

/// Raised when training must stop without producing a usable checkpoint
/// (non-finite loss or gradients). Any previously written checkpoint is left
/// untouched.
struct TrainAbort : std::runtime_error {
  explicit TrainAbort(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainSummary {
  int steps_done = 0;
  double final_loss = 0;
};

/// Runs the training loop: per step, draw `batch` aligned random crops,
/// encode each (x, y) crop to z, decode x under z, take the mean absolute
/// error, backpropagate through decoder, conditioning path, and encoder, and
/// apply one Adam update. Fully reproducible from (seed, step): each step
/// reseeds its sampler, so resuming from a checkpoint replays the identical
/// stream.
TrainSummary train(const TrainConfig& cfg, const ModelConfig& arch = ModelConfig{});

/// decode(x, encode(x, y)): the auto-encoding round trip used for
/// reconstruction evaluation.
ImageRGB reconstruct(Model<float>& m, const ImageRGB& x, const ImageRGB& y,
                     Exec exec = Exec::Serial);

}  // namespace retouch
