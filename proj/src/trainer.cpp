#include "retouch/trainer.hpp"

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "retouch/checkpoint.hpp"
#include "retouch/decoder.hpp"
#include "retouch/encoder.hpp"

namespace retouch {

using nlohmann::json;

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_manifest: cannot open " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError("load_manifest: " + path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ManifestEntry e;
    e.input_path = j.at("input_path").get<std::string>();
    e.target_path = j.at("target_path").get<std::string>();
    e.preset_id = j.value("preset_id", -1);
    e.group_id = j.value("group_id", -1);
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream f(path);
  if (!f) throw IoError("save_manifest: cannot open " + path);
  for (const auto& e : entries) {
    json j{{"input_path", e.input_path},
           {"target_path", e.target_path},
           {"preset_id", e.preset_id},
           {"group_id", e.group_id}};
    f << j.dump() << "\n";
  }
  if (!f) throw IoError("save_manifest: write failed for " + path);
}

std::vector<LoadedPair> load_pairs(const std::vector<ManifestEntry>& entries) {
  std::vector<LoadedPair> pairs;
  pairs.reserve(entries.size());
  for (const auto& e : entries) {
    LoadedPair p;
    p.x = load_image(e.input_path);
    p.y = load_image(e.target_path);
    p.preset_id = e.preset_id;
    p.group_id = e.group_id;
    if (p.x.width != p.y.width || p.x.height != p.y.height)
      throw ConfigError("load_pairs: dimension mismatch between " + e.input_path + " and " +
                        e.target_path);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (crop < 1) throw ConfigError("train: crop must be >= 1");
  if (lr <= 0) throw ConfigError("train: lr must be positive");
  if (manifest_path.empty()) throw ConfigError("train: no dataset manifest given");
  if (out_checkpoint.empty()) throw ConfigError("train: no output checkpoint path given");
}

namespace {

double lr_at(const TrainConfig& cfg, int step) {
  if (!cfg.cosine_lr) return cfg.lr;
  const double frac = static_cast<double>(step - 1) / static_cast<double>(cfg.steps);
  return cfg.lr * 0.5 * (1.0 + std::cos(frac * 3.14159265358979323846));
}

}  // namespace

TrainSummary train(const TrainConfig& cfg, const ModelConfig& arch) {
  cfg.validate();
  const std::vector<ManifestEntry> manifest = load_manifest(cfg.manifest_path);
  if (manifest.empty()) throw ConfigError("train: dataset manifest is empty");
  const std::vector<LoadedPair> pairs = load_pairs(manifest);
  for (const auto& p : pairs)
    if (p.x.width < cfg.crop || p.x.height < cfg.crop)
      throw ConfigError("train: crop " + std::to_string(cfg.crop) + " exceeds image " +
                        std::to_string(p.x.width) + "x" + std::to_string(p.x.height));

  Model<float> model;
  net::Adam<float> adam;
  int start_step = 0;
  if (!cfg.resume_from.empty()) {
    CheckpointData ck = load_checkpoint(cfg.resume_from);
    if (!ck.has_adam)
      throw ConfigError("train: checkpoint " + cfg.resume_from + " has no optimizer state to resume");
    model = std::move(ck.model);
    adam = std::move(ck.adam);
    start_step = static_cast<int>(adam.t);
    if (start_step >= cfg.steps)
      throw ConfigError("train: checkpoint already at step " + std::to_string(start_step));
  } else {
    model = Model<float>(arch);
    model.init(cfg.seed);
    adam.lr = cfg.lr;
  }
  auto params = model.named_params();
  if (cfg.resume_from.empty()) adam.attach(params);

  std::ofstream csv;
  if (!cfg.loss_csv.empty()) {
    const bool append = !cfg.resume_from.empty() && std::filesystem::exists(cfg.loss_csv);
    csv.open(cfg.loss_csv, append ? std::ios::app : std::ios::trunc);
    if (!csv) throw IoError("train: cannot open loss log " + cfg.loss_csv);
    if (!append) csv << "step,loss\n";
  }

  std::vector<Model<float>> item_grads(cfg.batch, make_like(model));
  std::vector<double> item_loss(cfg.batch);
  Model<float> total_grads = make_like(model);
  auto gparams = total_grads.named_params();
  std::vector<std::pair<std::string, net::Tensor<float>*>> iparams;

  bool wrote_checkpoint = false;
  auto write_ck = [&]() {
    save_checkpoint(cfg.out_checkpoint, model, &adam);
    wrote_checkpoint = true;
  };
  auto abort_with = [&](const std::string& why, int step) {
    std::string note = wrote_checkpoint || !cfg.resume_from.empty()
                           ? " (last good checkpoint retained)"
                           : " (no checkpoint written)";
    throw TrainAbort("training aborted at step " + std::to_string(step) + ": " + why + note);
  };

  const auto t0 = std::chrono::steady_clock::now();
  TrainSummary summary;
  for (int step = start_step + 1; step <= cfg.steps; ++step) {
    // One seeded sampler per step: the draw sequence is a pure function of
    // (seed, step), which makes resumed runs replay the identical stream.
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step)));
    struct Draw {
      int pair, x0, y0;
    };
    std::vector<Draw> draws(cfg.batch);
    for (int b = 0; b < cfg.batch; ++b) {
      const int pi = static_cast<int>(rng.below(pairs.size()));
      const LoadedPair& p = pairs[pi];
      draws[b] = {pi, static_cast<int>(rng.below(p.x.width - cfg.crop + 1)),
                  static_cast<int>(rng.below(p.x.height - cfg.crop + 1))};
    }

    par_for(cfg.batch, cfg.exec, [&](std::int64_t b) {
      const Draw& d = draws[b];
      const LoadedPair& p = pairs[d.pair];
      ImageRGB xc = p.x.crop(d.x0, d.y0, cfg.crop, cfg.crop);
      ImageRGB yc = p.y.crop(d.x0, d.y0, cfg.crop, cfg.crop);
      Model<float>& g = item_grads[b];
      g.zero();
      EncodeCache<float> cache;
      std::vector<float> z = encode(model, xc, yc, cache);
      const float scale = 1.0f / (3.0f * static_cast<float>(xc.pixel_count()) * cfg.batch);
      FusedResult<float> r = decode_train_fused(model, xc, yc, z, scale, g);
      encode_backward(model, cache, r.gz, g);
      item_loss[b] = r.loss_sum / static_cast<double>(r.n_elems);
    });

    // Fixed-order reduction keeps the update identical for any thread count.
    total_grads.zero();
    double loss = 0;
    for (int b = 0; b < cfg.batch; ++b) {
      loss += item_loss[b];
      iparams = item_grads[b].named_params();
      for (std::size_t tix = 0; tix < gparams.size(); ++tix) {
        float* dst = gparams[tix].second->data();
        const float* src = iparams[tix].second->data();
        for (std::size_t j = 0; j < gparams[tix].second->size(); ++j) dst[j] += src[j];
      }
    }
    loss /= cfg.batch;
    if (!std::isfinite(loss)) abort_with("non-finite loss", step);
    if (!adam.step(params, gparams, lr_at(cfg, step))) abort_with(adam.last_error, step);

    summary.steps_done = step;
    summary.final_loss = loss;
    if (csv.is_open() && (step % cfg.log_every == 0 || step == cfg.steps || step == 1)) {
      char row[64];
      std::snprintf(row, sizeof row, "%d,%.9g\n", step, loss);
      csv << row;
    }
    if (cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0 && step != cfg.steps)
      write_ck();
    if (cfg.verbose && (step % 100 == 0 || step == cfg.steps)) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::fprintf(stderr, "step %d/%d  loss %.6f  %.1f steps/s\n", step, cfg.steps, loss,
                   (step - start_step) / std::max(secs, 1e-9));
    }
  }
  write_ck();
  if (csv.is_open() && !csv) throw IoError("train: loss log write failed");
  return summary;
}

ImageRGB reconstruct(Model<float>& m, const ImageRGB& x, const ImageRGB& y, Exec exec) {
  std::vector<float> z = encode(m, x, y, exec);
  return decode_image(m, x, z, exec);
}

}  // namespace retouch
