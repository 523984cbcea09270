#include "retouch/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "retouch/decoder.hpp"
#include "retouch/encoder.hpp"

namespace retouch {

namespace {

double rel_err(double a, double b) {
  double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

// A two-sided difference whose interval happens to straddle a ReLU or
// absolute-value kink measures a secant, not the derivative. Entries that
// disagree at the base step are re-measured with the interval shrunk 4x per
// level; the closest agreement wins. A genuine gradient bug stays wrong at
// every step size, so refinement never hides one.
double refined_rel_err(const std::function<double(double)>& fd_at, double analytic,
                       const GradCheckConfig& cfg) {
  double best = rel_err(analytic, fd_at(cfg.h));
  double hstep = cfg.h;
  for (int lvl = 0; lvl < cfg.refine_levels && best >= cfg.refine_threshold; ++lvl) {
    hstep *= 0.25;
    best = std::min(best, rel_err(analytic, fd_at(hstep)));
  }
  return best;
}

// Keeps predictions in f64 end to end; rounding them through a float image
// would swamp the central differences.
double pair_loss(Model<double>& m, const ImageRGB& x, const ImageRGB& y,
                 const std::vector<double>& z) {
  std::vector<double> rgb(x.data.begin(), x.data.end());
  std::vector<double> pred = decode_pixels(m, rgb, z);
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    sum += std::abs(pred[i] - static_cast<double>(y.data[i]));
  return sum / static_cast<double>(pred.size());
}

}  // namespace

double batch_loss(Model<double>& m, const PairBatch& batch) {
  if (batch.empty()) throw ConfigError("batch_loss: empty batch");
  double total = 0;
  for (const auto& [x, y] : batch) {
    std::vector<double> z = encode(m, x, y);
    total += pair_loss(m, x, y, z);
  }
  return total / static_cast<double>(batch.size());
}

double batch_loss_and_grads(Model<double>& m, const PairBatch& batch, Model<double>& grads) {
  if (batch.empty()) throw ConfigError("batch_loss_and_grads: empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total = 0;
  for (const auto& [x, y] : batch) {
    EncodeCache<double> cache;
    std::vector<double> z = encode(m, x, y, cache);
    const double scale = inv_b / (3.0 * static_cast<double>(x.pixel_count()));
    FusedResult<double> r = decode_train_fused(m, x, y, z, scale, grads);
    total += r.loss_sum / static_cast<double>(r.n_elems);
    encode_backward(m, cache, r.gz, grads);
  }
  return total * inv_b;
}

double GradCheckReport::worst() const {
  return std::max({max_rel_err, max_rel_err_latent, dir_rel_err});
}

GradCheckReport gradient_check(Model<double>& m, const PairBatch& batch,
                               const GradCheckConfig& cfg) {
  if (cfg.h <= 0) throw ConfigError("gradient_check: step must be positive");
  GradCheckReport rep;
  Model<double> grads = make_like(m);
  batch_loss_and_grads(m, batch, grads);

  auto params = m.named_params();
  auto gparams = grads.named_params();
  Rng rng(mix_seed(cfg.seed, 0xf0));
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    net::Tensor<double>& t = *params[ti].second;
    const net::Tensor<double>& g = *gparams[ti].second;
    std::vector<std::size_t> picks;
    if (cfg.samples_per_tensor <= 0 || t.size() <= static_cast<std::size_t>(cfg.samples_per_tensor)) {
      picks.resize(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) picks[i] = i;
    } else {
      for (int i = 0; i < cfg.samples_per_tensor; ++i)
        picks.push_back(static_cast<std::size_t>(rng.below(t.size())));
      std::sort(picks.begin(), picks.end());
      picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    }
    double tensor_max = 0;
    for (std::size_t idx : picks) {
      const double orig = t.v[idx];
      auto fd_at = [&](double hstep) {
        t.v[idx] = orig + hstep;
        const double lp = batch_loss(m, batch);
        t.v[idx] = orig - hstep;
        const double lm = batch_loss(m, batch);
        t.v[idx] = orig;
        return (lp - lm) / (2 * hstep);
      };
      tensor_max = std::max(tensor_max, refined_rel_err(fd_at, g.v[idx], cfg));
      ++rep.checked_entries;
    }
    rep.per_tensor.emplace_back(params[ti].first, tensor_max);
    if (tensor_max > rep.max_rel_err) {
      rep.max_rel_err = tensor_max;
      rep.worst_tensor = params[ti].first;
    }
  }

  if (cfg.check_latent) {
    // dL/dz per pair: analytic gradient from the fused backward vs central
    // differences on the decoder alone (z held as the free variable).
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const auto& [x, y] : batch) {
      std::vector<double> z = encode(m, x, y);
      Model<double> scratch = make_like(m);
      const double scale = inv_b / (3.0 * static_cast<double>(x.pixel_count()));
      FusedResult<double> r = decode_train_fused(m, x, y, z, scale, scratch);
      for (std::size_t j = 0; j < z.size(); ++j) {
        const double orig = z[j];
        auto fd_at = [&](double hstep) {
          z[j] = orig + hstep;
          const double lp = pair_loss(m, x, y, z) * inv_b;
          z[j] = orig - hstep;
          const double lm = pair_loss(m, x, y, z) * inv_b;
          z[j] = orig;
          return (lp - lm) / (2 * hstep);
        };
        rep.max_rel_err_latent =
            std::max(rep.max_rel_err_latent, refined_rel_err(fd_at, r.gz[j], cfg));
      }
    }
  }

  if (cfg.directional) {
    // One normalized random direction across every parameter: catches errors
    // in entries the per-tensor sampling skipped.
    Rng drng(mix_seed(cfg.seed, 0xd1));
    std::vector<std::vector<double>> dir(params.size());
    double norm2 = 0;
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
      dir[ti].resize(params[ti].second->size());
      for (double& d : dir[ti]) {
        d = drng.uniform(-1.0, 1.0);
        norm2 += d * d;
      }
    }
    const double inv_norm = 1.0 / std::sqrt(norm2);
    double analytic = 0;
    for (std::size_t ti = 0; ti < params.size(); ++ti)
      for (std::size_t i = 0; i < dir[ti].size(); ++i)
        analytic += gparams[ti].second->v[i] * dir[ti][i] * inv_norm;
    auto shift = [&](double s) {
      for (std::size_t ti = 0; ti < params.size(); ++ti)
        for (std::size_t i = 0; i < dir[ti].size(); ++i)
          params[ti].second->v[i] += s * dir[ti][i] * inv_norm;
    };
    auto fd_at = [&](double hstep) {
      shift(hstep);
      const double lp = batch_loss(m, batch);
      shift(-2 * hstep);
      const double lm = batch_loss(m, batch);
      shift(hstep);
      return (lp - lm) / (2 * hstep);
    };
    rep.dir_rel_err = refined_rel_err(fd_at, analytic, cfg);
  }
  return rep;
}

PairBatch make_gradcheck_batch(int n_pairs, int width, int height, std::uint64_t seed) {
  PairBatch batch;
  for (int i = 0; i < n_pairs; ++i) {
    Rng rng(mix_seed(seed, 0x6c00 + i));
    ImageRGB x, y;
    x.width = y.width = width;
    x.height = y.height = height;
    x.data.resize(static_cast<std::size_t>(width) * height * 3);
    y.data.resize(x.data.size());
    for (std::size_t j = 0; j < x.data.size(); ++j) {
      x.data[j] = static_cast<float>(rng.uniform());
      // Targets live in [0.02, 0.12] or [0.88, 0.98]; a fresh model's sigmoid
      // outputs sit near 0.5, keeping every residual far from zero.
      const double band = rng.uniform() < 0.5 ? 0.02 : 0.88;
      y.data[j] = static_cast<float>(band + 0.1 * rng.uniform());
    }
    batch.emplace_back(std::move(x), std::move(y));
  }
  return batch;
}

}  // namespace retouch
