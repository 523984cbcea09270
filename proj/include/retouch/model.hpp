#pragma once

#include <string>
#include <utility>
#include <vector>

#include "retouch/common.hpp"
#include "retouch/netcore.hpp"

namespace retouch {

/// Architecture hyperparameters. The decoder layer chain is
/// 3 -> dec_hidden -> dec_blocks... with a conditioning projection
/// (latent -> layer width, Linear+ReLU) added pre-activation at every layer.
struct ModelConfig {
  int latent_dim = 64;
  int grid = 32;          // encoder resamples each image to grid x grid
  int embed_hidden = 64;  // pixel embed: 3 -> embed_hidden (ReLU) -> branch_dim
  int branch_dim = 128;
  int dec_hidden = 128;
  std::vector<int> dec_blocks{256, 512, 3};

  void validate() const {
    if (latent_dim < 1 || grid < 1 || embed_hidden < 1 || branch_dim < 1 || dec_hidden < 1)
      throw ConfigError("model config: dimensions must be positive");
    if (dec_blocks.empty() || dec_blocks.back() != 3)
      throw ConfigError("model config: decoder must end in a 3-channel block");
    for (int d : dec_blocks)
      if (d < 1) throw ConfigError("model config: decoder block dims must be positive");
  }

  /// Decoder layer widths including the input layer: [dec_hidden, blocks...].
  std::vector<int> decoder_widths() const {
    std::vector<int> w{dec_hidden};
    w.insert(w.end(), dec_blocks.begin(), dec_blocks.end());
    return w;
  }

  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct Model {
  ModelConfig cfg;

  // Siamese encoder: shared pixel embed (ReLU hidden, linear out), then a
  // linear projection of the concatenated branch means to the latent.
  net::Tensor<T> enc_embed1_W, enc_embed1_b;
  net::Tensor<T> enc_embed2_W, enc_embed2_b;
  net::Tensor<T> enc_proj_W, enc_proj_b;

  // Decoder layer chain (dec_W[0] maps the input RGB) plus the per-layer
  // latent conditioning projections.
  std::vector<net::Tensor<T>> dec_W, dec_b;
  std::vector<net::Tensor<T>> cond_W, cond_b;

  explicit Model(const ModelConfig& c = ModelConfig{}) : cfg(c) {
    cfg.validate();
    enc_embed1_W = net::Tensor<T>(cfg.embed_hidden, 3);
    enc_embed1_b = net::Tensor<T>(cfg.embed_hidden, 1);
    enc_embed2_W = net::Tensor<T>(cfg.branch_dim, cfg.embed_hidden);
    enc_embed2_b = net::Tensor<T>(cfg.branch_dim, 1);
    enc_proj_W = net::Tensor<T>(cfg.latent_dim, 2 * cfg.branch_dim);
    enc_proj_b = net::Tensor<T>(cfg.latent_dim, 1);
    const std::vector<int> widths = cfg.decoder_widths();
    int in = 3;
    for (int w : widths) {
      dec_W.emplace_back(w, in);
      dec_b.emplace_back(w, 1);
      cond_W.emplace_back(w, cfg.latent_dim);
      cond_b.emplace_back(w, 1);
      in = w;
    }
  }

  int n_layers() const { return static_cast<int>(dec_W.size()); }

  /// Canonical parameter listing; checkpoint layout, Adam slot order, and the
  /// gradient checker all follow this order.
  std::vector<std::pair<std::string, net::Tensor<T>*>> named_params() {
    std::vector<std::pair<std::string, net::Tensor<T>*>> p;
    p.emplace_back("enc.embed1.W", &enc_embed1_W);
    p.emplace_back("enc.embed1.b", &enc_embed1_b);
    p.emplace_back("enc.embed2.W", &enc_embed2_W);
    p.emplace_back("enc.embed2.b", &enc_embed2_b);
    p.emplace_back("enc.proj.W", &enc_proj_W);
    p.emplace_back("enc.proj.b", &enc_proj_b);
    for (int i = 0; i < n_layers(); ++i) {
      p.emplace_back("dec.l" + std::to_string(i) + ".W", &dec_W[i]);
      p.emplace_back("dec.l" + std::to_string(i) + ".b", &dec_b[i]);
      p.emplace_back("dec.p" + std::to_string(i) + ".W", &cond_W[i]);
      p.emplace_back("dec.p" + std::to_string(i) + ".b", &cond_b[i]);
    }
    return p;
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (auto& [name, t] : named_params()) n += t->size();
    return n;
  }

  void zero() {
    for (auto& [name, t] : named_params()) t->zero();
  }

  /// Seeded init: He-uniform into ReLU activations, Xavier-uniform for linear
  /// projections and the sigmoid output layer. Biases start at zero.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    zero();
    net::init_he_uniform(enc_embed1_W, rng);
    net::init_xavier_uniform(enc_embed2_W, rng);
    net::init_xavier_uniform(enc_proj_W, rng);
    for (int i = 0; i < n_layers(); ++i) {
      if (i + 1 == n_layers())
        net::init_xavier_uniform(dec_W[i], rng);
      else
        net::init_he_uniform(dec_W[i], rng);
      net::init_he_uniform(cond_W[i], rng);  // conditioning is Linear+ReLU
    }
  }

  template <typename U>
  Model<U> cast() const {
    Model<U> out(cfg);
    Model<T>& self = const_cast<Model<T>&>(*this);
    auto src = self.named_params();
    auto dst = out.named_params();
    for (std::size_t i = 0; i < src.size(); ++i)
      *dst[i].second = src[i].second->template cast<U>();
    return out;
  }
};

/// Zero-valued model with the same shape, used as a gradient accumulator.
template <typename T>
Model<T> make_like(const Model<T>& m) {
  return Model<T>(m.cfg);
}

}  // namespace retouch
