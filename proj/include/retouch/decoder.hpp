#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "retouch/image.hpp"
#include "retouch/model.hpp"
#include "retouch/netcore.hpp"
#include "retouch/parallel.hpp"

namespace retouch {

/// Pixels are processed in fixed-size lanes. Every pixel — including those in
/// a padded final block — runs the identical per-lane instruction sequence, so
/// a pixel's output depends only on its RGB value: decoding is bit-exact under
/// crops, resampling-by-duplication, and any block partition.
inline constexpr int kPixelBlock = 16;

/// Per-layer conditioning, computed once per latent: cond = ReLU(A_l z + c_l)
/// and the fused per-layer bias b_l + cond_l added before each activation.
template <typename T>
struct DecoderCond {
  std::vector<std::vector<T>> cond;
  std::vector<std::vector<T>> bias_total;
};

template <typename T>
DecoderCond<T> decoder_condition(const Model<T>& m, const std::vector<T>& z) {
  if (static_cast<int>(z.size()) != m.cfg.latent_dim)
    throw ConfigError("decoder_condition: latent size " + std::to_string(z.size()) +
                      " != " + std::to_string(m.cfg.latent_dim));
  DecoderCond<T> dc;
  dc.cond.resize(m.n_layers());
  dc.bias_total.resize(m.n_layers());
  for (int l = 0; l < m.n_layers(); ++l) {
    const int w = m.dec_W[l].rows;
    dc.cond[l].resize(w);
    dc.bias_total[l].resize(w);
    net::matvec(m.cond_W[l], z.data(), dc.cond[l].data());
    for (int o = 0; o < w; ++o) {
      dc.cond[l][o] = net::relu(dc.cond[l][o] + m.cond_b[l].v[o]);
      dc.bias_total[l][o] = m.dec_b[l].v[o] + dc.cond[l][o];
    }
  }
  return dc;
}

/// Feature-major SoA activations for one block: buffer l holds layer-(l-1)
/// output (buffer 0 is the input RGB), laid out [feature][lane].
template <typename T>
struct DecodeScratch {
  std::vector<std::vector<T>> h;
  std::vector<T> g, gprev;

  explicit DecodeScratch(const ModelConfig& cfg) {
    std::vector<int> widths = cfg.decoder_widths();
    h.emplace_back(3 * kPixelBlock);
    int maxw = 3;
    for (int w : widths) {
      h.emplace_back(static_cast<std::size_t>(w) * kPixelBlock);
      maxw = std::max(maxw, w);
    }
    g.resize(static_cast<std::size_t>(maxw) * kPixelBlock);
    gprev.resize(static_cast<std::size_t>(maxw) * kPixelBlock);
  }
};

namespace detail {

/// out[o][b] = bias[o] + sum_i W[o][i] * in[i][b]; the lane loop vectorizes.
template <typename T>
void dense_block(const net::Tensor<T>& W, const std::vector<T>& bias, const T* in, T* out) {
  constexpr int B = kPixelBlock;
  const int O = W.rows, I = W.cols;
  for (int o = 0; o < O; ++o) {
    T acc[B];
    const T bo = bias[o];
    for (int b = 0; b < B; ++b) acc[b] = bo;
    const T* wr = W.data() + static_cast<std::size_t>(o) * I;
    for (int i = 0; i < I; ++i) {
      const T w = wr[i];
      const T* inr = in + static_cast<std::size_t>(i) * B;
      for (int b = 0; b < B; ++b) acc[b] += w * inr[b];
    }
    std::copy(acc, acc + B, out + static_cast<std::size_t>(o) * B);
  }
}

/// gW[o][i] += sum_b g[o][b] * in[i][b]  (lane reduction per weight).
template <typename T>
void dense_block_grad_w(net::Tensor<T>& gW, const T* g, const T* in) {
  constexpr int B = kPixelBlock;
  const int O = gW.rows, I = gW.cols;
  for (int o = 0; o < O; ++o) {
    const T* go = g + static_cast<std::size_t>(o) * B;
    T* gwr = gW.data() + static_cast<std::size_t>(o) * I;
    for (int i = 0; i < I; ++i) {
      const T* inr = in + static_cast<std::size_t>(i) * B;
      T acc = T(0);
      for (int b = 0; b < B; ++b) acc += go[b] * inr[b];
      gwr[i] += acc;
    }
  }
}

/// gin[i][b] = sum_o W[o][i] * g[o][b].
template <typename T>
void dense_block_grad_in(const net::Tensor<T>& W, const T* g, T* gin) {
  constexpr int B = kPixelBlock;
  const int O = W.rows, I = W.cols;
  std::fill(gin, gin + static_cast<std::size_t>(I) * B, T(0));
  for (int o = 0; o < O; ++o) {
    const T* wr = W.data() + static_cast<std::size_t>(o) * I;
    const T* go = g + static_cast<std::size_t>(o) * B;
    for (int i = 0; i < I; ++i) {
      const T w = wr[i];
      T* gr = gin + static_cast<std::size_t>(i) * B;
      for (int b = 0; b < B; ++b) gr[b] += w * go[b];
    }
  }
}

/// Forward through all layers for one block already loaded into s.h[0].
template <typename T>
void forward_block(const Model<T>& m, const DecoderCond<T>& dc, DecodeScratch<T>& s) {
  const int L = m.n_layers();
  for (int l = 0; l < L; ++l) {
    dense_block(m.dec_W[l], dc.bias_total[l], s.h[l].data(), s.h[l + 1].data());
    const int n = m.dec_W[l].rows * kPixelBlock;
    if (l + 1 < L)
      net::relu_inplace(s.h[l + 1].data(), n);
    else
      net::sigmoid_inplace(s.h[l + 1].data(), n);
  }
}

/// Loads up to kPixelBlock pixels starting at linear index p0 into SoA form;
/// missing lanes are zero-filled (their outputs are discarded, and per-lane
/// independence keeps real lanes unaffected).
template <typename T>
void load_block(const float* data, std::int64_t p0, int count, T* dst) {
  constexpr int B = kPixelBlock;
  for (int c = 0; c < 3; ++c) {
    for (int b = 0; b < B; ++b)
      dst[c * B + b] = b < count ? static_cast<T>(data[(p0 + b) * 3 + c]) : T(0);
  }
}

}  // namespace detail

/// Applies the per-pixel conditional MLP to every pixel of x under latent z.
template <typename T>
ImageRGB decode_image(const Model<T>& m, const ImageRGB& x, const std::vector<T>& z,
                      Exec exec = Exec::Serial) {
  if (!x.valid()) throw ConfigError("decode_image: invalid input image");
  const DecoderCond<T> dc = decoder_condition(m, z);
  ImageRGB out;
  out.width = x.width;
  out.height = x.height;
  out.data.resize(x.data.size());
  const std::int64_t npx = x.pixel_count();
  const std::int64_t nblocks = (npx + kPixelBlock - 1) / kPixelBlock;
  const int L = m.n_layers();
  par_for(nblocks, exec, [&](std::int64_t blk) {
    DecodeScratch<T> s(m.cfg);
    const std::int64_t p0 = blk * kPixelBlock;
    const int count = static_cast<int>(std::min<std::int64_t>(kPixelBlock, npx - p0));
    detail::load_block(x.data.data(), p0, count, s.h[0].data());
    detail::forward_block(m, dc, s);
    const std::vector<T>& last = s.h[L];
    for (int c = 0; c < 3; ++c)
      for (int b = 0; b < count; ++b)
        out.data[(p0 + b) * 3 + c] = static_cast<float>(last[c * kPixelBlock + b]);
  });
  return out;
}

/// Naive one-pixel-at-a-time evaluation; the oracle the blocked path is
/// checked against.
template <typename T>
ImageRGB decode_image_reference(const Model<T>& m, const ImageRGB& x, const std::vector<T>& z) {
  if (!x.valid()) throw ConfigError("decode_image_reference: invalid input image");
  const DecoderCond<T> dc = decoder_condition(m, z);
  ImageRGB out;
  out.width = x.width;
  out.height = x.height;
  out.data.resize(x.data.size());
  const int L = m.n_layers();
  const std::int64_t n_px = static_cast<std::int64_t>(x.pixel_count());
  std::vector<T> cur, next;
  for (std::int64_t p = 0; p < n_px; ++p) {
    cur.assign(3, T(0));
    for (int c = 0; c < 3; ++c) cur[c] = static_cast<T>(x.data[p * 3 + c]);
    for (int l = 0; l < L; ++l) {
      const int O = m.dec_W[l].rows, I = m.dec_W[l].cols;
      next.assign(O, T(0));
      for (int o = 0; o < O; ++o) {
        const T* wr = m.dec_W[l].data() + static_cast<std::size_t>(o) * I;
        T acc = dc.bias_total[l][o];
        for (int i = 0; i < I; ++i) acc += wr[i] * cur[i];
        next[o] = l + 1 < L ? net::relu(acc) : net::sigmoid(acc);
      }
      cur.swap(next);
    }
    for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = static_cast<float>(cur[c]);
  }
  return out;
}

/// Decodes a flat list of RGB triples (used for LUT baking and tests).
template <typename T>
std::vector<T> decode_pixels(const Model<T>& m, const std::vector<T>& rgb,
                             const std::vector<T>& z, Exec exec = Exec::Serial) {
  if (rgb.size() % 3 != 0) throw ConfigError("decode_pixels: length not a multiple of 3");
  const DecoderCond<T> dc = decoder_condition(m, z);
  const std::int64_t npx = static_cast<std::int64_t>(rgb.size() / 3);
  std::vector<T> out(rgb.size());
  const std::int64_t nblocks = (npx + kPixelBlock - 1) / kPixelBlock;
  const int L = m.n_layers();
  par_for(nblocks, exec, [&](std::int64_t blk) {
    DecodeScratch<T> s(m.cfg);
    const std::int64_t p0 = blk * kPixelBlock;
    const int count = static_cast<int>(std::min<std::int64_t>(kPixelBlock, npx - p0));
    for (int c = 0; c < 3; ++c)
      for (int b = 0; b < kPixelBlock; ++b)
        s.h[0][c * kPixelBlock + b] = b < count ? rgb[(p0 + b) * 3 + c] : T(0);
    detail::forward_block(m, dc, s);
    for (int c = 0; c < 3; ++c)
      for (int b = 0; b < count; ++b)
        out[(p0 + b) * 3 + c] = s.h[L][c * kPixelBlock + b];
  });
  return out;
}

/// Fused forward + backward over an aligned (x, y) pair. Accumulates decoder
/// parameter gradients into `grads` and returns dL/dz. Each output element
/// contributes sign(pred - target) * grad_scale to the backward pass, so the
/// caller picks the loss normalization (e.g. 1 / (elements * batch)).
/// Blocks are walked serially: gradient accumulation order is fixed.
template <typename T>
struct FusedResult {
  double loss_sum = 0;      // sum of |pred - target| over real elements
  std::size_t n_elems = 0;  // real elements (3 * pixels)
  std::vector<T> gz;
};

template <typename T>
FusedResult<T> decode_train_fused(const Model<T>& m, const ImageRGB& x, const ImageRGB& y,
                                  const std::vector<T>& z, T grad_scale, Model<T>& grads) {
  if (!x.valid() || !y.valid()) throw ConfigError("decode_train_fused: invalid image");
  if (x.width != y.width || x.height != y.height)
    throw ConfigError("decode_train_fused: input/target dimensions differ");
  const DecoderCond<T> dc = decoder_condition(m, z);
  const int L = m.n_layers();
  constexpr int B = kPixelBlock;
  const std::int64_t npx = x.pixel_count();
  const std::int64_t nblocks = (npx + B - 1) / B;

  DecodeScratch<T> s(m.cfg);
  std::vector<T> target(3 * B);
  // Pre-activation gradient sums per layer; the conditioning and bias grads
  // are image-wide sums because z is constant across pixels.
  std::vector<std::vector<double>> gpre_sum(L);
  for (int l = 0; l < L; ++l) gpre_sum[l].assign(m.dec_W[l].rows, 0.0);

  FusedResult<T> res;
  res.n_elems = static_cast<std::size_t>(npx) * 3;
  for (std::int64_t blk = 0; blk < nblocks; ++blk) {
    const std::int64_t p0 = blk * B;
    const int count = static_cast<int>(std::min<std::int64_t>(B, npx - p0));
    detail::load_block(x.data.data(), p0, count, s.h[0].data());
    detail::load_block(y.data.data(), p0, count, target.data());
    detail::forward_block(m, dc, s);

    // Output gradient: sign(pred - target) * grad_scale, zero in padded lanes
    // so they contribute nothing to weight gradients.
    const std::vector<T>& pred = s.h[L];
    std::fill(s.g.begin(), s.g.begin() + 3 * B, T(0));
    for (int c = 0; c < 3; ++c) {
      for (int b = 0; b < count; ++b) {
        const T d = pred[c * B + b] - target[c * B + b];
        res.loss_sum += std::abs(static_cast<double>(d));
        s.g[c * B + b] = d > T(0) ? grad_scale : (d < T(0) ? -grad_scale : T(0));
      }
    }
    net::sigmoid_backward_inplace(pred.data(), s.g.data(), 3 * B);

    for (int l = L - 1; l >= 0; --l) {
      const int O = m.dec_W[l].rows;
      for (int o = 0; o < O; ++o) {
        double acc = 0;
        for (int b = 0; b < B; ++b) acc += static_cast<double>(s.g[static_cast<std::size_t>(o) * B + b]);
        gpre_sum[l][o] += acc;
      }
      detail::dense_block_grad_w(grads.dec_W[l], s.g.data(), s.h[l].data());
      if (l > 0) {
        detail::dense_block_grad_in(m.dec_W[l], s.g.data(), s.gprev.data());
        net::relu_backward_inplace(s.h[l].data(), s.gprev.data(), m.dec_W[l].cols * B);
        s.g.swap(s.gprev);
      }
    }
  }

  // Bias grads, conditioning grads, and dL/dz from the per-layer sums.
  res.gz.assign(m.cfg.latent_dim, T(0));
  std::vector<T> gpre_cond;
  for (int l = 0; l < L; ++l) {
    const int O = m.dec_W[l].rows;
    gpre_cond.assign(O, T(0));
    for (int o = 0; o < O; ++o) {
      const T gs = static_cast<T>(gpre_sum[l][o]);
      grads.dec_b[l].v[o] += gs;
      gpre_cond[o] = dc.cond[l][o] > T(0) ? gs : T(0);  // through the cond ReLU
    }
    net::outer_add(grads.cond_W[l], gpre_cond.data(), z.data());
    for (int o = 0; o < O; ++o) grads.cond_b[l].v[o] += gpre_cond[o];
    net::matvec_t_add(m.cond_W[l], gpre_cond.data(), res.gz.data());
  }
  return res;
}

/// Bakes the pixel transform under z into an n x n x n lattice (red index
/// fastest), suitable for trilinear application or .cube export.
template <typename T>
std::vector<float> bake_lut(const Model<T>& m, const std::vector<T>& z, int n,
                            Exec exec = Exec::Serial) {
  if (n < 2) throw ConfigError("bake_lut: lattice size must be >= 2");
  std::vector<T> rgb(static_cast<std::size_t>(n) * n * n * 3);
  std::size_t idx = 0;
  for (int b = 0; b < n; ++b)
    for (int g = 0; g < n; ++g)
      for (int r = 0; r < n; ++r) {
        rgb[idx++] = static_cast<T>(r / double(n - 1));
        rgb[idx++] = static_cast<T>(g / double(n - 1));
        rgb[idx++] = static_cast<T>(b / double(n - 1));
      }
  std::vector<T> dec = decode_pixels(m, rgb, z, exec);
  std::vector<float> out(dec.size());
  for (std::size_t i = 0; i < dec.size(); ++i) out[i] = static_cast<float>(dec[i]);
  return out;
}

/// Trilinear interpolation through a baked lattice.
ImageRGB apply_lut(const std::vector<float>& lut, int n, const ImageRGB& img,
                   Exec exec = Exec::Serial);

/// .cube text export/import (LUT_3D_SIZE header + one RGB triple per line).
void save_cube(const std::string& path, const std::vector<float>& lut, int n,
               const std::string& title = "retouch");
std::pair<std::vector<float>, int> load_cube(const std::string& path);

}  // namespace retouch
