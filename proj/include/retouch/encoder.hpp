#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "retouch/image.hpp"
#include "retouch/model.hpp"
#include "retouch/netcore.hpp"
#include "retouch/parallel.hpp"

namespace retouch {

/// Bilinear resample of an image to a side x side grid, sampling at grid
/// centers (half-pixel convention, clamped at borders). Interpolation runs in
/// double; results are cast to T. Returns side*side*3 interleaved RGB.
template <typename T>
std::vector<T> resample_grid(const ImageRGB& img, int side) {
  if (!img.valid()) throw ConfigError("resample_grid: invalid image");
  std::vector<T> out(static_cast<std::size_t>(side) * side * 3);
  const double sx = static_cast<double>(img.width) / side;
  const double sy = static_cast<double>(img.height) / side;
  for (int gy = 0; gy < side; ++gy) {
    double v = (gy + 0.5) * sy - 0.5;
    double y0f = std::floor(v);
    double fy = v - y0f;
    int y0 = std::clamp(static_cast<int>(y0f), 0, img.height - 1);
    int y1 = std::clamp(y0 + 1, 0, img.height - 1);
    if (y0f < 0) fy = 0.0;  // clamped above the top row: no blend
    for (int gx = 0; gx < side; ++gx) {
      double u = (gx + 0.5) * sx - 0.5;
      double x0f = std::floor(u);
      double fx = u - x0f;
      int x0 = std::clamp(static_cast<int>(x0f), 0, img.width - 1);
      int x1 = std::clamp(x0 + 1, 0, img.width - 1);
      if (x0f < 0) fx = 0.0;
      const float* p00 = img.px(x0, y0);
      const float* p10 = img.px(x1, y0);
      const float* p01 = img.px(x0, y1);
      const float* p11 = img.px(x1, y1);
      T* dst = out.data() + (static_cast<std::size_t>(gy) * side + gx) * 3;
      for (int c = 0; c < 3; ++c) {
        double top = (1.0 - fx) * p00[c] + fx * p10[c];
        double bot = (1.0 - fx) * p01[c] + fx * p11[c];
        dst[c] = static_cast<T>((1.0 - fy) * top + fy * bot);
      }
    }
  }
  return out;
}

/// Per-branch forward state kept for the backward pass.
template <typename T>
struct BranchCache {
  std::vector<T> rgb;          // grid^2 x 3 inputs
  std::vector<T> h1;           // grid^2 x embed_hidden, post-ReLU
  std::vector<double> h1_sum;  // embed_hidden, sum of h1 over grid pixels
  std::vector<T> pooled;       // branch_dim mean embedding
};

template <typename T>
struct EncodeCache {
  BranchCache<T> bx, by;
  std::vector<T> concat;  // 2 * branch_dim
};

namespace detail {

/// Runs the shared pixel-embed MLP over one branch's grid and mean-pools.
/// The embed loop has independent per-pixel writes and may run in parallel;
/// pooling is a fixed-order serial reduction in double, so results are
/// identical under both execution policies.
template <typename T>
void encode_branch(const Model<T>& m, const ImageRGB& img, Exec exec, BranchCache<T>& bc) {
  const int n = m.cfg.grid * m.cfg.grid;
  const int eh = m.cfg.embed_hidden;
  const int bd = m.cfg.branch_dim;
  bc.rgb = resample_grid<T>(img, m.cfg.grid);
  bc.h1.assign(static_cast<std::size_t>(n) * eh, T(0));
  std::vector<T> h2(static_cast<std::size_t>(n) * bd);
  par_for(n, exec, [&](std::int64_t p) {
    const T* rgb = bc.rgb.data() + p * 3;
    T* h1 = bc.h1.data() + p * eh;
    net::matvec(m.enc_embed1_W, rgb, h1);
    for (int i = 0; i < eh; ++i) h1[i] = net::relu(h1[i] + m.enc_embed1_b.v[i]);
    T* e = h2.data() + p * bd;
    net::matvec(m.enc_embed2_W, h1, e);
    for (int i = 0; i < bd; ++i) e[i] += m.enc_embed2_b.v[i];
  });
  bc.h1_sum.assign(eh, 0.0);
  std::vector<double> pool(bd, 0.0);
  for (int p = 0; p < n; ++p) {
    const T* h1 = bc.h1.data() + static_cast<std::size_t>(p) * eh;
    const T* e = h2.data() + static_cast<std::size_t>(p) * bd;
    for (int i = 0; i < eh; ++i) bc.h1_sum[i] += static_cast<double>(h1[i]);
    for (int i = 0; i < bd; ++i) pool[i] += static_cast<double>(e[i]);
  }
  bc.pooled.resize(bd);
  for (int i = 0; i < bd; ++i) bc.pooled[i] = static_cast<T>(pool[i] / n);
}

}  // namespace detail

/// z = proj(concat(pool(embed(x)), pool(embed(y)))). Both branches share the
/// embed weights.
template <typename T>
std::vector<T> encode(const Model<T>& m, const ImageRGB& x, const ImageRGB& y,
                      EncodeCache<T>& cache, Exec exec = Exec::Serial) {
  const int bd = m.cfg.branch_dim;
  detail::encode_branch(m, x, exec, cache.bx);
  detail::encode_branch(m, y, exec, cache.by);
  cache.concat.resize(2 * static_cast<std::size_t>(bd));
  std::copy(cache.bx.pooled.begin(), cache.bx.pooled.end(), cache.concat.begin());
  std::copy(cache.by.pooled.begin(), cache.by.pooled.end(), cache.concat.begin() + bd);
  std::vector<T> z(m.cfg.latent_dim);
  net::matvec(m.enc_proj_W, cache.concat.data(), z.data());
  for (int i = 0; i < m.cfg.latent_dim; ++i) z[i] += m.enc_proj_b.v[i];
  return z;
}

template <typename T>
std::vector<T> encode(const Model<T>& m, const ImageRGB& x, const ImageRGB& y,
                      Exec exec = Exec::Serial) {
  EncodeCache<T> cache;
  return encode(m, x, y, cache, exec);
}

namespace detail {

/// Mean pooling makes the embed-output gradient identical for every grid
/// pixel, so the second embed layer's weight gradient collapses to a single
/// outer product with the summed hidden activations.
template <typename T>
void encode_branch_backward(const Model<T>& m, const BranchCache<T>& bc,
                            const T* g_pooled, Model<T>& grads) {
  const int n = m.cfg.grid * m.cfg.grid;
  const int eh = m.cfg.embed_hidden;
  const int bd = m.cfg.branch_dim;
  std::vector<T> ge2(bd);  // gradient at each pixel's embed output
  for (int i = 0; i < bd; ++i) {
    ge2[i] = g_pooled[i] / static_cast<T>(n);
    grads.enc_embed2_b.v[i] += g_pooled[i];  // n pixels x ge2
  }
  std::vector<T> h1_sum(eh);
  for (int i = 0; i < eh; ++i) h1_sum[i] = static_cast<T>(bc.h1_sum[i]);
  net::outer_add(grads.enc_embed2_W, ge2.data(), h1_sum.data());
  std::vector<T> u(eh, T(0));  // shared pre-mask hidden gradient
  net::matvec_t_add(m.enc_embed2_W, ge2.data(), u.data());
  std::vector<T> gh1(eh);
  for (int p = 0; p < n; ++p) {
    const T* h1 = bc.h1.data() + static_cast<std::size_t>(p) * eh;
    const T* rgb = bc.rgb.data() + static_cast<std::size_t>(p) * 3;
    for (int i = 0; i < eh; ++i) gh1[i] = h1[i] > T(0) ? u[i] : T(0);
    net::outer_add(grads.enc_embed1_W, gh1.data(), rgb);
    for (int i = 0; i < eh; ++i) grads.enc_embed1_b.v[i] += gh1[i];
  }
}

}  // namespace detail

/// Accumulates encoder parameter gradients given dL/dz.
template <typename T>
void encode_backward(const Model<T>& m, const EncodeCache<T>& cache, const std::vector<T>& gz,
                     Model<T>& grads) {
  const int bd = m.cfg.branch_dim;
  if (static_cast<int>(gz.size()) != m.cfg.latent_dim)
    throw ConfigError("encode_backward: latent gradient size mismatch");
  net::outer_add(grads.enc_proj_W, gz.data(), cache.concat.data());
  for (int i = 0; i < m.cfg.latent_dim; ++i) grads.enc_proj_b.v[i] += gz[i];
  std::vector<T> gconcat(2 * static_cast<std::size_t>(bd), T(0));
  net::matvec_t_add(m.enc_proj_W, gz.data(), gconcat.data());
  detail::encode_branch_backward(m, cache.bx, gconcat.data(), grads);
  detail::encode_branch_backward(m, cache.by, gconcat.data() + bd, grads);
}

}  // namespace retouch
