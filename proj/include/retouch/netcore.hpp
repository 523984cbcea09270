#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "retouch/common.hpp"

namespace retouch::net {

template <typename T>
struct Tensor {
  int rows = 0, cols = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, T(0)) {}

  std::size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }
  T& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(rows, cols);
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

// y = W x (+ y0)
template <typename T>
void matvec(const Tensor<T>& W, const T* x, T* y) {
  for (int r = 0; r < W.rows; ++r) {
    const T* wr = W.data() + static_cast<std::size_t>(r) * W.cols;
    T acc = T(0);
    for (int c = 0; c < W.cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// gx += W^T g
template <typename T>
void matvec_t_add(const Tensor<T>& W, const T* g, T* gx) {
  for (int r = 0; r < W.rows; ++r) {
    const T* wr = W.data() + static_cast<std::size_t>(r) * W.cols;
    T gr = g[r];
    for (int c = 0; c < W.cols; ++c) gx[c] += wr[c] * gr;
  }
}

// gW += g x^T
template <typename T>
void outer_add(Tensor<T>& gW, const T* g, const T* x) {
  for (int r = 0; r < gW.rows; ++r) {
    T* wr = gW.data() + static_cast<std::size_t>(r) * gW.cols;
    T gr = g[r];
    for (int c = 0; c < gW.cols; ++c) wr[c] += gr * x[c];
  }
}

template <typename T>
inline T relu(T x) {
  return x > T(0) ? x : T(0);
}

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void relu_inplace(T* v, int n) {
  for (int i = 0; i < n; ++i) v[i] = relu(v[i]);
}

/// grad *= relu'(pre); masks by the activated output (post > 0 <=> pre > 0,
/// with relu'(0) = 0).
template <typename T>
void relu_backward_inplace(const T* activated, T* grad, int n) {
  for (int i = 0; i < n; ++i)
    if (!(activated[i] > T(0))) grad[i] = T(0);
}

template <typename T>
void sigmoid_inplace(T* v, int n) {
  for (int i = 0; i < n; ++i) v[i] = sigmoid(v[i]);
}

/// grad *= s(1-s) where s is the activated output.
template <typename T>
void sigmoid_backward_inplace(const T* activated, T* grad, int n) {
  for (int i = 0; i < n; ++i) grad[i] *= activated[i] * (T(1) - activated[i]);
}

/// Fully connected layer. W is out x in, b is out x 1. forward() caches its
/// input for the following backward(); the model fast paths bypass the cache
/// and use the free functions above with externally owned activations.
template <typename T>
struct Dense {
  Tensor<T> W, b;
  Tensor<T> gW, gb;

  Dense() = default;
  Dense(int out, int in) : W(out, in), b(out, 1), gW(out, in), gb(out, 1) {}

  int in_dim() const { return W.cols; }
  int out_dim() const { return W.rows; }

  std::vector<T> forward(const std::vector<T>& in) {
    if (static_cast<int>(in.size()) != in_dim())
      throw ConfigError("dense_forward: input length " + std::to_string(in.size()) +
                        " != in dim " + std::to_string(in_dim()));
    cached_in_ = in;
    has_cache_ = true;
    std::vector<T> out(out_dim());
    matvec(W, in.data(), out.data());
    for (int r = 0; r < out_dim(); ++r) out[r] += b.v[r];
    return out;
  }

  /// Returns grad w.r.t. the input; accumulates gW, gb.
  std::vector<T> backward(const std::vector<T>& grad_out) {
    if (!has_cache_) throw UsageError("dense_backward called before forward");
    if (static_cast<int>(grad_out.size()) != out_dim())
      throw ConfigError("dense_backward: grad length mismatch");
    outer_add(gW, grad_out.data(), cached_in_.data());
    for (int r = 0; r < out_dim(); ++r) gb.v[r] += grad_out[r];
    std::vector<T> grad_in(in_dim(), T(0));
    matvec_t_add(W, grad_out.data(), grad_in.data());
    return grad_in;
  }

  void zero_grads() {
    gW.zero();
    gb.zero();
  }

 private:
  std::vector<T> cached_in_;
  bool has_cache_ = false;
};

/// Mean absolute error and its subgradient w.r.t. pred (sign(0) = 0).
/// The reduction runs in double regardless of T.
template <typename T>
struct L1Result {
  double loss = 0;
  std::vector<T> grad;
};

template <typename T>
L1Result<T> l1_loss(const std::vector<T>& pred, const std::vector<T>& target) {
  if (pred.size() != target.size())
    throw ConfigError("l1_loss: size mismatch");
  L1Result<T> r;
  r.grad.resize(pred.size());
  double sum = 0;
  const T inv_n = T(1) / static_cast<T>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    T d = pred[i] - target[i];
    sum += std::abs(static_cast<double>(d));
    r.grad[i] = d > T(0) ? inv_n : (d < T(0) ? -inv_n : T(0));
  }
  r.loss = sum / static_cast<double>(pred.size());
  return r;
}

/// Adam with bias correction. step() refuses to touch the parameters if any
/// gradient entry is non-finite and reports the offending tensor.
template <typename T>
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long long t = 0;
  std::vector<std::vector<T>> m, v;
  std::string last_error;

  void attach(const std::vector<std::pair<std::string, Tensor<T>*>>& params) {
    m.clear();
    v.clear();
    for (auto& [name, tp] : params) {
      m.emplace_back(tp->size(), T(0));
      v.emplace_back(tp->size(), T(0));
    }
  }

  bool step(const std::vector<std::pair<std::string, Tensor<T>*>>& params,
            const std::vector<std::pair<std::string, Tensor<T>*>>& grads,
            double lr_override = -1.0) {
    if (params.size() != grads.size() || params.size() != m.size())
      throw ConfigError("adam_step: parameter/gradient list mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
      for (T g : grads[i].second->v) {
        if (!std::isfinite(static_cast<double>(g))) {
          last_error = "non-finite gradient in " + grads[i].first;
          return false;
        }
      }
    }
    ++t;
    const double a = lr_override >= 0 ? lr_override : lr;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& p = *params[i].second;
      const Tensor<T>& g = *grads[i].second;
      auto& mi = m[i];
      auto& vi = v[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        double gj = static_cast<double>(g.v[j]);
        double mj = beta1 * static_cast<double>(mi[j]) + (1.0 - beta1) * gj;
        double vj = beta2 * static_cast<double>(vi[j]) + (1.0 - beta2) * gj * gj;
        mi[j] = static_cast<T>(mj);
        vi[j] = static_cast<T>(vj);
        p.v[j] -= static_cast<T>(a * (mj / bc1) / (std::sqrt(vj / bc2) + eps));
      }
    }
    return true;
  }
};

/// He-uniform fan-in init for layers feeding ReLU.
template <typename T>
void init_he_uniform(Tensor<T>& W, Rng& rng) {
  double limit = std::sqrt(6.0 / W.cols);
  for (auto& w : W.v) w = static_cast<T>(rng.uniform(-limit, limit));
}

/// Xavier-uniform init for linear projections and the sigmoid output layer.
template <typename T>
void init_xavier_uniform(Tensor<T>& W, Rng& rng) {
  double limit = std::sqrt(6.0 / (W.cols + W.rows));
  for (auto& w : W.v) w = static_cast<T>(rng.uniform(-limit, limit));
}

}  // namespace retouch::net
