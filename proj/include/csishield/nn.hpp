#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "csishield/matrix.hpp"
#include "csishield/rng.hpp"

namespace csishield {

/// A learnable tensor: values plus a gradient accumulator of the same shape.
/// Vectors are stored as 1 x n matrices.
struct ParamTensor {
  std::string name;
  Matrix v;
  Matrix g;

  void init_zero(int rows, int cols, std::string n) {
    name = std::move(n);
    v = Matrix(rows, cols);
    g = Matrix(rows, cols);
  }

  void init_uniform(int rows, int cols, double bound, Rng& rng, std::string n) {
    init_zero(rows, cols, std::move(n));
    for (double& x : v.storage()) x = rng.uniform(-bound, bound);
  }

  void zero_grad() { g.fill(0.0); }
  std::size_t numel() const { return v.size(); }
};

/// A batch of sequences; every item is (timesteps x features).
using SequenceBatch = std::vector<Matrix>;

inline std::vector<Matrix> make_grad_buffer(const std::vector<ParamTensor*>& params) {
  std::vector<Matrix> buf;
  buf.reserve(params.size());
  for (const ParamTensor* p : params) buf.emplace_back(p->v.rows(), p->v.cols());
  return buf;
}

/// Fixed-order reduction into ParamTensor::g; call in ascending buffer order
/// so results never depend on worker scheduling.
inline void accumulate_grads(const std::vector<ParamTensor*>& params, const std::vector<Matrix>& buf) {
  for (std::size_t i = 0; i < params.size(); ++i) add_inplace(params[i]->g, buf[i]);
}


// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

constexpr double kLeakyReluSlope = 0.01;

inline Matrix leaky_relu(const Matrix& x, double slope = kLeakyReluSlope) {
  Matrix y = x;
  for (double& v : y.storage()) v = v >= 0.0 ? v : slope * v;
  return y;
}

/// dx given the forward input.
inline Matrix leaky_relu_backward(const Matrix& x, const Matrix& dy,
                                  double slope = kLeakyReluSlope) {
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (x.storage()[i] < 0.0) dx.storage()[i] *= slope;
  return dx;
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline Matrix sigmoid(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.storage()) v = sigmoid(v);
  return y;
}

/// dx from the forward *output* y = sigmoid(x).
inline Matrix sigmoid_backward(const Matrix& y, const Matrix& dy) {
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    dx.storage()[i] *= y.storage()[i] * (1.0 - y.storage()[i]);
  return dx;
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

// ---------------------------------------------------------------------------
// Dropout (inverted: survivors scaled by 1/(1-p) so eval needs no scaling)
// ---------------------------------------------------------------------------

struct DropoutMask {
  Matrix scale;  // 0 for dropped entries, 1/(1-p) for survivors
  double p = 0.0;
};

inline DropoutMask make_dropout_mask(int rows, int cols, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0,1)");
  DropoutMask m{Matrix(rows, cols), p};
  const double keep = 1.0 / (1.0 - p);
  for (double& v : m.scale.storage()) v = (p > 0.0 && rng.uniform() < p) ? 0.0 : keep;
  return m;
}

inline Matrix apply_dropout(const Matrix& x, const DropoutMask& m) {
  Matrix y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.storage()[i] *= m.scale.storage()[i];
  return y;
}

inline Matrix dropout_backward(const Matrix& dy, const DropoutMask& m) {
  return apply_dropout(dy, m);
}

// ---------------------------------------------------------------------------
// Fully connected layer, applied per timestep: y = x W^T + b
// ---------------------------------------------------------------------------

struct Linear {
  ParamTensor W;  // (out, in)
  ParamTensor b;  // (1, out)

  void init(int in, int out, Rng& rng, const std::string& prefix) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    W.init_uniform(out, in, bound, rng, prefix + ".W");
    b.init_zero(1, out, prefix + ".b");
  }
  int in_dim() const { return W.v.cols(); }
  int out_dim() const { return W.v.rows(); }
};

inline Matrix linear_forward(const Linear& lin, const Matrix& x) {
  if (x.cols() != lin.in_dim()) throw ShapeMismatch("linear: input feature dim");
  Matrix y = matmul_nt(x, lin.W.v);
  for (int r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (int c = 0; c < y.cols(); ++c) row[c] += lin.b.v(0, c);
  }
  return y;
}

/// Accumulates dW/db into the provided sinks and returns dx.
inline Matrix linear_backward(const Linear& lin, const Matrix& x, const Matrix& dy, Matrix& dW,
                              Matrix& db) {
  matmul_tn_acc(dW, dy, x);  // dW += dy^T x
  for (int r = 0; r < dy.rows(); ++r) {
    auto row = dy.row(r);
    for (int c = 0; c < dy.cols(); ++c) db(0, c) += row[c];
  }
  return matmul(dy, lin.W.v);  // dx = dy W
}

// ---------------------------------------------------------------------------
// Layer normalization over the feature dimension of every row
// ---------------------------------------------------------------------------

constexpr double kLayerNormEps = 1e-5;

struct LayerNorm {
  ParamTensor gain;  // (1, dim)
  ParamTensor bias;  // (1, dim)

  void init(int dim, const std::string& prefix) {
    gain.init_zero(1, dim, prefix + ".gain");
    gain.v.fill(1.0);
    bias.init_zero(1, dim, prefix + ".bias");
  }
  int dim() const { return gain.v.cols(); }
};

struct LayerNormCache {
  Matrix xhat;      // normalized pre-affine values
  Vector inv_std;   // per row
};

inline Matrix layer_norm_forward(const LayerNorm& ln, const Matrix& x, LayerNormCache* cache) {
  const int d = x.cols();
  if (d != ln.dim()) throw ShapeMismatch("layer_norm: feature dim");
  if (d < 2) throw ShapeMismatch("layer_norm: needs at least 2 features");
  Matrix y(x.rows(), d);
  if (cache) {
    cache->xhat = Matrix(x.rows(), d);
    cache->inv_std.assign(x.rows(), 0.0);
  }
  for (int r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= d;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= d;
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    for (int c = 0; c < d; ++c) {
      const double xh = (row[c] - mean) * inv_std;
      if (cache) cache->xhat(r, c) = xh;
      y(r, c) = xh * ln.gain.v(0, c) + ln.bias.v(0, c);
    }
    if (cache) cache->inv_std[r] = inv_std;
  }
  return y;
}

inline Matrix layer_norm_backward(const LayerNorm& ln, const LayerNormCache& cache,
                                  const Matrix& dy, Matrix& dgain, Matrix& dbias) {
  const int d = dy.cols();
  Matrix dx(dy.rows(), d);
  for (int r = 0; r < dy.rows(); ++r) {
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (int c = 0; c < d; ++c) {
      const double dxhat = dy(r, c) * ln.gain.v(0, c);
      mean_dxhat += dxhat;
      mean_dxhat_xhat += dxhat * cache.xhat(r, c);
      dgain(0, c) += dy(r, c) * cache.xhat(r, c);
      dbias(0, c) += dy(r, c);
    }
    mean_dxhat /= d;
    mean_dxhat_xhat /= d;
    const double inv_std = cache.inv_std[r];
    for (int c = 0; c < d; ++c) {
      const double dxhat = dy(r, c) * ln.gain.v(0, c);
      dx(r, c) = inv_std * (dxhat - mean_dxhat - cache.xhat(r, c) * mean_dxhat_xhat);
    }
  }
  return dx;
}

}  // namespace csishield
