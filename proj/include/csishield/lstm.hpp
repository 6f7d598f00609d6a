#pragma once

#include <cmath>
#include <string>

#include "csishield/nn.hpp"

namespace csishield {

/// One LSTM direction. Gates are packed [input, forget, candidate, output]
/// along the 4h axis; the standard gated cell is used:
///   i,f,o = sigmoid(.), g = tanh(.)
///   c_t = f .* c_{t-1} + i .* g,   h_t = o .* tanh(c_t)
struct LstmParams {
  ParamTensor Wx;  // (4h, in)
  ParamTensor Wh;  // (4h, h)
  ParamTensor b;   // (1, 4h)

  void init(int in, int hidden, Rng& rng, const std::string& prefix) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    Wx.init_uniform(4 * hidden, in, bound, rng, prefix + ".Wx");
    Wh.init_uniform(4 * hidden, hidden, bound, rng, prefix + ".Wh");
    b.init_uniform(1, 4 * hidden, bound, rng, prefix + ".b");
  }
  int in_dim() const { return Wx.v.cols(); }
  int hidden() const { return Wh.v.cols(); }
};

struct LstmCache {
  Matrix gates;   // (T, 4h), post-activation
  Matrix c;       // (T, h)
  Matrix tanh_c;  // (T, h)
  Matrix h;       // (T, h)
};

/// Forward pass over all timesteps; initial h and c are zero. The
/// input-side contributions are computed as one matrix product before the
/// recurrence.
inline Matrix lstm_forward(const LstmParams& p, const Matrix& x, LstmCache* cache) {
  if (x.cols() != p.in_dim()) throw ShapeMismatch("lstm: input feature dim");
  const int T = x.rows();
  const int h = p.hidden();

  Matrix z = matmul_nt(x, p.Wx.v);  // (T, 4h)
  for (int t = 0; t < T; ++t) {
    auto row = z.row(t);
    for (int c = 0; c < 4 * h; ++c) row[c] += p.b.v(0, c);
  }

  LstmCache local;
  LstmCache& cc = cache ? *cache : local;
  cc.gates = Matrix(T, 4 * h);
  cc.c = Matrix(T, h);
  cc.tanh_c = Matrix(T, h);
  cc.h = Matrix(T, h);

  Matrix h_prev(1, h);
  Matrix zt(1, 4 * h);
  for (int t = 0; t < T; ++t) {
    std::copy(z.row(t).begin(), z.row(t).end(), zt.row(0).begin());
    if (t > 0) {
      std::copy(cc.h.row(t - 1).begin(), cc.h.row(t - 1).end(), h_prev.row(0).begin());
      detail::map(zt).noalias() += detail::map(h_prev) * detail::map(p.Wh.v).transpose();
    }
    for (int j = 0; j < h; ++j) {
      const double gi = sigmoid(zt(0, j));
      const double gf = sigmoid(zt(0, h + j));
      const double gg = std::tanh(zt(0, 2 * h + j));
      const double go = sigmoid(zt(0, 3 * h + j));
      const double c_prev = t > 0 ? cc.c(t - 1, j) : 0.0;
      const double c_now = gf * c_prev + gi * gg;
      const double tc = std::tanh(c_now);
      cc.gates(t, j) = gi;
      cc.gates(t, h + j) = gf;
      cc.gates(t, 2 * h + j) = gg;
      cc.gates(t, 3 * h + j) = go;
      cc.c(t, j) = c_now;
      cc.tanh_c(t, j) = tc;
      cc.h(t, j) = go * tc;
    }
  }
  return cc.h;
}

namespace detail {
inline bool row_is_zero(const Matrix& m, int r) {
  for (double v : m.row(r))
    if (v != 0.0) return false;
  return true;
}
}  // namespace detail

/// Backpropagation through time. Accumulates parameter gradients into the
/// sinks and returns dx. Timesteps before the first nonzero output gradient
/// are skipped (they cannot influence the loss).
inline Matrix lstm_backward(const LstmParams& p, const Matrix& x, const LstmCache& cc,
                            const Matrix& dh_out, Matrix& dWx, Matrix& dWh, Matrix& db) {
  const int T = x.rows();
  const int h = p.hidden();
  if (dh_out.rows() != T || dh_out.cols() != h) throw ShapeMismatch("lstm_backward: dh shape");

  Matrix dz(T, 4 * h);  // pre-activation gate gradients
  Matrix dh(1, h);
  Matrix dc(1, h);
  Matrix dzt(1, 4 * h);
  bool active = false;
  for (int t = T - 1; t >= 0; --t) {
    if (!active) {
      if (detail::row_is_zero(dh_out, t)) continue;
      active = true;
    }
    for (int j = 0; j < h; ++j) dh(0, j) += dh_out(t, j);
    for (int j = 0; j < h; ++j) {
      const double gi = cc.gates(t, j);
      const double gf = cc.gates(t, h + j);
      const double gg = cc.gates(t, 2 * h + j);
      const double go = cc.gates(t, 3 * h + j);
      const double tc = cc.tanh_c(t, j);
      const double c_prev = t > 0 ? cc.c(t - 1, j) : 0.0;

      const double d_o = dh(0, j) * tc;
      double d_c = dc(0, j) + dh(0, j) * go * (1.0 - tc * tc);
      const double d_i = d_c * gg;
      const double d_g = d_c * gi;
      const double d_f = d_c * c_prev;

      dz(t, j) = d_i * gi * (1.0 - gi);
      dz(t, h + j) = d_f * gf * (1.0 - gf);
      dz(t, 2 * h + j) = d_g * (1.0 - gg * gg);
      dz(t, 3 * h + j) = d_o * go * (1.0 - go);
      dc(0, j) = d_c * gf;  // to c_{t-1}
    }
    // dh_{t-1} = dz_t Wh
    std::copy(dz.row(t).begin(), dz.row(t).end(), dzt.row(0).begin());
    detail::map(dh).noalias() = detail::map(dzt) * detail::map(p.Wh.v);
  }

  // Parameter gradients in three matrix products.
  matmul_tn_acc(dWx, dz, x);  // (4h,T)(T,in)
  if (T > 1) {
    // dz rows 1..T-1 pair with h rows 0..T-2
    Matrix dz_tail(T - 1, 4 * h);
    Matrix h_head(T - 1, h);
    for (int t = 1; t < T; ++t)
      std::copy(dz.row(t).begin(), dz.row(t).end(), dz_tail.row(t - 1).begin());
    for (int t = 0; t < T - 1; ++t)
      std::copy(cc.h.row(t).begin(), cc.h.row(t).end(), h_head.row(t).begin());
    matmul_tn_acc(dWh, dz_tail, h_head);
  }
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < 4 * h; ++c) db(0, c) += dz(t, c);
  return matmul(dz, p.Wx.v);  // dx
}

// ---------------------------------------------------------------------------
// Bidirectional wrapper
// ---------------------------------------------------------------------------

/// Bi-LSTM: the forward block reads t = 0..T-1, the backward block reads the
/// reversed sequence; output row t is [h_fwd[t], h_bwd[t]] of width 2h.
struct BiLstm {
  LstmParams fwd;
  LstmParams bwd;

  void init(int in, int hidden, Rng& rng, const std::string& prefix) {
    fwd.init(in, hidden, rng, prefix + ".fwd");
    bwd.init(in, hidden, rng, prefix + ".bwd");
  }
  int in_dim() const { return fwd.in_dim(); }
  int hidden() const { return fwd.hidden(); }
};

struct BiLstmCache {
  LstmCache f;
  LstmCache b;
  Matrix x_rev;
};

inline Matrix reverse_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r)
    std::copy(x.row(r).begin(), x.row(r).end(), y.row(x.rows() - 1 - r).begin());
  return y;
}

inline Matrix bilstm_forward(const BiLstm& p, const Matrix& x, BiLstmCache* cache) {
  const int T = x.rows();
  const int h = p.hidden();
  BiLstmCache local;
  BiLstmCache& cc = cache ? *cache : local;
  cc.x_rev = reverse_rows(x);
  const Matrix hf = lstm_forward(p.fwd, x, &cc.f);
  const Matrix hb = lstm_forward(p.bwd, cc.x_rev, &cc.b);
  Matrix out(T, 2 * h);
  for (int t = 0; t < T; ++t) {
    std::copy(hf.row(t).begin(), hf.row(t).end(), out.row(t).begin());
    // backward-direction state aligned to original time t
    auto dst = out.row(t);
    auto src = hb.row(T - 1 - t);
    std::copy(src.begin(), src.end(), dst.begin() + h);
  }
  return out;
}

struct BiLstmGrads {
  Matrix dWx_f, dWh_f, db_f;
  Matrix dWx_b, dWh_b, db_b;
};

inline Matrix bilstm_backward(const BiLstm& p, const Matrix& x, const BiLstmCache& cc,
                              const Matrix& dy, Matrix& dWx_f, Matrix& dWh_f, Matrix& db_f,
                              Matrix& dWx_b, Matrix& dWh_b, Matrix& db_b) {
  const int T = x.rows();
  const int h = p.hidden();
  if (dy.cols() != 2 * h) throw ShapeMismatch("bilstm_backward: dy width");
  Matrix dhf(T, h);
  Matrix dhb(T, h);  // indexed in reversed time, matching the bwd pass
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < h; ++j) {
      dhf(t, j) = dy(t, j);
      dhb(T - 1 - t, j) = dy(t, h + j);
    }
  }
  Matrix dx = lstm_backward(p.fwd, x, cc.f, dhf, dWx_f, dWh_f, db_f);
  Matrix dx_rev = lstm_backward(p.bwd, cc.x_rev, cc.b, dhb, dWx_b, dWh_b, db_b);
  const Matrix dx_b = reverse_rows(dx_rev);
  add_inplace(dx, dx_b);
  return dx;
}

}  // namespace csishield
