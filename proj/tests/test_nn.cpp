#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "csishield/adamw.hpp"
#include "csishield/grad_check.hpp"
#include "csishield/lstm.hpp"
#include "csishield/nn.hpp"

using namespace csishield;

namespace {

Matrix random_matrix(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.storage()) v = rng.uniform(lo, hi);
  return m;
}

/// Keep test inputs away from the LeakyReLU kink so central differences
/// stay exact.
Matrix random_matrix_off_kink(int r, int c, Rng& rng) {
  Matrix m = random_matrix(r, c, rng);
  for (double& v : m.storage())
    if (std::abs(v) < 0.05) v = v < 0 ? -0.1 : 0.1;
  return m;
}

double weighted_sum(const Matrix& y, const Matrix& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y.storage()[i] * w.storage()[i];
  return acc;
}

}  // namespace

TEST_CASE("linear layer computes y = xW^T + b") {
  Rng rng(1);
  SECTION("identity weights pass the input through") {
    Linear lin;
    lin.init(3, 3, rng, "t");
    lin.W.v.fill(0.0);
    for (int i = 0; i < 3; ++i) lin.W.v(i, i) = 1.0;
    Matrix x = random_matrix(4, 3, rng);
    CHECK(linear_forward(lin, x) == x);
  }
  SECTION("scalar case") {
    Linear lin;
    lin.init(1, 1, rng, "t");
    lin.W.v(0, 0) = 2.0;
    lin.b.v(0, 0) = 3.0;
    Matrix x(1, 1);
    x(0, 0) = 1.0;
    CHECK(linear_forward(lin, x)(0, 0) == Catch::Approx(5.0));
  }
  SECTION("shape mismatch rejected") {
    Linear lin;
    lin.init(3, 2, rng, "t");
    CHECK_THROWS_AS(linear_forward(lin, Matrix(4, 4)), ShapeMismatch);
  }
  SECTION("gradient check") {
    Linear lin;
    lin.init(4, 3, rng, "t");
    ParamTensor x;
    x.init_zero(5, 4, "x");
    x.v = random_matrix(5, 4, rng);
    Matrix w = random_matrix(5, 3, rng);

    auto loss = [&] { return weighted_sum(linear_forward(lin, x.v), w); };
    auto grads = [&] {
      lin.W.zero_grad();
      lin.b.zero_grad();
      x.zero_grad();
      x.g = linear_backward(lin, x.v, w, lin.W.g, lin.b.g);
    };
    ParamTensor* params[] = {&lin.W, &lin.b, &x};
    CHECK(grad_check(loss, grads, params) < 1e-6);
  }
}

TEST_CASE("activation values and gradients") {
  SECTION("leaky relu values") {
    Matrix x(1, 2);
    x(0, 0) = -1.0;
    x(0, 1) = 2.0;
    Matrix y = leaky_relu(x);
    CHECK(y(0, 0) == Catch::Approx(-0.01));
    CHECK(y(0, 1) == Catch::Approx(2.0));
  }
  SECTION("sigmoid at zero") {
    Matrix x(1, 1);
    CHECK(sigmoid(x)(0, 0) == Catch::Approx(0.5));
  }
  SECTION("sigmoid output range") {
    Rng rng(2);
    Matrix x = random_matrix(10, 10, rng, -30, 30);
    Matrix y = sigmoid(x);
    for (double v : y.storage()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  SECTION("gradient checks") {
    Rng rng(3);
    ParamTensor x;
    x.init_zero(4, 6, "x");
    x.v = random_matrix_off_kink(4, 6, rng);
    Matrix w = random_matrix(4, 6, rng);

    auto relu_loss = [&] { return weighted_sum(leaky_relu(x.v), w); };
    auto relu_grads = [&] {
      x.zero_grad();
      x.g = leaky_relu_backward(x.v, w);
    };
    ParamTensor* px[] = {&x};
    CHECK(grad_check(relu_loss, relu_grads, px) < 1e-6);

    auto sig_loss = [&] { return weighted_sum(sigmoid(x.v), w); };
    auto sig_grads = [&] {
      x.zero_grad();
      x.g = sigmoid_backward(sigmoid(x.v), w);
    };
    CHECK(grad_check(sig_loss, sig_grads, px) < 1e-6);
  }
}

TEST_CASE("dropout") {
  Rng rng(5);
  Matrix x = random_matrix(100, 1000, rng, 0.5, 1.5);
  SECTION("p = 0 is exact identity") {
    DropoutMask m = make_dropout_mask(x.rows(), x.cols(), 0.0, rng);
    CHECK(apply_dropout(x, m) == x);
  }
  SECTION("train mode keeps the expected survivor fraction and mean") {
    DropoutMask m = make_dropout_mask(x.rows(), x.cols(), 0.3, rng);
    Matrix y = apply_dropout(x, m);
    long survivors = 0;
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y.storage()[i] != 0.0) ++survivors;
      mean_x += x.storage()[i];
      mean_y += y.storage()[i];
    }
    const double frac = static_cast<double>(survivors) / static_cast<double>(y.size());
    CHECK(frac == Catch::Approx(0.7).margin(0.01));
    CHECK(mean_y / mean_x == Catch::Approx(1.0).margin(0.02));
  }
  SECTION("invalid probability rejected") {
    CHECK_THROWS_AS(make_dropout_mask(2, 2, 1.0, rng), ConfigError);
  }
}

TEST_CASE("layer norm") {
  Rng rng(7);
  SECTION("constant feature row maps to zeros pre-affine") {
    LayerNorm ln;
    ln.init(8, "t");
    Matrix x(1, 8, 3.5);
    LayerNormCache cache;
    Matrix y = layer_norm_forward(ln, x, &cache);
    for (double v : cache.xhat.storage()) CHECK(std::abs(v) < 1e-6);
    for (double v : y.storage()) CHECK(std::abs(v) < 1e-6);  // gain 1, bias 0
  }
  SECTION("rows are standardized pre-affine") {
    LayerNorm ln;
    ln.init(32, "t");
    Matrix x = random_matrix(6, 32, rng, -4, 4);
    LayerNormCache cache;
    layer_norm_forward(ln, x, &cache);
    for (int r = 0; r < 6; ++r) {
      double mean = 0.0, var = 0.0;
      for (double v : cache.xhat.row(r)) mean += v;
      mean /= 32;
      for (double v : cache.xhat.row(r)) var += (v - mean) * (v - mean);
      var /= 32;
      CHECK(std::abs(mean) < 1e-6);
      CHECK(std::abs(var - 1.0) < 1e-5);
    }
  }
  SECTION("gradient check") {
    LayerNorm ln;
    ln.init(5, "t");
    for (double& v : ln.gain.v.storage()) v = rng.uniform(0.5, 1.5);
    for (double& v : ln.bias.v.storage()) v = rng.uniform(-0.3, 0.3);
    ParamTensor x;
    x.init_zero(4, 5, "x");
    x.v = random_matrix(4, 5, rng, -2, 2);
    Matrix w = random_matrix(4, 5, rng);

    auto loss = [&] { return weighted_sum(layer_norm_forward(ln, x.v, nullptr), w); };
    auto grads = [&] {
      ln.gain.zero_grad();
      ln.bias.zero_grad();
      x.zero_grad();
      LayerNormCache cache;
      layer_norm_forward(ln, x.v, &cache);
      x.g = layer_norm_backward(ln, cache, w, ln.gain.g, ln.bias.g);
    };
    ParamTensor* params[] = {&ln.gain, &ln.bias, &x};
    CHECK(grad_check(loss, grads, params) < 1e-4);
  }
}

TEST_CASE("lstm and bilstm") {
  Rng rng(11);
  SECTION("zero weights give all-zero output") {
    BiLstm net;
    net.init(3, 4, rng, "t");
    net.fwd.Wx.v.fill(0);
    net.fwd.Wh.v.fill(0);
    net.fwd.b.v.fill(0);
    net.bwd.Wx.v.fill(0);
    net.bwd.Wh.v.fill(0);
    net.bwd.b.v.fill(0);
    Matrix y = bilstm_forward(net, random_matrix(5, 3, rng), nullptr);
    for (double v : y.storage()) CHECK(v == 0.0);
  }
  SECTION("output width is 2h") {
    BiLstm net;
    net.init(3, 4, rng, "t");
    Matrix y = bilstm_forward(net, random_matrix(5, 3, rng), nullptr);
    CHECK(y.rows() == 5);
    CHECK(y.cols() == 8);
  }
  SECTION("reversal symmetry: swapped blocks on reversed input") {
    BiLstm net;
    net.init(3, 4, rng, "t");
    Matrix x = random_matrix(7, 3, rng);
    Matrix y = bilstm_forward(net, x, nullptr);

    BiLstm swapped;
    swapped.fwd = net.bwd;
    swapped.bwd = net.fwd;
    Matrix y2 = bilstm_forward(swapped, reverse_rows(x), nullptr);

    const int T = 7, h = 4;
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < h; ++j) {
        CHECK(y2(t, j) == Catch::Approx(y(T - 1 - t, h + j)).margin(1e-9));
        CHECK(y2(t, h + j) == Catch::Approx(y(T - 1 - t, j)).margin(1e-9));
      }
    }
  }
  SECTION("gradient check, full output") {
    BiLstm net;
    net.init(3, 4, rng, "t");
    ParamTensor x;
    x.init_zero(3, 3, "x");
    x.v = random_matrix(3, 3, rng);
    Matrix w = random_matrix(3, 8, rng);

    auto loss = [&] { return weighted_sum(bilstm_forward(net, x.v, nullptr), w); };
    std::vector<ParamTensor*> params = {&net.fwd.Wx, &net.fwd.Wh, &net.fwd.b,
                                        &net.bwd.Wx, &net.bwd.Wh, &net.bwd.b, &x};
    auto grads = [&] {
      for (ParamTensor* p : params) p->zero_grad();
      BiLstmCache cache;
      bilstm_forward(net, x.v, &cache);
      x.g = bilstm_backward(net, x.v, cache, w, net.fwd.Wx.g, net.fwd.Wh.g, net.fwd.b.g,
                            net.bwd.Wx.g, net.bwd.Wh.g, net.bwd.b.g);
    };
    CHECK(grad_check(loss, grads, params) < 1e-4);
  }
  SECTION("gradient check, last-row readout only") {
    // exercises the inactive-timestep skip in backpropagation
    BiLstm net;
    net.init(2, 3, rng, "t");
    ParamTensor x;
    x.init_zero(5, 2, "x");
    x.v = random_matrix(5, 2, rng);
    Matrix w = random_matrix(1, 6, rng);

    auto loss = [&] {
      Matrix y = bilstm_forward(net, x.v, nullptr);
      double acc = 0.0;
      for (int j = 0; j < 6; ++j) acc += y(4, j) * w(0, j);
      return acc;
    };
    std::vector<ParamTensor*> params = {&net.fwd.Wx, &net.fwd.Wh, &net.fwd.b,
                                        &net.bwd.Wx, &net.bwd.Wh, &net.bwd.b, &x};
    auto grads = [&] {
      for (ParamTensor* p : params) p->zero_grad();
      BiLstmCache cache;
      Matrix y = bilstm_forward(net, x.v, &cache);
      Matrix dy(y.rows(), y.cols());
      for (int j = 0; j < 6; ++j) dy(4, j) = w(0, j);
      x.g = bilstm_backward(net, x.v, cache, dy, net.fwd.Wx.g, net.fwd.Wh.g, net.fwd.b.g,
                            net.bwd.Wx.g, net.bwd.Wh.g, net.bwd.b.g);
    };
    CHECK(grad_check(loss, grads, params) < 1e-4);
  }
}

TEST_CASE("adamw update") {
  AdamWConfig cfg;
  SECTION("zero gradient and zero decay leave the parameter unchanged") {
    cfg.weight_decay = 0.0;
    Vector p = {1.5};
    Vector g = {0.0};
    AdamWState st;
    adamw_step(p, g, st, cfg);
    CHECK(p[0] == 1.5);
  }
  SECTION("first bias-corrected step moves by about lr") {
    cfg.weight_decay = 0.0;
    cfg.lr = 0.001;
    Vector p = {1.0};
    Vector g = {1.0};
    AdamWState st;
    adamw_step(p, g, st, cfg);
    CHECK(p[0] == Catch::Approx(1.0 - 0.001).margin(1e-9));
  }
  SECTION("decoupled decay alone shrinks by lr*wd*p") {
    cfg.lr = 0.01;
    cfg.weight_decay = 0.1;
    Vector p = {2.0};
    Vector g = {0.0};
    AdamWState st;
    adamw_step(p, g, st, cfg);
    CHECK(p[0] == Catch::Approx(2.0 - 0.01 * 0.1 * 2.0).margin(1e-12));
  }
  SECTION("lr = 0 is the identity") {
    cfg.lr = 0.0;
    ParamTensor a;
    Rng rng(13);
    a.init_uniform(3, 3, 1.0, rng, "a");
    Matrix before = a.v;
    for (double& v : a.g.storage()) v = rng.normal();
    AdamW opt({&a}, cfg);
    opt.step();
    CHECK(a.v == before);
  }
}
