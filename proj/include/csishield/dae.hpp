#pragma once

#include <cstdint>
#include <vector>

#include "csishield/adamw.hpp"
#include "csishield/ingest.hpp"
#include "csishield/nn.hpp"
#include "csishield/rng.hpp"

namespace csishield {

/// Per-packet denoising autoencoder baseline: a plain MLP on 52-value rows
/// with a mirrored bottleneck, LeakyReLU throughout and a Sigmoid output.
/// It sees one packet at a time and therefore no temporal context.
struct DaeConfig {
  std::vector<int> encoder = {128, 64, 32, 16};  // mirrored back to the input width
  double lr = 0.001;
  double weight_decay = 0.0;
  int epochs = 40;
  int batch_rows = 128;
  int rows_per_epoch = 4000;
  std::uint64_t seed = 1;
  int seq_len = 0;  // crop acquisitions like the adversarial trainer does
};

class Dae {
 public:
  Dae() = default;
  Dae(int input_dim, const std::vector<int>& encoder, Rng& rng) {
    std::vector<int> widths;
    widths.push_back(input_dim);
    for (int w : encoder) widths.push_back(w);
    for (int i = static_cast<int>(encoder.size()) - 2; i >= 0; --i) widths.push_back(encoder[i]);
    widths.push_back(input_dim);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      Linear lin;
      lin.init(widths[i], widths[i + 1], rng, "dae.fc" + std::to_string(i));
      layers_.push_back(std::move(lin));
    }
  }

  /// Rows of x are independent samples.
  Matrix forward(const Matrix& x, std::vector<Matrix>* cache = nullptr) const {
    Matrix h = x;
    if (cache) cache->clear();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (cache) cache->push_back(h);  // layer input
      Matrix z = linear_forward(layers_[i], h);
      if (cache) cache->push_back(z);  // pre-activation
      h = i + 1 < layers_.size() ? leaky_relu(z) : sigmoid(z);
    }
    if (cache) cache->push_back(h);
    return h;
  }

  void backward(const std::vector<Matrix>& cache, const Matrix& dy, std::span<Matrix> grads) {
    Matrix d = sigmoid_backward(cache.back(), dy);
    for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
      const Matrix& input = cache[2 * i];
      const Matrix& pre = cache[2 * i + 1];
      if (i + 1 < static_cast<int>(layers_.size())) d = leaky_relu_backward(pre, d);
      d = linear_backward(layers_[i], input, d, grads[2 * i], grads[2 * i + 1]);
    }
  }

  std::vector<ParamTensor*> parameters() {
    std::vector<ParamTensor*> out;
    for (Linear& l : layers_) {
      out.push_back(&l.W);
      out.push_back(&l.b);
    }
    return out;
  }

 private:
  std::vector<Linear> layers_;
};

/// Supervised row-wise training on (noisy packet -> clean packet) pairs,
/// plain MSE objective, deterministic in the seed.
inline Dae dae_train(const std::vector<PairedSample>& pairs, const DaeConfig& cfg) {
  if (pairs.empty()) throw EmptyInput("dae_train: no pairs");

  // Collect normalized row pairs once.
  std::vector<std::pair<Vector, Vector>> rows;
  for (const auto& p : pairs) {
    auto [n01, ns] = normalize_minmax(p.noisy);
    auto [c01, cs] = normalize_minmax(p.clean);
    if (ns.degenerate || cs.degenerate) throw DataError("degenerate acquisition in DAE pair");
    const int limit = cfg.seq_len > 0 ? std::min(cfg.seq_len, n01.rows()) : n01.rows();
    for (int r = 0; r < limit; ++r) {
      rows.emplace_back(Vector(n01.row(r).begin(), n01.row(r).end()),
                        Vector(c01.row(r).begin(), c01.row(r).end()));
    }
  }

  const int K = static_cast<int>(rows.front().first.size());
  Rng root(cfg.seed);
  Rng init_rng = root.fork("dae-init");
  Dae dae(K, cfg.encoder, init_rng);
  AdamW opt(dae.parameters(), AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng pick = root.fork("epoch:" + std::to_string(epoch));
    const int n_rows = std::min<int>(cfg.rows_per_epoch, static_cast<int>(rows.size()));
    int done = 0;
    while (done < n_rows) {
      const int B = std::min(cfg.batch_rows, n_rows - done);
      Matrix x(B, K), target(B, K);
      for (int i = 0; i < B; ++i) {
        const auto& rp = rows[pick.below(rows.size())];
        std::copy(rp.first.begin(), rp.first.end(), x.row(i).begin());
        std::copy(rp.second.begin(), rp.second.end(), target.row(i).begin());
      }
      std::vector<Matrix> cache;
      Matrix y = dae.forward(x, &cache);
      Matrix dy(B, K);
      for (std::size_t i = 0; i < dy.size(); ++i)
        dy.storage()[i] = 2.0 * (y.storage()[i] - target.storage()[i]) / static_cast<double>(dy.size());
      opt.zero_grad();
      std::vector<Matrix> grads = make_grad_buffer(dae.parameters());
      dae.backward(cache, dy, grads);
      accumulate_grads(dae.parameters(), grads);
      opt.step();
      done += B;
    }
  }
  return dae;
}

inline Matrix dae_denoise(const Dae& dae, const Matrix& amp01) { return dae.forward(amp01); }

}  // namespace csishield
