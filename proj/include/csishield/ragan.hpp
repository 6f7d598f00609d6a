#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "csishield/adamw.hpp"
#include "csishield/csi.hpp"
#include "csishield/ingest.hpp"
#include "csishield/lstm.hpp"
#include "csishield/nn.hpp"

namespace csishield {

enum class RunMode { train, eval };

// ---------------------------------------------------------------------------
// Generator: layer_norm -> fc K->d -> dropout -> LeakyReLU -> BiLSTM(d, h)
//            -> layer_norm -> fc 2h->K per timestep -> dropout -> LeakyReLU
//            -> Sigmoid
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  int input_dim = kDataSubcarriers;
  int latent_dim = 256;
  int hidden = 256;
  double dropout = 0.3;
  double leaky_slope = kLeakyReluSlope;
};

class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
    ln_in_.init(cfg.input_dim, "gen.ln_in");
    fc_in_.init(cfg.input_dim, cfg.latent_dim, rng, "gen.fc_in");
    lstm_.init(cfg.latent_dim, cfg.hidden, rng, "gen.lstm");
    ln_mid_.init(2 * cfg.hidden, "gen.ln_mid");
    fc_out_.init(2 * cfg.hidden, cfg.input_dim, rng, "gen.fc_out");
  }

  struct Cache {
    LayerNormCache ln_in;
    Matrix x0;  // ln_in output, fc_in input
    DropoutMask m1;
    Matrix x2;  // post-dropout, pre-LeakyReLU
    Matrix x3;  // BiLSTM input
    BiLstmCache lstm;
    LayerNormCache ln_mid;
    Matrix x5;  // fc_out input
    DropoutMask m2;
    Matrix x7;  // post-dropout, pre-LeakyReLU
    Matrix y;   // sigmoid output
    bool trained = false;
  };

  Matrix forward(const Matrix& x, RunMode mode, Rng* rng, Cache* cache) const {
    if (x.cols() != cfg_.input_dim) throw ShapeMismatch("generator: input width");
    const bool train = mode == RunMode::train;
    if (train && rng == nullptr) throw ConfigError("generator: train mode needs an rng");
    Cache local;
    Cache& cc = cache ? *cache : local;
    cc.trained = train;

    cc.x0 = layer_norm_forward(ln_in_, x, &cc.ln_in);
    Matrix x1 = linear_forward(fc_in_, cc.x0);
    if (train) {
      cc.m1 = make_dropout_mask(x1.rows(), x1.cols(), cfg_.dropout, *rng);
      cc.x2 = apply_dropout(x1, cc.m1);
    } else {
      cc.x2 = std::move(x1);
    }
    cc.x3 = leaky_relu(cc.x2, cfg_.leaky_slope);
    Matrix x4 = bilstm_forward(lstm_, cc.x3, &cc.lstm);
    cc.x5 = layer_norm_forward(ln_mid_, x4, &cc.ln_mid);
    Matrix x6 = linear_forward(fc_out_, cc.x5);
    if (train) {
      cc.m2 = make_dropout_mask(x6.rows(), x6.cols(), cfg_.dropout, *rng);
      cc.x7 = apply_dropout(x6, cc.m2);
    } else {
      cc.x7 = std::move(x6);
    }
    cc.y = sigmoid(leaky_relu(cc.x7, cfg_.leaky_slope));
    return cc.y;
  }

  /// Parameter order matches parameters(); grads must be shaped accordingly.
  Matrix backward(const Matrix& x, const Cache& cc, const Matrix& dy,
                  std::span<Matrix> grads) const {
    Matrix d = sigmoid_backward(cc.y, dy);
    d = leaky_relu_backward(cc.x7, d, cfg_.leaky_slope);
    if (cc.trained) d = dropout_backward(d, cc.m2);
    d = linear_backward(fc_out_, cc.x5, d, grads[12], grads[13]);
    d = layer_norm_backward(ln_mid_, cc.ln_mid, d, grads[10], grads[11]);
    d = bilstm_backward(lstm_, cc.x3, cc.lstm, d, grads[4], grads[5], grads[6], grads[7], grads[8],
                        grads[9]);
    d = leaky_relu_backward(cc.x2, d, cfg_.leaky_slope);
    if (cc.trained) d = dropout_backward(d, cc.m1);
    d = linear_backward(fc_in_, cc.x0, d, grads[2], grads[3]);
    return layer_norm_backward(ln_in_, cc.ln_in, d, grads[0], grads[1]);
  }

  std::vector<ParamTensor*> parameters() {
    return {&ln_in_.gain, &ln_in_.bias, &fc_in_.W,      &fc_in_.b,      &lstm_.fwd.Wx,
            &lstm_.fwd.Wh, &lstm_.fwd.b, &lstm_.bwd.Wx, &lstm_.bwd.Wh,  &lstm_.bwd.b,
            &ln_mid_.gain, &ln_mid_.bias, &fc_out_.W,   &fc_out_.b};
  }
  std::vector<const ParamTensor*> parameters() const {
    return {&ln_in_.gain, &ln_in_.bias, &fc_in_.W,      &fc_in_.b,      &lstm_.fwd.Wx,
            &lstm_.fwd.Wh, &lstm_.fwd.b, &lstm_.bwd.Wx, &lstm_.bwd.Wh,  &lstm_.bwd.b,
            &ln_mid_.gain, &ln_mid_.bias, &fc_out_.W,   &fc_out_.b};
  }
  const GeneratorConfig& config() const { return cfg_; }

 private:
  GeneratorConfig cfg_;
  LayerNorm ln_in_;
  Linear fc_in_;
  BiLstm lstm_;
  LayerNorm ln_mid_;
  Linear fc_out_;
};

// ---------------------------------------------------------------------------
// Discriminator: layer_norm -> BiLSTM(K, h) -> last-timestep readout (2h)
//                -> fc 2h->d -> dropout -> LeakyReLU -> fc d->1 -> raw score
// ---------------------------------------------------------------------------

struct DiscriminatorConfig {
  int input_dim = kDataSubcarriers;
  int hidden = 256;
  int fc_dim = 256;
  double dropout = 0.3;
  double leaky_slope = kLeakyReluSlope;
};

class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
    ln_in_.init(cfg.input_dim, "disc.ln_in");
    lstm_.init(cfg.input_dim, cfg.hidden, rng, "disc.lstm");
    fc1_.init(2 * cfg.hidden, cfg.fc_dim, rng, "disc.fc1");
    fc2_.init(cfg.fc_dim, 1, rng, "disc.fc2");
  }

  struct Cache {
    LayerNormCache ln_in;
    Matrix x0;       // BiLSTM input
    BiLstmCache lstm;
    int rows = 0;
    Matrix readout;  // 1 x 2h
    DropoutMask m;
    Matrix f1;       // post-dropout, pre-LeakyReLU, 1 x d
    Matrix f2;       // fc2 input, 1 x d
    bool trained = false;
  };

  /// Raw critic score (pre-sigmoid); use probability() for the [0,1] view.
  double forward(const Matrix& x, RunMode mode, Rng* rng, Cache* cache) const {
    if (x.cols() != cfg_.input_dim) throw ShapeMismatch("discriminator: input width");
    const bool train = mode == RunMode::train;
    if (train && rng == nullptr) throw ConfigError("discriminator: train mode needs an rng");
    Cache local;
    Cache& cc = cache ? *cache : local;
    cc.trained = train;
    cc.rows = x.rows();

    cc.x0 = layer_norm_forward(ln_in_, x, &cc.ln_in);
    Matrix h = bilstm_forward(lstm_, cc.x0, &cc.lstm);
    cc.readout = Matrix(1, h.cols());
    std::copy(h.row(h.rows() - 1).begin(), h.row(h.rows() - 1).end(), cc.readout.row(0).begin());
    Matrix f0 = linear_forward(fc1_, cc.readout);
    if (train) {
      cc.m = make_dropout_mask(1, f0.cols(), cfg_.dropout, *rng);
      cc.f1 = apply_dropout(f0, cc.m);
    } else {
      cc.f1 = std::move(f0);
    }
    cc.f2 = leaky_relu(cc.f1, cfg_.leaky_slope);
    return linear_forward(fc2_, cc.f2)(0, 0);
  }

  static double probability(double score) { return sigmoid(score); }

  Matrix backward(const Cache& cc, double dscore, std::span<Matrix> grads) const {
    Matrix d1(1, 1);
    d1(0, 0) = dscore;
    Matrix d = linear_backward(fc2_, cc.f2, d1, grads[10], grads[11]);
    d = leaky_relu_backward(cc.f1, d, cfg_.leaky_slope);
    if (cc.trained) d = dropout_backward(d, cc.m);
    d = linear_backward(fc1_, cc.readout, d, grads[8], grads[9]);
    Matrix dh(cc.rows, d.cols());
    std::copy(d.row(0).begin(), d.row(0).end(), dh.row(cc.rows - 1).begin());
    Matrix dx0 = bilstm_backward(lstm_, cc.x0, cc.lstm, dh, grads[2], grads[3], grads[4], grads[5],
                                 grads[6], grads[7]);
    return layer_norm_backward(ln_in_, cc.ln_in, dx0, grads[0], grads[1]);
  }

  std::vector<ParamTensor*> parameters() {
    return {&ln_in_.gain, &ln_in_.bias, &lstm_.fwd.Wx, &lstm_.fwd.Wh, &lstm_.fwd.b,
            &lstm_.bwd.Wx, &lstm_.bwd.Wh, &lstm_.bwd.b, &fc1_.W, &fc1_.b, &fc2_.W, &fc2_.b};
  }
  std::vector<const ParamTensor*> parameters() const {
    return {&ln_in_.gain, &ln_in_.bias, &lstm_.fwd.Wx, &lstm_.fwd.Wh, &lstm_.fwd.b,
            &lstm_.bwd.Wx, &lstm_.bwd.Wh, &lstm_.bwd.b, &fc1_.W, &fc1_.b, &fc2_.W, &fc2_.b};
  }
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  LayerNorm ln_in_;
  BiLstm lstm_;
  Linear fc1_;
  Linear fc2_;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Content loss: mean of per-element MSE and per-element absolute error.
inline double loss_content(const Matrix& generated, const Matrix& clean) {
  if (generated.rows() != clean.rows() || generated.cols() != clean.cols())
    throw ShapeMismatch("loss_content: shape");
  const double n = static_cast<double>(generated.size());
  double mse = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const double d = clean.storage()[i] - generated.storage()[i];
    mse += d * d;
    l1 += std::abs(d);
  }
  return 0.5 * (mse / n + l1 / n);
}

/// d loss_content / d generated.
inline Matrix loss_content_backward(const Matrix& generated, const Matrix& clean) {
  const double n = static_cast<double>(generated.size());
  Matrix d(generated.rows(), generated.cols());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const double diff = generated.storage()[i] - clean.storage()[i];
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    d.storage()[i] = diff / n + 0.5 * sign / n;
  }
  return d;
}

struct RelativisticLoss {
  double value = 0.0;
  Vector d_real;
  Vector d_fake;
};

/// Relativistic average discriminator loss:
///   L_D = -E_r[log s(C_r - mean C_f)] - E_f[log(1 - s(C_f - mean C_r))]
/// computed via softplus for stability, with analytic gradients w.r.t. the
/// raw scores.
inline RelativisticLoss loss_d_relativistic_with_grad(const Vector& scores_real,
                                                      const Vector& scores_fake) {
  if (scores_real.empty() || scores_fake.empty())
    throw EmptyInput("relativistic loss: empty score list");
  const double R = static_cast<double>(scores_real.size());
  const double F = static_cast<double>(scores_fake.size());
  double mr = 0.0, mf = 0.0;
  for (double s : scores_real) mr += s;
  for (double s : scores_fake) mf += s;
  mr /= R;
  mf /= F;

  RelativisticLoss out;
  out.d_real.assign(scores_real.size(), 0.0);
  out.d_fake.assign(scores_fake.size(), 0.0);
  double sum_sig_real = 0.0;  // sum of s(-(C_r - mf))
  double sum_sig_fake = 0.0;  // sum of s(C_f - mr)
  for (std::size_t i = 0; i < scores_real.size(); ++i) {
    const double a = scores_real[i] - mf;
    out.value += softplus(-a) / R;
    sum_sig_real += sigmoid(-a);
  }
  for (std::size_t j = 0; j < scores_fake.size(); ++j) {
    const double b = scores_fake[j] - mr;
    out.value += softplus(b) / F;
    sum_sig_fake += sigmoid(b);
  }
  for (std::size_t i = 0; i < scores_real.size(); ++i) {
    const double a = scores_real[i] - mf;
    out.d_real[i] = -sigmoid(-a) / R - sum_sig_fake / (R * F);
  }
  for (std::size_t j = 0; j < scores_fake.size(); ++j) {
    const double b = scores_fake[j] - mr;
    out.d_fake[j] = sigmoid(b) / F + sum_sig_real / (R * F);
  }
  return out;
}

/// Generator-side mirror: fake samples should look more real than the
/// average real and vice versa.
inline RelativisticLoss loss_g_adversarial_with_grad(const Vector& scores_real,
                                                     const Vector& scores_fake) {
  RelativisticLoss swapped = loss_d_relativistic_with_grad(scores_fake, scores_real);
  RelativisticLoss out;
  out.value = swapped.value;
  out.d_real = std::move(swapped.d_fake);
  out.d_fake = std::move(swapped.d_real);
  return out;
}

inline double loss_d_relativistic(const Vector& scores_real, const Vector& scores_fake) {
  return loss_d_relativistic_with_grad(scores_real, scores_fake).value;
}

inline double loss_g_adversarial(const Vector& scores_real, const Vector& scores_fake) {
  return loss_g_adversarial_with_grad(scores_real, scores_fake).value;
}

inline double loss_generator_total(const Matrix& generated, const Matrix& clean,
                                   const Vector& scores_real, const Vector& scores_fake,
                                   double lambda) {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  return loss_content(generated, clean) + lambda * loss_g_adversarial(scores_real, scores_fake);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int batch_size = 5;
  double lr_g = 0.001;
  double lr_d = 0.0001;
  double lambda = 100.0;
  double dropout = 0.3;
  double weight_decay = 0.01;
  int max_epochs = 500;
  int patience = 20;  // early stopping on validation content loss
  double validation_fraction = 0.2;
  std::uint64_t seed = 1;
  bool cgan_mode = false;
  int seq_len = 0;  // crop pairs to this many packets; 0 keeps all
  int latent_dim = 256;
  int hidden = 256;
  int disc_fc_dim = 256;
  int threads = 1;
};

/// Table-driven hyperparameter ranges used by the grid search and by strict
/// flag validation.
struct GridRanges {
  std::vector<int> batch_sizes{5, 10, 15, 30};
  std::vector<double> dropouts{0.2, 0.3, 0.4};
  std::vector<double> lrs_g{0.0001, 0.001, 0.01, 0.1};
  std::vector<double> lrs_d{0.0001, 0.001, 0.01, 0.1};
  std::vector<double> lambdas{10, 50, 100, 500};

  std::size_t cell_count() const {
    return batch_sizes.size() * dropouts.size() * lrs_g.size() * lrs_d.size() * lambdas.size();
  }
};

inline void validate_against_grid(const TrainConfig& cfg, const GridRanges& ranges = {}) {
  auto in = [](auto v, const auto& set) {
    return std::find(set.begin(), set.end(), v) != set.end();
  };
  if (!in(cfg.batch_size, ranges.batch_sizes))
    throw ConfigError("batch size " + std::to_string(cfg.batch_size) + " outside the grid");
  if (!in(cfg.dropout, ranges.dropouts)) throw ConfigError("dropout outside the grid");
  if (!in(cfg.lr_g, ranges.lrs_g)) throw ConfigError("generator learning rate outside the grid");
  if (!in(cfg.lr_d, ranges.lrs_d)) throw ConfigError("discriminator learning rate outside the grid");
  if (!in(cfg.lambda, ranges.lambdas)) throw ConfigError("lambda outside the grid");
}

struct EpochStats {
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_content = 0.0;
  double g_total = 0.0;
  double val_content = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // 0-based index of the best validation epoch
  double best_val = 0.0;
};

struct NormalizedPair {
  Matrix noisy;
  Matrix clean;
  ScaleRecord noisy_scale;
  ScaleRecord clean_scale;
  Material material = Material::acrylic;
  int day = 1;
};

inline Matrix crop_rows(const Matrix& m, int rows) {
  if (rows <= 0 || rows >= m.rows()) return m;
  Matrix out(rows, m.cols());
  for (int r = 0; r < rows; ++r)
    std::copy(m.row(r).begin(), m.row(r).end(), out.row(r).begin());
  return out;
}

inline std::vector<NormalizedPair> normalize_pairs(const std::vector<PairedSample>& pairs,
                                                   int seq_len = 0) {
  std::vector<NormalizedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    NormalizedPair np;
    auto [n01, ns] = normalize_minmax(crop_rows(p.noisy, seq_len));
    auto [c01, cs] = normalize_minmax(crop_rows(p.clean, seq_len));
    if (ns.degenerate || cs.degenerate)
      throw DataError("degenerate (constant) acquisition in pair " + p.noisy_id);
    np.noisy = std::move(n01);
    np.clean = std::move(c01);
    np.noisy_scale = ns;
    np.clean_scale = cs;
    np.material = p.material;
    np.day = p.day;
    out.push_back(std::move(np));
  }
  return out;
}

namespace detail {

/// Run fn(i) for i in [0, n) on up to `threads` workers with a fixed block
/// assignment. All outputs must go to per-index storage.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline void require_finite(double v, long step, const std::string& what) {
  if (!std::isfinite(v)) throw NonFiniteLoss(step, what + " = " + std::to_string(v));
}

}  // namespace detail

struct TrainResult {
  Generator generator;
  Discriminator discriminator;
  TrainHistory history;
};

/// Adversarial training: per step the discriminator sees the clean batch as
/// real and detached generator outputs as fake, then the generator is
/// updated on content + lambda * relativistic loss. Deterministic in
/// cfg.seed for any thread count.
inline TrainResult train(const std::vector<PairedSample>& pairs, const TrainConfig& cfg) {
  if (pairs.empty()) throw EmptyInput("train: no pairs");
  if (cfg.cgan_mode)
    throw ConfigError("cgan mode requires a conditioning design; none is configured");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (cfg.lambda < 0) throw ConfigError("lambda must be >= 0");
  if (cfg.dropout < 0 || cfg.dropout >= 1) throw ConfigError("dropout must be in [0,1)");

  const std::vector<NormalizedPair> data = normalize_pairs(pairs, cfg.seq_len);
  const int K = data.front().noisy.cols();

  Rng root(cfg.seed);
  GeneratorConfig gcfg{K, cfg.latent_dim, cfg.hidden, cfg.dropout, kLeakyReluSlope};
  DiscriminatorConfig dcfg{K, cfg.hidden, cfg.disc_fc_dim, cfg.dropout, kLeakyReluSlope};
  Rng gen_rng = root.fork("gen-init");
  Rng disc_rng = root.fork("disc-init");
  TrainResult result{Generator(gcfg, gen_rng), Discriminator(dcfg, disc_rng), {}};
  Generator& gen = result.generator;
  Discriminator& disc = result.discriminator;

  // Train/validation split on pair indices.
  std::vector<int> indices(data.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);
  Rng split_rng = root.fork("split");
  shuffle(indices, split_rng);
  int n_val = static_cast<int>(std::lround(cfg.validation_fraction * static_cast<double>(data.size())));
  n_val = std::clamp(n_val, data.size() > 1 ? 1 : 0, static_cast<int>(data.size()) - 1);
  if (cfg.validation_fraction <= 0.0) n_val = 0;
  std::vector<int> val_idx(indices.begin(), indices.begin() + n_val);
  std::vector<int> train_idx(indices.begin() + n_val, indices.end());
  if (train_idx.empty()) throw ConfigError("validation fraction leaves no training pairs");

  AdamWConfig g_opt_cfg{cfg.lr_g, 0.9, 0.999, 1e-8, cfg.weight_decay};
  AdamWConfig d_opt_cfg{cfg.lr_d, 0.9, 0.999, 1e-8, cfg.weight_decay};
  AdamW opt_g(gen.parameters(), g_opt_cfg);
  AdamW opt_d(disc.parameters(), d_opt_cfg);

  auto validation_loss = [&]() {
    const std::vector<int>& idx = val_idx.empty() ? train_idx : val_idx;
    double acc = 0.0;
    for (int i : idx) {
      Matrix y = gen.forward(data[i].noisy, RunMode::eval, nullptr, nullptr);
      acc += loss_content(y, data[i].clean);
    }
    return acc / static_cast<double>(idx.size());
  };

  Generator best_gen = gen;
  Discriminator best_disc = disc;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_best = 0;
  long step = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng order_rng = root.fork("epoch:" + std::to_string(epoch));
    std::vector<int> order = train_idx;
    shuffle(order, order_rng);

    EpochStats stats;
    int steps_in_epoch = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      const int B = static_cast<int>(std::min<std::size_t>(cfg.batch_size, order.size() - start));
      std::vector<const NormalizedPair*> batch(B);
      for (int i = 0; i < B; ++i) batch[i] = &data[order[start + i]];

      // --- discriminator update (generator outputs detached) ---
      std::vector<Discriminator::Cache> d_real_cache(B), d_fake_cache(B);
      Vector sr(B), sf(B);
      const std::string step_tag = std::to_string(step);
      detail::parallel_for(B, cfg.threads, [&](int i) {
        Rng item = root.fork("d-step:" + step_tag + ":" + std::to_string(i));
        Matrix fake = gen.forward(batch[i]->noisy, RunMode::train, &item, nullptr);
        sr[i] = disc.forward(batch[i]->clean, RunMode::train, &item, &d_real_cache[i]);
        sf[i] = disc.forward(fake, RunMode::train, &item, &d_fake_cache[i]);
      });
      RelativisticLoss d_loss = loss_d_relativistic_with_grad(sr, sf);
      detail::require_finite(d_loss.value, step, "discriminator loss");

      std::vector<std::vector<Matrix>> d_bufs(B);
      detail::parallel_for(B, cfg.threads, [&](int i) {
        d_bufs[i] = make_grad_buffer(disc.parameters());
        disc.backward(d_real_cache[i], d_loss.d_real[i], d_bufs[i]);
        disc.backward(d_fake_cache[i], d_loss.d_fake[i], d_bufs[i]);
      });
      opt_d.zero_grad();
      for (int i = 0; i < B; ++i) accumulate_grads(disc.parameters(), d_bufs[i]);
      opt_d.step();

      // --- generator update ---
      std::vector<Generator::Cache> g_cache(B);
      std::vector<Discriminator::Cache> df_cache(B);
      Vector sr2(B), sf2(B);
      Vector content(B);
      detail::parallel_for(B, cfg.threads, [&](int i) {
        Rng item = root.fork("g-step:" + step_tag + ":" + std::to_string(i));
        Matrix fake = gen.forward(batch[i]->noisy, RunMode::train, &item, &g_cache[i]);
        sf2[i] = disc.forward(fake, RunMode::train, &item, &df_cache[i]);
        sr2[i] = disc.forward(batch[i]->clean, RunMode::train, &item, nullptr);
        content[i] = loss_content(fake, batch[i]->clean);
      });
      RelativisticLoss g_adv = loss_g_adversarial_with_grad(sr2, sf2);
      double g_content = 0.0;
      for (double c : content) g_content += c;
      g_content /= B;
      const double g_total = g_content + cfg.lambda * g_adv.value;
      detail::require_finite(g_total, step, "generator loss");

      std::vector<std::vector<Matrix>> g_bufs(B);
      detail::parallel_for(B, cfg.threads, [&](int i) {
        g_bufs[i] = make_grad_buffer(gen.parameters());
        // adversarial gradient reaches the generator through the critic
        std::vector<Matrix> d_scratch = make_grad_buffer(disc.parameters());
        Matrix dfake = disc.backward(df_cache[i], cfg.lambda * g_adv.d_fake[i], d_scratch);
        Matrix dc = loss_content_backward(g_cache[i].y, batch[i]->clean);
        for (std::size_t k = 0; k < dfake.size(); ++k)
          dfake.storage()[k] += dc.storage()[k] / static_cast<double>(B);
        gen.backward(batch[i]->noisy, g_cache[i], dfake, g_bufs[i]);
      });
      opt_g.zero_grad();
      for (int i = 0; i < B; ++i) accumulate_grads(gen.parameters(), g_bufs[i]);
      opt_g.step();

      stats.d_loss += d_loss.value;
      stats.g_adv += g_adv.value;
      stats.g_content += g_content;
      stats.g_total += g_total;
      ++steps_in_epoch;
    }
    stats.d_loss /= steps_in_epoch;
    stats.g_adv /= steps_in_epoch;
    stats.g_content /= steps_in_epoch;
    stats.g_total /= steps_in_epoch;
    stats.val_content = validation_loss();
    detail::require_finite(stats.val_content, step, "validation content loss");
    result.history.epochs.push_back(stats);

    if (stats.val_content < best_val) {
      best_val = stats.val_content;
      best_epoch = epoch;
      best_gen = gen;
      best_disc = disc;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  result.generator = std::move(best_gen);
  result.discriminator = std::move(best_disc);
  result.history.best_epoch = best_epoch;
  result.history.best_val = best_val;
  return result;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

struct DenoiseResult {
  AmplitudeMatrix output;  // in [0,1]
  ScaleRecord scale;       // of the noisy input, for optional rescaling
};

inline DenoiseResult denoise_amplitudes(const Generator& gen, const AmplitudeMatrix& amp) {
  auto [norm, scale] = normalize_minmax(amp);
  if (scale.degenerate) throw DataError("degenerate acquisition cannot be denoised");
  return {gen.forward(norm, RunMode::eval, nullptr, nullptr), scale};
}

/// Full pipeline on one capture: subcarrier selection, amplitude extraction,
/// scaling, generator pass.
inline DenoiseResult denoise(const Generator& gen, const Acquisition& acq) {
  return denoise_amplitudes(gen, data_amplitudes(acq));
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

struct GridCell {
  int index = 0;
  int batch_size = 0;
  double dropout = 0.0;
  double lr_g = 0.0;
  double lr_d = 0.0;
  double lambda = 0.0;
  double val_content = 0.0;
};

struct GridSearchResult {
  std::vector<GridCell> cells;   // enumeration order
  std::vector<GridCell> ranked;  // ascending validation content loss
};

/// Enumerate every combination (batch x dropout x lr_g x lr_d x lambda),
/// train each and rank by validation content loss. A journal file makes the
/// sweep resumable: finished cells are skipped and their recorded losses
/// reused, which reproduces the same final table because every cell is
/// deterministic in (base config, cell index).
inline GridSearchResult grid_search(const std::vector<PairedSample>& pairs,
                                    const GridRanges& ranges, const TrainConfig& base,
                                    const std::filesystem::path& journal_path = {}) {
  GridSearchResult result;
  std::map<int, double> done;
  if (!journal_path.empty() && std::filesystem::exists(journal_path)) {
    std::ifstream in(journal_path);
    int idx;
    double val;
    while (in >> idx >> val) done[idx] = val;
  }
  std::ofstream journal;
  if (!journal_path.empty())
    journal.open(journal_path, std::ios::app);

  int index = 0;
  for (int bs : ranges.batch_sizes) {
    for (double dr : ranges.dropouts) {
      for (double lg : ranges.lrs_g) {
        for (double ld : ranges.lrs_d) {
          for (double lam : ranges.lambdas) {
            GridCell cell{index, bs, dr, lg, ld, lam, 0.0};
            if (auto it = done.find(index); it != done.end()) {
              cell.val_content = it->second;
            } else {
              TrainConfig cfg = base;
              cfg.batch_size = bs;
              cfg.dropout = dr;
              cfg.lr_g = lg;
              cfg.lr_d = ld;
              cfg.lambda = lam;
              TrainResult r = train(pairs, cfg);
              cell.val_content = r.history.best_val;
              if (journal.is_open()) {
                journal << index << " " << std::setprecision(17) << cell.val_content << "\n";
                journal.flush();
              }
            }
            result.cells.push_back(cell);
            ++index;
          }
        }
      }
    }
  }
  result.ranked = result.cells;
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const GridCell& a, const GridCell& b) { return a.val_content < b.val_content; });
  return result;
}

inline std::string grid_results_csv(const GridSearchResult& r) {
  std::ostringstream out;
  out << "rank,cell,batch_size,dropout,lr_g,lr_d,lambda,val_content\n";
  for (std::size_t i = 0; i < r.ranked.size(); ++i) {
    const GridCell& c = r.ranked[i];
    out << i + 1 << "," << c.index << "," << c.batch_size << "," << c.dropout << "," << c.lr_g
        << "," << c.lr_d << "," << c.lambda << "," << std::setprecision(17) << c.val_content
        << "\n";
  }
  return out.str();
}

}  // namespace csishield
