#pragma once

#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "csishield/dae.hpp"
#include "csishield/ingest.hpp"
#include "csishield/ragan.hpp"
#include "csishield/svm.hpp"

namespace csishield {

// ---------------------------------------------------------------------------
// Features and metrics
// ---------------------------------------------------------------------------

/// Per-subcarrier mean and standard deviation over all packets, concatenated
/// (so 104 values for a 52-subcarrier spectrum). Row-permutation invariant.
inline Vector featurize(const AmplitudeMatrix& amp) {
  if (amp.empty()) throw EmptyInput("featurize: empty matrix");
  const int n = amp.rows();
  const int K = amp.cols();
  Vector out(2 * K, 0.0);
  for (int c = 0; c < K; ++c) {
    double mean = 0.0;
    for (int r = 0; r < n; ++r) mean += amp(r, c);
    mean /= n;
    double var = 0.0;
    for (int r = 0; r < n; ++r) var += (amp(r, c) - mean) * (amp(r, c) - mean);
    var /= n;
    out[c] = mean;
    out[K + c] = std::sqrt(var);
  }
  return out;
}

/// Mean of squared differences over all elements; callers are expected to
/// pass matrices on the common 0-to-1 scale.
inline double normalized_mse(const AmplitudeMatrix& a, const AmplitudeMatrix& b) {
  return mean_squared_difference(a, b);
}

/// Dataset-level figure: average of per-pair values.
inline double dataset_normalized_mse(const std::vector<double>& per_pair) {
  if (per_pair.empty()) throw EmptyInput("dataset_normalized_mse: no pairs");
  double acc = 0.0;
  for (double v : per_pair) acc += v;
  return acc / static_cast<double>(per_pair.size());
}

// ---------------------------------------------------------------------------
// Classification report
// ---------------------------------------------------------------------------

struct EvalReport {
  int n_classes = 0;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
  double accuracy = 0.0;
  Vector precision;  // per class
  Vector recall;     // per class
  double normalized_mse = 0.0;  // filled by pipelines that track pairs
  int total = 0;
};

inline EvalReport evaluate_predictions(const std::vector<int>& truth,
                                       const std::vector<int>& predicted, int n_classes) {
  if (truth.size() != predicted.size()) throw ShapeMismatch("evaluate_predictions: sizes differ");
  if (truth.empty()) throw EmptyInput("evaluate_predictions: no samples");
  EvalReport r;
  r.n_classes = n_classes;
  r.total = static_cast<int>(truth.size());
  r.confusion.assign(n_classes, std::vector<int>(n_classes, 0));
  int correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++r.confusion[truth[i]][predicted[i]];
    if (truth[i] == predicted[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  r.precision.assign(n_classes, 0.0);
  r.recall.assign(n_classes, 0.0);
  for (int c = 0; c < n_classes; ++c) {
    int col = 0, row = 0;
    for (int t = 0; t < n_classes; ++t) {
      col += r.confusion[t][c];
      row += r.confusion[c][t];
    }
    r.precision[c] = col > 0 ? static_cast<double>(r.confusion[c][c]) / col : 0.0;
    r.recall[c] = row > 0 ? static_cast<double>(r.confusion[c][c]) / row : 0.0;
  }
  return r;
}

inline std::string confusion_csv(const EvalReport& r,
                                 const std::vector<std::string>& class_names) {
  std::ostringstream out;
  out << "true\\predicted";
  for (const auto& n : class_names) out << "," << n;
  out << "\n";
  for (int t = 0; t < r.n_classes; ++t) {
    out << class_names[t];
    for (int p = 0; p < r.n_classes; ++p) out << "," << r.confusion[t][p];
    out << "\n";
  }
  return out.str();
}

inline std::string eval_report_text(const EvalReport& r,
                                    const std::vector<std::string>& class_names) {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "samples " << r.total << "\n";
  out << "accuracy " << r.accuracy << "\n";
  out << "normalized_mse " << r.normalized_mse << "\n";
  for (int c = 0; c < r.n_classes; ++c)
    out << "class " << class_names[c] << " precision " << r.precision[c] << " recall "
        << r.recall[c] << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Experiment protocol: train on shielded spectra, test on restored ones
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  TrainConfig ragan;
  DaeConfig dae;
  double svm_c = 10.0;
  double svm_gamma = 0.0;  // <= 0 selects the median heuristic
  int seq_len = 0;         // crop every acquisition to this many packets
  std::vector<int> train_days = {1, 2, 3, 4, 5, 6, 7};
  std::vector<int> test_days = {8, 9, 10};
  bool include_background = true;  // 5-class by default, 4-class without it
};

struct AblationRow {
  std::string model;
  double accuracy = 0.0;
  bool available = true;
};

struct AblationResult {
  EvalReport ragan_report;
  EvalReport raw_report;
  EvalReport dae_report;
  EvalReport clean_report;  // clean-on-clean control
  double mse_noisy = 0.0;
  double mse_ragan = 0.0;
  double mse_dae = 0.0;
  std::vector<AblationRow> table;
  TrainHistory ragan_history;
};

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "model,accuracy\n";
  for (const auto& r : rows) {
    out << r.model << ",";
    if (r.available)
      out << std::setprecision(6) << r.accuracy;
    else
      out << "unavailable";
    out << "\n";
  }
  return out.str();
}

namespace detail {

inline int class_label(Material m, bool include_background) {
  const int idx = static_cast<int>(m);
  if (!include_background && m == Material::background)
    throw ConfigError("background sample in a 4-class run");
  return idx;
}

}  // namespace detail

/// Table-4-style comparison on one dataset: the adversarially trained
/// restorer, the per-packet autoencoder and the classifier on raw noisy
/// spectra, all judged by an SVM trained on shielded spectra only.
inline AblationResult run_ablation(const std::vector<Acquisition>& acquisitions,
                                   const ExperimentConfig& cfg) {
  auto in_days = [](const std::vector<int>& days, int d) {
    return std::find(days.begin(), days.end(), d) != days.end();
  };

  std::vector<Acquisition> shielded, unshielded;
  for (const Acquisition& a : acquisitions) {
    if (!cfg.include_background && a.material == Material::background) continue;
    (a.condition == Condition::shielded ? shielded : unshielded).push_back(a);
  }
  if (shielded.empty() || unshielded.empty())
    throw EmptyInput("run_ablation: need both shielded and unshielded acquisitions");

  PairingResult paired = pair_acquisitions(shielded, unshielded);
  std::vector<PairedSample> train_pairs, test_pairs;
  for (auto& p : paired.pairs)
    (in_days(cfg.train_days, p.day) ? train_pairs : test_pairs).push_back(std::move(p));
  if (train_pairs.empty() || test_pairs.empty())
    throw ConfigError("run_ablation: day split leaves an empty train or test set");

  AblationResult result;

  // Models are trained on the training days only.
  TrainConfig rcfg = cfg.ragan;
  rcfg.seq_len = cfg.seq_len;
  TrainResult ragan = train(train_pairs, rcfg);
  result.ragan_history = ragan.history;

  DaeConfig dcfg = cfg.dae;
  dcfg.seq_len = cfg.seq_len;
  Dae dae = dae_train(train_pairs, dcfg);

  // SVM training features come from shielded training-day spectra.
  std::vector<Vector> train_features;
  std::vector<int> train_labels;
  for (const Acquisition& a : shielded) {
    if (!in_days(cfg.train_days, a.day)) continue;
    auto [amp01, scale] = normalize_minmax(crop_rows(data_amplitudes(a), cfg.seq_len));
    if (scale.degenerate) throw DataError("degenerate shielded acquisition " + a.id);
    train_features.push_back(featurize(amp01));
    train_labels.push_back(detail::class_label(a.material, cfg.include_background));
  }
  const double gamma =
      cfg.svm_gamma > 0.0 ? cfg.svm_gamma : median_heuristic_gamma(train_features);
  SvmModel svm = svm_train(train_features, train_labels, gamma, cfg.svm_c);

  // Test-day evaluation on raw noisy, restored and autoencoded spectra.
  std::vector<int> truth, pred_raw, pred_ragan, pred_dae;
  std::vector<double> mse_noisy, mse_ragan, mse_dae;
  for (const PairedSample& p : test_pairs) {
    auto [noisy01, ns] = normalize_minmax(crop_rows(p.noisy, cfg.seq_len));
    auto [clean01, cs] = normalize_minmax(crop_rows(p.clean, cfg.seq_len));
    if (ns.degenerate || cs.degenerate) throw DataError("degenerate test acquisition");
    const Matrix restored = ragan.generator.forward(noisy01, RunMode::eval, nullptr, nullptr);
    const Matrix autoencoded = dae_denoise(dae, noisy01);

    const int label = detail::class_label(p.material, cfg.include_background);
    truth.push_back(label);
    pred_raw.push_back(svm_predict(svm, featurize(noisy01)));
    pred_ragan.push_back(svm_predict(svm, featurize(restored)));
    pred_dae.push_back(svm_predict(svm, featurize(autoencoded)));
    mse_noisy.push_back(normalized_mse(noisy01, clean01));
    mse_ragan.push_back(normalized_mse(restored, clean01));
    mse_dae.push_back(normalized_mse(autoencoded, clean01));
  }

  // Clean-on-clean control from shielded test-day spectra.
  std::vector<int> clean_truth, clean_pred;
  for (const Acquisition& a : shielded) {
    if (!in_days(cfg.test_days, a.day)) continue;
    auto [amp01, scale] = normalize_minmax(crop_rows(data_amplitudes(a), cfg.seq_len));
    if (scale.degenerate) continue;
    clean_truth.push_back(detail::class_label(a.material, cfg.include_background));
    clean_pred.push_back(svm_predict(svm, featurize(amp01)));
  }

  const int n_classes = static_cast<int>(kAllMaterials.size());
  result.raw_report = evaluate_predictions(truth, pred_raw, n_classes);
  result.ragan_report = evaluate_predictions(truth, pred_ragan, n_classes);
  result.dae_report = evaluate_predictions(truth, pred_dae, n_classes);
  result.clean_report = evaluate_predictions(clean_truth, clean_pred, n_classes);
  result.mse_noisy = dataset_normalized_mse(mse_noisy);
  result.mse_ragan = dataset_normalized_mse(mse_ragan);
  result.mse_dae = dataset_normalized_mse(mse_dae);
  result.raw_report.normalized_mse = result.mse_noisy;
  result.ragan_report.normalized_mse = result.mse_ragan;
  result.dae_report.normalized_mse = result.mse_dae;

  result.table = {
      {"bilstm_ragan_svm", result.ragan_report.accuracy, true},
      {"bilstm_cgan_svm", 0.0, false},  // no conditioning design configured
      {"dae_svm", result.dae_report.accuracy, true},
      {"raw_svm", result.raw_report.accuracy, true},
  };
  return result;
}

inline std::vector<std::string> material_class_names() {
  std::vector<std::string> names;
  for (Material m : kAllMaterials) names.emplace_back(to_string(m));
  return names;
}

}  // namespace csishield
