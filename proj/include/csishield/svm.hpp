#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "csishield/error.hpp"
#include "csishield/matrix.hpp"

namespace csishield {

/// gamma = 1/(2 sigma^2) with sigma the median pairwise training distance; a
/// standard bandwidth choice when nothing better is known.
inline double median_heuristic_gamma(const std::vector<Vector>& features) {
  std::vector<double> dists;
  dists.reserve(features.size() * (features.size() - 1) / 2);
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t j = i + 1; j < features.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < features[i].size(); ++k) {
        const double d = features[i][k] - features[j][k];
        d2 += d * d;
      }
      dists.push_back(std::sqrt(d2));
    }
  }
  if (dists.empty()) return 1.0;
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  const double sigma = dists[dists.size() / 2];
  if (sigma <= 0.0) return 1.0;
  return 1.0 / (2.0 * sigma * sigma);
}

inline double rbf_kernel(const Vector& a, const Vector& b, double gamma) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

namespace detail {

/// Binary soft-margin SVM trained with sequential minimal optimization.
/// All index choices are deterministic: sweeps ascend, the second-choice
/// heuristic breaks ties on the lowest index.
class SmoSolver {
 public:
  SmoSolver(const std::vector<const Vector*>& x, const std::vector<double>& y, double gamma,
            double C)
      : x_(x), y_(y), gamma_(gamma), c_(C), n_(static_cast<int>(x.size())) {
    alpha_.assign(n_, 0.0);
    errors_.assign(n_, 0.0);
    kernel_ = Matrix(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j) {
        const double k = rbf_kernel(*x_[i], *x_[j], gamma_);
        kernel_(i, j) = k;
        kernel_(j, i) = k;
      }
    for (int i = 0; i < n_; ++i) errors_[i] = -y_[i];  // f = 0 initially
  }

  void solve() {
    int num_changed = 0;
    bool examine_all = true;
    int sweeps = 0;
    const int max_sweeps = 400;  // degenerate label sets must still terminate
    while ((num_changed > 0 || examine_all) && sweeps++ < max_sweeps) {
      num_changed = 0;
      for (int i = 0; i < n_; ++i) {
        if (!examine_all && (alpha_[i] <= 0.0 || alpha_[i] >= c_)) continue;
        num_changed += examine(i);
      }
      if (examine_all)
        examine_all = false;
      else if (num_changed == 0)
        examine_all = true;
    }
  }

  const Vector& alpha() const { return alpha_; }
  double bias() const { return b_; }

 private:
  static constexpr double kTol = 1e-3;
  static constexpr double kEps = 1e-12;

  int examine(int i2) {
    const double y2 = y_[i2];
    const double a2 = alpha_[i2];
    const double e2 = errors_[i2];
    const double r2 = e2 * y2;
    if (!((r2 < -kTol && a2 < c_) || (r2 > kTol && a2 > 0.0))) return 0;

    // best |E1 - E2| among non-bound multipliers, lowest index on ties
    int best = -1;
    double best_gap = -1.0;
    for (int i = 0; i < n_; ++i) {
      if (alpha_[i] <= 0.0 || alpha_[i] >= c_) continue;
      const double gap = std::abs(errors_[i] - e2);
      if (gap > best_gap + kEps) {
        best_gap = gap;
        best = i;
      }
    }
    if (best >= 0 && take_step(best, i2)) return 1;
    for (int i = 0; i < n_; ++i) {
      if (alpha_[i] <= 0.0 || alpha_[i] >= c_) continue;
      if (take_step(i, i2)) return 1;
    }
    for (int i = 0; i < n_; ++i)
      if (take_step(i, i2)) return 1;
    return 0;
  }

  bool take_step(int i1, int i2) {
    if (i1 == i2) return false;
    const double a1_old = alpha_[i1];
    const double a2_old = alpha_[i2];
    const double y1 = y_[i1];
    const double y2 = y_[i2];
    const double e1 = errors_[i1];
    const double e2 = errors_[i2];
    const double s = y1 * y2;

    double lo, hi;
    if (s < 0) {
      lo = std::max(0.0, a2_old - a1_old);
      hi = std::min(c_, c_ + a2_old - a1_old);
    } else {
      lo = std::max(0.0, a1_old + a2_old - c_);
      hi = std::min(c_, a1_old + a2_old);
    }
    if (lo >= hi) return false;

    const double k11 = kernel_(i1, i1);
    const double k12 = kernel_(i1, i2);
    const double k22 = kernel_(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;
    double a2_new;
    if (eta > kEps) {
      a2_new = std::clamp(a2_old + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // flat direction: pick the better interval endpoint
      const double f1 = y1 * e1 - a1_old * k11 - s * a2_old * k12;
      const double f2 = y2 * e2 - s * a1_old * k12 - a2_old * k22;
      const double l1 = a1_old + s * (a2_old - lo);
      const double h1 = a1_old + s * (a2_old - hi);
      const double obj_lo =
          l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12;
      const double obj_hi =
          h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12;
      if (obj_lo < obj_hi - kEps)
        a2_new = lo;
      else if (obj_lo > obj_hi + kEps)
        a2_new = hi;
      else
        return false;
    }
    if (std::abs(a2_new - a2_old) < kEps * (a2_new + a2_old + kEps)) return false;
    const double a1_new = a1_old + s * (a2_old - a2_new);

    const double d1 = y1 * (a1_new - a1_old);
    const double d2 = y2 * (a2_new - a2_old);
    const double b_old = b_;
    const double b1 = b_old - e1 - d1 * k11 - d2 * k12;
    const double b2 = b_old - e2 - d1 * k12 - d2 * k22;
    if (a1_new > 0.0 && a1_new < c_)
      b_ = b1;
    else if (a2_new > 0.0 && a2_new < c_)
      b_ = b2;
    else
      b_ = 0.5 * (b1 + b2);

    alpha_[i1] = a1_new;
    alpha_[i2] = a2_new;
    const double db = b_ - b_old;
    for (int i = 0; i < n_; ++i) errors_[i] += d1 * kernel_(i1, i) + d2 * kernel_(i2, i) + db;
    return true;
  }

  const std::vector<const Vector*>& x_;
  const std::vector<double>& y_;
  double gamma_;
  double c_;
  int n_;
  Vector alpha_;
  Vector errors_;
  double b_ = 0.0;
  Matrix kernel_;
};

}  // namespace detail

/// One-vs-one multi-class SVM with an RBF kernel. Prediction is by pairwise
/// voting; equal votes go to the lowest class index.
struct SvmModel {
  struct PairClassifier {
    int class_a = 0;  // decision > 0 votes class_a
    int class_b = 0;
    std::vector<Vector> support_vectors;
    Vector coefficients;  // alpha_i * y_i
    double bias = 0.0;
  };

  double gamma = 1.0;
  double C = 10.0;
  int n_classes = 0;
  std::vector<PairClassifier> classifiers;
};

inline SvmModel svm_train(const std::vector<Vector>& features, const std::vector<int>& labels,
                          double gamma, double C) {
  if (features.size() != labels.size()) throw ShapeMismatch("svm_train: features vs labels");
  if (gamma <= 0.0 || C <= 0.0) throw ConfigError("svm_train: gamma and C must be positive");
  for (const Vector& f : features)
    for (double v : f)
      if (!std::isfinite(v)) throw NonFiniteFeature("svm_train: non-finite feature entry");

  int n_classes = 0;
  for (int l : labels) n_classes = std::max(n_classes, l + 1);
  std::vector<int> counts(n_classes, 0);
  for (int l : labels) {
    if (l < 0) throw ConfigError("svm_train: negative label");
    ++counts[l];
  }
  int present = 0;
  for (int c : counts) present += c > 0 ? 1 : 0;
  if (present < 2) throw SingleClass("svm_train: need at least two distinct labels");

  SvmModel model;
  model.gamma = gamma;
  model.C = C;
  model.n_classes = n_classes;
  for (int a = 0; a < n_classes; ++a) {
    for (int b = a + 1; b < n_classes; ++b) {
      if (counts[a] == 0 || counts[b] == 0) continue;
      std::vector<const Vector*> x;
      std::vector<double> y;
      for (std::size_t i = 0; i < features.size(); ++i) {
        if (labels[i] == a) {
          x.push_back(&features[i]);
          y.push_back(1.0);
        } else if (labels[i] == b) {
          x.push_back(&features[i]);
          y.push_back(-1.0);
        }
      }
      detail::SmoSolver solver(x, y, gamma, C);
      solver.solve();

      SvmModel::PairClassifier pc;
      pc.class_a = a;
      pc.class_b = b;
      pc.bias = solver.bias();
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (solver.alpha()[i] > 1e-12) {
          pc.support_vectors.push_back(*x[i]);
          pc.coefficients.push_back(solver.alpha()[i] * y[i]);
        }
      }
      model.classifiers.push_back(std::move(pc));
    }
  }
  return model;
}

inline double svm_pair_decision(const SvmModel::PairClassifier& pc, const Vector& x,
                                double gamma) {
  double f = pc.bias;
  for (std::size_t i = 0; i < pc.support_vectors.size(); ++i)
    f += pc.coefficients[i] * rbf_kernel(pc.support_vectors[i], x, gamma);
  return f;
}

inline int svm_predict(const SvmModel& model, const Vector& x) {
  if (model.classifiers.empty()) throw Error("svm_predict: untrained model");
  for (double v : x)
    if (!std::isfinite(v)) throw NonFiniteFeature("svm_predict: non-finite feature entry");
  std::vector<int> votes(model.n_classes, 0);
  for (const auto& pc : model.classifiers) {
    const double f = svm_pair_decision(pc, x, model.gamma);
    ++votes[f >= 0.0 ? pc.class_a : pc.class_b];
  }
  int best = 0;
  for (int c = 1; c < model.n_classes; ++c)
    if (votes[c] > votes[best]) best = c;  // ties keep the lowest index
  return best;
}

}  // namespace csishield
