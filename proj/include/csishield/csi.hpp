#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "csishield/error.hpp"
#include "csishield/matrix.hpp"

namespace csishield {

using ComplexSample = std::complex<double>;
using CfrVector = std::vector<ComplexSample>;

/// Per-packet channel frequency responses stacked into an n x K complex matrix.
class CsiMatrix {
 public:
  CsiMatrix() = default;
  CsiMatrix(int rows, int cols)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  ComplexSample& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const ComplexSample& operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  std::span<ComplexSample> row(int r) {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<const ComplexSample> row(int r) const {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }

  CfrVector row_vector(int r) const {
    auto s = row(r);
    return {s.begin(), s.end()};
  }

  bool operator==(const CsiMatrix& o) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<ComplexSample> data_;
};

/// Non-negative real magnitudes, same layout as the CSI matrix they came from.
using AmplitudeMatrix = Matrix;

/// Min/max pair recorded when an amplitude matrix is scaled to [0,1].
struct ScaleRecord {
  double min = 0.0;
  double max = 0.0;
  bool degenerate = false;  // max == min: capture is constant, likely a failed acquisition
};

constexpr int kTotalSubcarriers = 64;
constexpr int kDataSubcarriers = 52;

/// Indices removed when selecting the 52 data subcarriers out of 64.
/// Layout follows the 20 MHz 802.11n convention with subcarrier -32 at
/// index 0 and DC at index 32: guard bands at both spectrum edges, the DC
/// bin, and the four pilots at offsets +/-7 and +/-21.
constexpr std::array<int, 12> kNonDataSubcarriers = {0, 1, 2, 3, 11, 25, 32, 39, 53, 61, 62, 63};

inline bool is_data_subcarrier(int index) {
  return std::find(kNonDataSubcarriers.begin(), kNonDataSubcarriers.end(), index) ==
         kNonDataSubcarriers.end();
}

/// The 52 retained column indices, ascending.
inline const std::vector<int>& data_subcarrier_indices() {
  static const std::vector<int> idx = [] {
    std::vector<int> v;
    for (int k = 0; k < kTotalSubcarriers; ++k)
      if (is_data_subcarrier(k)) v.push_back(k);
    return v;
  }();
  return idx;
}

/// Elementwise complex ratio of received to transmitted symbols, one channel
/// response value per subcarrier.
inline CfrVector cfr_from_symbols(const CfrVector& received, const CfrVector& transmitted) {
  if (received.size() != transmitted.size())
    throw ShapeMismatch("cfr_from_symbols: received/transmitted lengths differ");
  CfrVector out(received.size());
  for (std::size_t k = 0; k < received.size(); ++k) {
    if (std::abs(transmitted[k]) == 0.0) throw DivisionByZeroSubcarrier(static_cast<int>(k));
    out[k] = received[k] / transmitted[k];
  }
  return out;
}

/// |H_k| = sqrt(re^2 + im^2) per subcarrier.
inline Vector amplitude(const CfrVector& cfr) {
  Vector out(cfr.size());
  for (std::size_t k = 0; k < cfr.size(); ++k)
    out[k] = std::hypot(cfr[k].real(), cfr[k].imag());
  return out;
}

/// Row-wise magnitude of a whole CSI matrix.
inline AmplitudeMatrix amplitude(const CsiMatrix& csi) {
  AmplitudeMatrix out(csi.rows(), csi.cols());
  for (int r = 0; r < csi.rows(); ++r)
    for (int c = 0; c < csi.cols(); ++c)
      out(r, c) = std::hypot(csi(r, c).real(), csi(r, c).imag());
  return out;
}

/// Stack per-packet CFR vectors into a CSI matrix, packet order preserved.
inline CsiMatrix assemble_csi(const std::vector<CfrVector>& frames) {
  if (frames.empty()) throw EmptyInput("assemble_csi: no frames");
  const std::size_t width = frames.front().size();
  for (const auto& f : frames)
    if (f.size() != width) throw RaggedFrames("assemble_csi: frames of differing length");
  CsiMatrix out(static_cast<int>(frames.size()), static_cast<int>(width));
  for (std::size_t r = 0; r < frames.size(); ++r)
    std::copy(frames[r].begin(), frames[r].end(), out.row(static_cast<int>(r)).begin());
  return out;
}

/// Drop guard, DC and pilot columns, keeping the 52 data subcarriers.
inline CsiMatrix select_data_subcarriers(const CsiMatrix& csi) {
  if (csi.cols() != kTotalSubcarriers) throw WrongWidth(kTotalSubcarriers, csi.cols());
  const auto& keep = data_subcarrier_indices();
  CsiMatrix out(csi.rows(), static_cast<int>(keep.size()));
  for (int r = 0; r < csi.rows(); ++r)
    for (std::size_t j = 0; j < keep.size(); ++j)
      out(r, static_cast<int>(j)) = csi(r, keep[j]);
  return out;
}

/// Scale a whole matrix to [0,1] with a single min/max pair. A constant
/// matrix cannot be scaled; it comes back all-zero with the degenerate flag
/// set so callers can reject the capture.
inline std::pair<AmplitudeMatrix, ScaleRecord> normalize_minmax(const AmplitudeMatrix& amp) {
  if (amp.empty()) throw EmptyInput("normalize_minmax: empty matrix");
  double lo = amp.storage()[0];
  double hi = amp.storage()[0];
  for (double v : amp.storage()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  ScaleRecord scale{lo, hi, hi == lo};
  AmplitudeMatrix out(amp.rows(), amp.cols());
  if (!scale.degenerate) {
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < amp.size(); ++i)
      out.storage()[i] = (amp.storage()[i] - lo) * inv;
  }
  return {std::move(out), scale};
}

/// Inverse of normalize_minmax for the recorded scale.
inline AmplitudeMatrix denormalize(const AmplitudeMatrix& amp01, const ScaleRecord& scale) {
  AmplitudeMatrix out(amp01.rows(), amp01.cols());
  const double span = scale.max - scale.min;
  for (std::size_t i = 0; i < amp01.size(); ++i)
    out.storage()[i] = amp01.storage()[i] * span + scale.min;
  return out;
}

}  // namespace csishield
