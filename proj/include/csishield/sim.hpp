#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "csishield/csi.hpp"
#include "csishield/ingest.hpp"
#include "csishield/rng.hpp"

namespace csishield {

// ---------------------------------------------------------------------------
// Material signatures
// ---------------------------------------------------------------------------

/// Synthetic spectral signature: a base attenuation level with Gaussian dips
/// at material-specific subcarriers. Parallel vectors describe the dips.
struct MaterialProfile {
  Material material = Material::background;
  std::vector<double> bump_centers;  // data-subcarrier index of each dip
  std::vector<double> bump_widths;   // Gaussian sigma of each dip, in subcarriers
  std::vector<double> bump_depths;   // each in (0,1)
  double base_level = 0.9;           // in (0,1]
};

/// Deterministic clean amplitude curve over K data subcarriers, in (0,1].
inline Vector material_curve(const MaterialProfile& profile, int K) {
  if (K < 1) throw ConfigError("material_curve: K must be >= 1");
  Vector curve(static_cast<std::size_t>(K), profile.base_level);
  for (std::size_t b = 0; b < profile.bump_centers.size(); ++b) {
    const double c = profile.bump_centers[b];
    const double w = profile.bump_widths[b];
    const double d = profile.bump_depths[b];
    for (int k = 0; k < K; ++k) {
      const double z = (k - c) / w;
      curve[k] -= d * std::exp(-0.5 * z * z);
    }
  }
  for (double& v : curve) v = std::clamp(v, 0.01, 1.0);
  return curve;
}

/// Frozen default signatures for the five classes. Pairwise curve distance
/// is asserted in the test suite.
inline const std::vector<MaterialProfile>& default_profiles() {
  static const std::vector<MaterialProfile> profiles = {
      {Material::acrylic, {14.0}, {3.0}, {0.35}, 0.80},
      {Material::aluminum, {8.0, 30.0}, {2.5, 4.0}, {0.45, 0.30}, 0.70},
      {Material::copper, {22.0, 40.0}, {3.0, 2.0}, {0.50, 0.25}, 0.72},
      {Material::pine, {36.0}, {5.0}, {0.25}, 0.88},
      {Material::background, {}, {}, {}, 0.95},
  };
  return profiles;
}

inline const MaterialProfile& profile_for(Material m) {
  for (const auto& p : default_profiles())
    if (p.material == m) return p;
  throw ConfigError("no default profile for material");
}

// ---------------------------------------------------------------------------
// Domain noise
// ---------------------------------------------------------------------------

/// Parameters of the synthetic out-of-box environment. All amplitudes are in
/// clean-curve units (curve values live in (0,1]).
struct DomainNoiseConfig {
  double awgn_sigma = 0.05;          // additive white noise on each amplitude sample
  double ripple_amp = 0.22;          // multiplicative frequency ripple amplitude
  double ripple_period = 13.0;       // ripple period in subcarriers
  double ripple_phase_drift = 0.02;  // ripple phase advance per packet, radians
  double slow_fade_amp = 0.35;       // multiplicative slow fading amplitude
  double slow_fade_period = 280.0;   // fading period in packets
  double burst_rate = 3.0;           // expected interference bursts per acquisition
  double day_offset_sigma = 0.10;    // sigma of the per-day gain offset

  bool all_zero() const {
    return awgn_sigma == 0 && ripple_amp == 0 && slow_fade_amp == 0 && burst_rate == 0 &&
           day_offset_sigma == 0;
  }
};

// Burst shape constants (additive rectangles over a subcarrier band).
constexpr double kBurstHeightLo = 0.3;
constexpr double kBurstHeightHi = 0.8;
constexpr int kBurstBandLo = 4;
constexpr int kBurstBandHi = 10;
constexpr double kBurstSpanLo = 0.05;  // fraction of the acquisition length
constexpr double kBurstSpanHi = 0.20;

constexpr double kShieldedNoiseSigma = 0.01;
constexpr double kPilotAmplitude = 1.0;

namespace detail {

/// Knuth's Poisson sampler; deterministic in the stream.
inline int poisson(Rng& rng, double lambda) {
  if (lambda <= 0.0) return 0;
  const double limit = std::exp(-lambda);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return k - 1;
}

inline ComplexSample from_polar(double mag, double phase) {
  return {mag * std::cos(phase), mag * std::sin(phase)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Acquisition synthesis
// ---------------------------------------------------------------------------

/// In-box capture: every packet follows the material curve plus small
/// measurement noise. When K == 52 the CSI is written 64 wide with constant
/// pilot/guard columns so the standard subcarrier mask applies; other K
/// produce a K-wide matrix for small-scale tests.
inline Acquisition simulate_shielded(const MaterialProfile& profile, int n, int K,
                                     std::uint64_t seed, double sigma = kShieldedNoiseSigma) {
  if (n < 1 || K < 1) throw ConfigError("simulate_shielded: n and K must be >= 1");
  const Vector curve = material_curve(profile, K);
  const bool full_width = K == kDataSubcarriers;
  const int width = full_width ? kTotalSubcarriers : K;

  Rng rng(seed);
  Acquisition acq;
  acq.material = profile.material;
  acq.condition = Condition::shielded;
  acq.csi = CsiMatrix(n, width);
  for (int t = 0; t < n; ++t) {
    int data_k = 0;
    for (int c = 0; c < width; ++c) {
      if (full_width && !is_data_subcarrier(c)) {
        acq.csi(t, c) = ComplexSample(kPilotAmplitude, 0.0);
        continue;
      }
      const double amp = std::max(0.0, curve[data_k] + (sigma > 0 ? rng.normal(0.0, sigma) : 0.0));
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      acq.csi(t, c) = detail::from_polar(amp, phase);
      ++data_k;
    }
  }
  return acq;
}

/// Out-of-box capture derived from a clean one:
///   amp' = amp * (1 + ripple(k,t)) * (1 + fade(t)) * day_gain + bursts + awgn,
/// clamped at zero. Phases are preserved so an all-zero config returns the
/// input bit for bit. The acquisition noise stream is derived from
/// (master_seed, clean.id) and the day gain from (master_seed, day), so
/// acquisitions of one day share their offset and generation order never
/// matters.
inline Acquisition simulate_unshielded(const Acquisition& clean, const DomainNoiseConfig& cfg,
                                       std::uint64_t master_seed) {
  Acquisition out = clean;
  out.condition = Condition::unshielded;
  if (cfg.all_zero()) return out;

  Rng rng = Rng(master_seed).fork("unshielded:" + clean.id);
  const double day_gain =
      cfg.day_offset_sigma > 0
          ? 1.0 + cfg.day_offset_sigma *
                      Rng(master_seed).fork("day:" + std::to_string(clean.day)).normal()
          : 1.0;

  const int n = clean.csi.rows();
  const bool full_width = clean.csi.cols() == kTotalSubcarriers;
  std::vector<int> data_cols;
  if (full_width) {
    data_cols = data_subcarrier_indices();
  } else {
    for (int c = 0; c < clean.csi.cols(); ++c) data_cols.push_back(c);
  }
  const int K = static_cast<int>(data_cols.size());

  const double ripple_phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double fade_phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);

  // Additive interference bursts over random subcarrier bands and packet spans.
  Matrix burst(n, K);
  const int n_bursts = detail::poisson(rng, cfg.burst_rate);
  for (int b = 0; b < n_bursts; ++b) {
    const double height = rng.uniform(kBurstHeightLo, kBurstHeightHi);
    const int band = kBurstBandLo + static_cast<int>(rng.below(kBurstBandHi - kBurstBandLo + 1));
    const int k0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, K - band))));
    const int span = std::max(1, static_cast<int>(n * rng.uniform(kBurstSpanLo, kBurstSpanHi)));
    const int t0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, n - span))));
    for (int t = t0; t < std::min(n, t0 + span); ++t)
      for (int k = k0; k < std::min(K, k0 + band); ++k) burst(t, k) += height;
  }

  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int t = 0; t < n; ++t) {
    const double fade =
        1.0 + cfg.slow_fade_amp *
                  std::sin(two_pi * t / std::max(1.0, cfg.slow_fade_period) + fade_phase0);
    for (int k = 0; k < K; ++k) {
      const int c = data_cols[k];
      const ComplexSample v = clean.csi(t, c);
      const double amp = std::abs(v);
      const double ripple =
          1.0 + cfg.ripple_amp * std::sin(two_pi * k / std::max(1.0, cfg.ripple_period) +
                                          t * cfg.ripple_phase_drift + ripple_phase0);
      double noisy = amp * ripple * fade * day_gain + burst(t, k);
      if (cfg.awgn_sigma > 0) noisy += rng.normal(0.0, cfg.awgn_sigma);
      noisy = std::max(0.0, noisy);
      if (amp > 1e-12) {
        out.csi(t, c) = v * (noisy / amp);
      } else {
        out.csi(t, c) = detail::from_polar(noisy, rng.uniform(0.0, two_pi));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

constexpr double kIqScale = 1000.0;  // amplitude unit -> integer IQ quantization

/// Quantize an acquisition to capture-file frames (10 ms packet spacing).
inline std::vector<CsiFrameRecord> to_frames(const Acquisition& acq) {
  std::vector<CsiFrameRecord> frames(static_cast<std::size_t>(acq.csi.rows()));
  for (int t = 0; t < acq.csi.rows(); ++t) {
    CsiFrameRecord& f = frames[t];
    f.timestamp_us = static_cast<std::int64_t>(t) * 10000;
    f.rssi = -40;
    for (int c = 0; c < acq.csi.cols(); ++c) {
      const ComplexSample v = acq.csi(t, c);
      f.iq[2 * c] = static_cast<std::int32_t>(std::lround(v.real() * kIqScale));
      f.iq[2 * c + 1] = static_cast<std::int32_t>(std::lround(v.imag() * kIqScale));
    }
  }
  return frames;
}

struct SimulatorConfig {
  int count_per_cell = 30;  // acquisitions per (material, condition)
  int packets = kNominalFrameCount;
  DomainNoiseConfig noise;
  double shielded_sigma = kShieldedNoiseSigma;
};

/// Write the full synthetic dataset: for every material and repetition, one
/// shielded capture and one independently recorded unshielded capture of the
/// same object on the same day. Returns the saved manifest.
inline DatasetManifest generate_dataset(const std::filesystem::path& out_dir,
                                        const SimulatorConfig& cfg, std::uint64_t master_seed) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create output directory: " + out_dir.string());

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  Rng master(master_seed);

  char day_rep[32];
  for (const MaterialProfile& profile : default_profiles()) {
    for (int r = 0; r < cfg.count_per_cell; ++r) {
      const int day = static_cast<int>((static_cast<long>(r) * 10) / cfg.count_per_cell) + 1;
      std::snprintf(day_rep, sizeof(day_rep), "d%02d_r%02d", day, r);
      const std::string stem = std::string(to_string(profile.material)) + "_";

      // Shielded capture.
      {
        const std::string id = stem + "shielded_" + day_rep;
        Acquisition acq = simulate_shielded(profile, cfg.packets, kDataSubcarriers,
                                            master.fork(id).seed(), cfg.shielded_sigma);
        acq.id = id;
        acq.day = day;
        write_csi_lines_file(out_dir / (id + ".csv"), to_frames(acq));
        manifest.entries.push_back({id + ".csv", profile.material, Condition::shielded, day});
      }
      // Unshielded capture: a fresh recording of the same object, corrupted.
      {
        const std::string id = stem + "unshielded_" + day_rep;
        Acquisition base = simulate_shielded(profile, cfg.packets, kDataSubcarriers,
                                             master.fork("base:" + id).seed(), cfg.shielded_sigma);
        base.id = id;
        base.day = day;
        Acquisition acq = simulate_unshielded(base, cfg.noise, master_seed);
        write_csi_lines_file(out_dir / (id + ".csv"), to_frames(acq));
        manifest.entries.push_back({id + ".csv", profile.material, Condition::unshielded, day});
      }
    }
  }
  save_manifest(manifest, out_dir / "manifest.txt");
  return manifest;
}

}  // namespace csishield
