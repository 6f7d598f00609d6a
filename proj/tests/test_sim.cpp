#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "csishield/sim.hpp"

using namespace csishield;
namespace fs = std::filesystem;

namespace {

double curve_l2(const Vector& a, const Vector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Simulator amplitudes already live on the (0,1] curve scale, so the
// noise-level checks compare them directly.
double noisy_vs_clean_mse(const Acquisition& noisy, const Acquisition& clean) {
  return mean_squared_difference(data_amplitudes(noisy), data_amplitudes(clean));
}

}  // namespace

TEST_CASE("material_curve builds base level minus Gaussian dips") {
  SECTION("no dips gives a constant") {
    MaterialProfile p{Material::background, {}, {}, {}, 0.95};
    Vector c = material_curve(p, 52);
    for (double v : c) CHECK(v == 0.95);
  }
  SECTION("a single dip puts the minimum at its center") {
    MaterialProfile p{Material::acrylic, {26.0}, {3.0}, {0.3}, 0.8};
    Vector c = material_curve(p, 52);
    int argmin = 0;
    for (int k = 1; k < 52; ++k)
      if (c[k] < c[argmin]) argmin = k;
    CHECK(argmin == 26);
    CHECK(c[26] == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("default object profiles are pairwise separated") {
    const auto& profiles = default_profiles();
    REQUIRE(profiles.size() == 5);
    std::vector<Vector> curves;
    for (const auto& p : profiles) curves.push_back(material_curve(p, 52));
    for (std::size_t i = 0; i < curves.size(); ++i) {
      for (std::size_t j = i + 1; j < curves.size(); ++j) {
        INFO("profiles " << i << " and " << j);
        CHECK(curve_l2(curves[i], curves[j]) > 0.05);
      }
    }
  }
  SECTION("curves stay inside (0,1]") {
    MaterialProfile deep{Material::copper, {10.0, 12.0}, {4.0, 4.0}, {0.9, 0.9}, 0.5};
    for (double v : material_curve(deep, 52)) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("simulate_shielded is deterministic and tracks the curve") {
  const MaterialProfile& p = profile_for(Material::copper);

  SECTION("same seed twice gives identical matrices") {
    Acquisition a = simulate_shielded(p, 50, 52, 99);
    Acquisition b = simulate_shielded(p, 50, 52, 99);
    CHECK(a.csi == b.csi);
    Acquisition c = simulate_shielded(p, 50, 52, 100);
    CHECK_FALSE(a.csi == c.csi);
  }
  SECTION("sigma=0 gives rows equal to the curve") {
    Acquisition a = simulate_shielded(p, 20, 52, 7, 0.0);
    Vector curve = material_curve(p, 52);
    Matrix amp = data_amplitudes(a);
    for (int t = 0; t < amp.rows(); ++t)
      for (int k = 0; k < amp.cols(); ++k) CHECK(amp(t, k) == Catch::Approx(curve[k]).margin(1e-9));
  }
  SECTION("default sigma keeps >99% of entries within 5 sigma") {
    Acquisition a = simulate_shielded(p, 200, 52, 13);
    Vector curve = material_curve(p, 52);
    Matrix amp = data_amplitudes(a);
    long outliers = 0;
    for (int t = 0; t < amp.rows(); ++t)
      for (int k = 0; k < amp.cols(); ++k)
        if (std::abs(amp(t, k) - curve[k]) >= 5 * kShieldedNoiseSigma) ++outliers;
    CHECK(outliers < amp.rows() * amp.cols() / 100);
  }
  SECTION("pilot columns carry the fixed pilot value") {
    Acquisition a = simulate_shielded(p, 5, 52, 3);
    REQUIRE(a.csi.cols() == 64);
    for (int k : kNonDataSubcarriers) CHECK(a.csi(0, k) == ComplexSample(kPilotAmplitude, 0.0));
  }
}

TEST_CASE("simulate_unshielded corrupts amplitudes deterministically") {
  const MaterialProfile& p = profile_for(Material::aluminum);
  Acquisition clean = simulate_shielded(p, 300, 52, 42);
  clean.id = "clean0";
  clean.day = 1;

  SECTION("all-zero config is the identity") {
    DomainNoiseConfig cfg{};
    cfg.awgn_sigma = cfg.ripple_amp = cfg.slow_fade_amp = cfg.burst_rate = cfg.day_offset_sigma = 0;
    Acquisition out = simulate_unshielded(clean, cfg, 5);
    CHECK(out.csi == clean.csi);
    CHECK(out.condition == Condition::unshielded);
  }
  SECTION("awgn-only noise lands in the predicted normalized MSE band") {
    DomainNoiseConfig cfg{};
    cfg.ripple_amp = cfg.slow_fade_amp = cfg.burst_rate = cfg.day_offset_sigma = 0;
    cfg.awgn_sigma = 0.05;
    Acquisition out = simulate_unshielded(clean, cfg, 5);
    const double nmse = noisy_vs_clean_mse(out, clean);
    CHECK(nmse > 0.001);
    CHECK(nmse < 0.01);
  }
  SECTION("deterministic in the master seed") {
    Acquisition a = simulate_unshielded(clean, DomainNoiseConfig{}, 5);
    Acquisition b = simulate_unshielded(clean, DomainNoiseConfig{}, 5);
    Acquisition c = simulate_unshielded(clean, DomainNoiseConfig{}, 6);
    CHECK(a.csi == b.csi);
    CHECK_FALSE(a.csi == c.csi);
  }
  SECTION("same-day acquisitions share their day offset") {
    DomainNoiseConfig cfg{};
    cfg.awgn_sigma = cfg.ripple_amp = cfg.slow_fade_amp = cfg.burst_rate = 0;
    cfg.day_offset_sigma = 0.2;
    Acquisition c2 = clean;
    c2.id = "clean1";
    Acquisition a = simulate_unshielded(clean, cfg, 5);
    Acquisition b = simulate_unshielded(c2, cfg, 5);
    // pure gain: the ratio at a fixed entry must match across acquisitions
    const double ga = std::abs(a.csi(0, 5)) / std::abs(clean.csi(0, 5));
    const double gb = std::abs(b.csi(0, 5)) / std::abs(c2.csi(0, 5));
    CHECK(ga == Catch::Approx(gb).margin(1e-9));
    Acquisition c3 = clean;
    c3.day = 2;
    Acquisition c_out = simulate_unshielded(c3, cfg, 5);
    const double gc = std::abs(c_out.csi(0, 5)) / std::abs(c3.csi(0, 5));
    CHECK(std::abs(gc - ga) > 1e-6);
  }
  SECTION("MSE grows strictly with awgn sigma") {
    double prev = -1.0;
    for (double sigma : {0.02, 0.05, 0.1}) {
      double acc = 0.0;
      for (int trial = 0; trial < 10; ++trial) {
        DomainNoiseConfig cfg{};
        cfg.ripple_amp = cfg.slow_fade_amp = cfg.burst_rate = cfg.day_offset_sigma = 0;
        cfg.awgn_sigma = sigma;
        Acquisition base = simulate_shielded(p, 120, 52, 1000 + trial);
        base.id = "t" + std::to_string(trial);
        base.day = 1;
        acc += noisy_vs_clean_mse(simulate_unshielded(base, cfg, 77 + trial), base);
      }
      CHECK(acc / 10 > prev);
      prev = acc / 10;
    }
  }
  SECTION("default config produces substantial contamination") {
    Acquisition out = simulate_unshielded(clean, DomainNoiseConfig{}, 5);
    const double nmse = noisy_vs_clean_mse(out, clean);
    CHECK(nmse > 0.05);
  }
}

TEST_CASE("generate_dataset writes the full dataset layout") {
  fs::path dir = fs::temp_directory_path() / "csishield_test_dataset";
  fs::remove_all(dir);

  SECTION("one acquisition per cell gives 10 files") {
    SimulatorConfig cfg;
    cfg.count_per_cell = 1;
    cfg.packets = 40;
    DatasetManifest m = generate_dataset(dir, cfg, 123);
    CHECK(m.entries.size() == 10);
    int files = 0;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".csv") ++files;
    CHECK(files == 10);
    ValidationReport r = validate_dataset(m);
    CHECK(r.valid);
    for (const auto& cc : r.cells) CHECK(cc.count == 1);
  }
  SECTION("same seed produces byte-identical files") {
    SimulatorConfig cfg;
    cfg.count_per_cell = 2;
    cfg.packets = 30;
    fs::path dir_a = dir / "a";
    fs::path dir_b = dir / "b";
    generate_dataset(dir_a, cfg, 5);
    generate_dataset(dir_b, cfg, 5);
    for (const auto& e : fs::directory_iterator(dir_a)) {
      INFO(e.path().filename());
      CHECK(file_bytes(e.path()) == file_bytes(dir_b / e.path().filename()));
    }
  }
  SECTION("days spread over 1..10 with 30 per cell") {
    SimulatorConfig cfg;
    cfg.count_per_cell = 30;
    cfg.packets = 12;
    DatasetManifest m = generate_dataset(dir / "full", cfg, 9);
    CHECK(m.entries.size() == 300);
    ValidationReport r = validate_dataset(m);
    CHECK(r.complete);
    for (const auto& cc : r.cells) {
      CHECK(cc.count == 30);
      REQUIRE(cc.days.size() == 10);
      CHECK(cc.days.front() == 1);
      CHECK(cc.days.back() == 10);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("generated files survive the ingest path") {
  fs::path dir = fs::temp_directory_path() / "csishield_test_roundtrip";
  fs::remove_all(dir);
  SimulatorConfig cfg;
  cfg.count_per_cell = 1;
  cfg.packets = 1000;
  DatasetManifest m = generate_dataset(dir, cfg, 321);
  std::vector<Acquisition> acqs = load_acquisitions(m);
  REQUIRE(acqs.size() == 10);
  for (const auto& a : acqs) {
    CHECK(a.csi.rows() == 1000);
    CHECK(a.csi.cols() == 64);
  }
  // quantized on-disk amplitudes track the in-memory curve
  const MaterialProfile& p = profile_for(Material::copper);
  Vector curve = material_curve(p, 52);
  for (const auto& a : acqs) {
    if (a.material != Material::copper || a.condition != Condition::shielded) continue;
    Matrix amp = data_amplitudes(a);
    for (int k = 0; k < 52; ++k) {
      double mean = 0.0;
      for (int t = 0; t < amp.rows(); ++t) mean += amp(t, k);
      mean /= amp.rows();
      CHECK(mean / kIqScale == Catch::Approx(curve[k]).margin(0.01));
    }
  }
  fs::remove_all(dir);
}
