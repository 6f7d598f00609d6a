#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "csishield/csi.hpp"
#include "csishield/rng.hpp"

using namespace csishield;

TEST_CASE("cfr_from_symbols divides received by transmitted per subcarrier") {
  SECTION("scaled identity channel") {
    CfrVector y = {{2.0, 0.0}};
    CfrVector x = {{1.0, 0.0}};
    auto h = cfr_from_symbols(y, x);
    CHECK(h[0].real() == Catch::Approx(2.0).margin(1e-12));
    CHECK(h[0].imag() == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("Y == X gives H = 1") {
    CfrVector y = {{0.0, 1.0}};
    auto h = cfr_from_symbols(y, y);
    CHECK(h[0].real() == Catch::Approx(1.0).margin(1e-12));
    CHECK(h[0].imag() == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("hand-checked complex division (1+j)/(2j)") {
    CfrVector y = {{1.0, 1.0}};
    CfrVector x = {{0.0, 2.0}};
    auto h = cfr_from_symbols(y, x);
    CHECK(h[0].real() == Catch::Approx(0.5).margin(1e-12));
    CHECK(h[0].imag() == Catch::Approx(-0.5).margin(1e-12));
  }
  SECTION("zero transmitted symbol is rejected with its index") {
    CfrVector y = {{1.0, 0.0}, {1.0, 0.0}};
    CfrVector x = {{1.0, 0.0}, {0.0, 0.0}};
    CHECK_THROWS_AS(cfr_from_symbols(y, x), DivisionByZeroSubcarrier);
    try {
      cfr_from_symbols(y, x);
    } catch (const DivisionByZeroSubcarrier& e) {
      CHECK(e.subcarrier == 1);
    }
  }
}

TEST_CASE("amplitude is the per-subcarrier magnitude") {
  CHECK(amplitude(CfrVector{{3.0, 4.0}})[0] == Catch::Approx(5.0).margin(1e-12));
  CHECK(amplitude(CfrVector{{0.0, 0.0}})[0] == 0.0);
  CHECK(amplitude(CfrVector{{1.0, 0.0}})[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(amplitude(CfrVector{{0.0, 1.0}})[0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("amplitude is non-negative for random finite inputs") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    CfrVector v(8);
    for (auto& c : v) c = {rng.normal(0, 10), rng.normal(0, 10)};
    for (double a : amplitude(v)) CHECK(a >= 0.0);
  }
}

TEST_CASE("common phase rotation cancels in the symbol ratio") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    CfrVector y(4), x(4);
    for (int k = 0; k < 4; ++k) {
      y[k] = {rng.normal(0, 1), rng.normal(0, 1)};
      x[k] = {rng.normal(0, 1) + 2.0, rng.normal(0, 1)};  // keep away from zero
    }
    const double theta = rng.uniform(0, 6.28);
    const std::complex<double> rot{std::cos(theta), std::sin(theta)};
    CfrVector yr = y, xr = x;
    for (auto& c : yr) c *= rot;
    for (auto& c : xr) c *= rot;
    auto a = amplitude(cfr_from_symbols(y, x));
    auto b = amplitude(cfr_from_symbols(yr, xr));
    for (int k = 0; k < 4; ++k) CHECK(a[k] == Catch::Approx(b[k]).margin(1e-9));
  }
}

TEST_CASE("assemble_csi stacks frames in order") {
  SECTION("two frames of length 64") {
    std::vector<CfrVector> frames(2, CfrVector(64));
    frames[0][5] = {1.0, 2.0};
    frames[1][5] = {3.0, 4.0};
    CsiMatrix m = assemble_csi(frames);
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 64);
    CHECK(m(0, 5) == ComplexSample(1.0, 2.0));
    CHECK(m(1, 5) == ComplexSample(3.0, 4.0));
  }
  SECTION("nominal acquisition size 1000 x 64") {
    std::vector<CfrVector> frames(1000, CfrVector(64));
    CsiMatrix m = assemble_csi(frames);
    CHECK(m.rows() == 1000);
    CHECK(m.cols() == 64);
  }
  SECTION("ragged frames rejected") {
    std::vector<CfrVector> frames = {CfrVector(64), CfrVector(63)};
    CHECK_THROWS_AS(assemble_csi(frames), RaggedFrames);
  }
  SECTION("no frames rejected") {
    CHECK_THROWS_AS(assemble_csi({}), EmptyInput);
  }
  SECTION("assembly is lossless") {
    Rng rng(5);
    std::vector<CfrVector> frames(7, CfrVector(16));
    for (auto& f : frames)
      for (auto& c : f) c = {rng.normal(), rng.normal()};
    CsiMatrix m = assemble_csi(frames);
    for (int r = 0; r < m.rows(); ++r) CHECK(m.row_vector(r) == frames[r]);
  }
}

TEST_CASE("select_data_subcarriers removes the 12 pilot/guard/DC columns") {
  SECTION("mask definition") {
    REQUIRE(kNonDataSubcarriers.size() == 12);
    CHECK(data_subcarrier_indices().size() == 52);
    // Edge guards, DC, and the +/-7 and +/-21 pilots around index 32.
    for (int k : {0, 1, 2, 3, 61, 62, 63, 32, 25, 39, 11, 53}) CHECK_FALSE(is_data_subcarrier(k));
  }
  SECTION("1000 x 64 -> 1000 x 52") {
    CsiMatrix m(1000, 64);
    CsiMatrix out = select_data_subcarriers(m);
    CHECK(out.rows() == 1000);
    CHECK(out.cols() == 52);
  }
  SECTION("width 52 rejected") {
    CsiMatrix m(4, 52);
    CHECK_THROWS_AS(select_data_subcarriers(m), WrongWidth);
  }
  SECTION("constant matrix stays constant") {
    CsiMatrix m(10, 64);
    for (int r = 0; r < 10; ++r)
      for (int c = 0; c < 64; ++c) m(r, c) = {7.0, 0.0};
    CsiMatrix out = select_data_subcarriers(m);
    for (int r = 0; r < out.rows(); ++r)
      for (int c = 0; c < out.cols(); ++c) CHECK(out(r, c) == ComplexSample(7.0, 0.0));
  }
  SECTION("selection preserves column order and values") {
    CsiMatrix m(1, 64);
    for (int c = 0; c < 64; ++c) m(0, c) = {static_cast<double>(c), 0.0};
    CsiMatrix out = select_data_subcarriers(m);
    const auto& keep = data_subcarrier_indices();
    for (int j = 0; j < out.cols(); ++j) CHECK(out(0, j).real() == keep[j]);
  }
}

TEST_CASE("normalize_minmax scales the whole matrix to [0,1]") {
  SECTION("forced arithmetic") {
    Matrix m = Matrix::from_rows({{0.0, 5.0}, {10.0, 5.0}});
    auto [out, scale] = normalize_minmax(m);
    CHECK(scale.min == 0.0);
    CHECK(scale.max == 10.0);
    CHECK_FALSE(scale.degenerate);
    CHECK(out(0, 0) == 0.0);
    CHECK(out(0, 1) == Catch::Approx(0.5).margin(1e-12));
    CHECK(out(1, 0) == 1.0);
    CHECK(out(1, 1) == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("constant matrix is degenerate, returned as zeros") {
    Matrix m(3, 3, 4.2);
    auto [out, scale] = normalize_minmax(m);
    CHECK(scale.degenerate);
    for (double v : out.storage()) CHECK(v == 0.0);
  }
  SECTION("idempotent on an already-normalized matrix containing 0 and 1") {
    Matrix m = Matrix::from_rows({{0.0, 0.25}, {1.0, 0.75}});
    auto [out, scale] = normalize_minmax(m);
    CHECK(out == m);
    CHECK(scale.min == 0.0);
    CHECK(scale.max == 1.0);
  }
}

TEST_CASE("denormalize inverts normalize_minmax") {
  SECTION("hand case") {
    Matrix m = Matrix::from_rows({{0.0, 1.0}});
    Matrix back = denormalize(m, ScaleRecord{2.0, 4.0, false});
    CHECK(back(0, 0) == Catch::Approx(2.0));
    CHECK(back(0, 1) == Catch::Approx(4.0));
  }
  SECTION("degenerate scale maps anything to the constant") {
    Matrix zeros(2, 2, 0.0);
    Matrix back = denormalize(zeros, ScaleRecord{5.0, 5.0, true});
    for (double v : back.storage()) CHECK(v == 5.0);
  }
  SECTION("round-trip property on random matrices") {
    Rng rng(91);
    for (int trial = 0; trial < 30; ++trial) {
      Matrix m(5, 7);
      for (double& v : m.storage()) v = rng.uniform(-3.0, 50.0);
      auto [norm, scale] = normalize_minmax(m);
      REQUIRE_FALSE(scale.degenerate);
      for (double v : norm.storage()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      Matrix back = denormalize(norm, scale);
      for (std::size_t i = 0; i < m.size(); ++i)
        CHECK(back.storage()[i] ==
              Catch::Approx(m.storage()[i]).epsilon(1e-6).margin(1e-9));
    }
  }
}
