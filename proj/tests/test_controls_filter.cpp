// Copyright 2026 The rkgrape Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rkgrape/controls_filter.hpp"
#include "rkgrape/error.hpp"
#include "rkgrape/units.hpp"
#include "support.hpp"

using namespace rkgrape;
using rkgrape::testing::Rng;

namespace {

// Frequency-domain form of the pixel response: a pixel of width dt centred at
// c, seen at time t through F(w) = exp(-w^2/w0^2), is
//   (2/pi) int_0^inf F(w) cos(w (t - c)) sin(w dt/2) / w dw.
double transfer_quadrature(double t, double center, double pixel_dt, double w0) {
  const auto f = [&](double w) {
    if (w == 0.0) return 0.5 * pixel_dt;
    return std::exp(-w * w / (w0 * w0)) * std::cos(w * (t - center)) * std::sin(0.5 * w * pixel_dt) / w;
  };
  double err = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 9.0 * w0, 20, 1e-14, &err);
  return 2.0 / std::numbers::pi * v;
}

ControlGrid grid_of(const RealMatrix& values, double pixel_dt) {
  ControlGrid g;
  g.pixel_dt = pixel_dt;
  g.values = values;
  return g;
}

const double kBandwidth = units::from_mhz(100.0);

// Distance from the ends, in units of 1/omega_0, beyond which the step
// response is within 1e-6 of one: erfc(3.5) / 2 < 4e-7.
constexpr double kDcMargin = 7.0;

}  // namespace

TEST_CASE("bandwidth ratio") {
  const double ratio = gaussian_bandwidth_ratio();
  CHECK(std::abs(ratio - 0.58870501) < 1e-6);
  CHECK(std::round(ratio * 1e4) / 1e4 == doctest::Approx(0.5887).epsilon(1e-12));
  const auto tm = build_gaussian_transfer(4, 1.0, 0.1, kBandwidth);
  CHECK(tm.bandwidth_3db / tm.reference_bandwidth == doctest::Approx(ratio).epsilon(1e-15));
  // F(omega_B) is the 3 dB point of the power response.
  const double f = std::exp(-std::pow(tm.bandwidth_3db / tm.reference_bandwidth, 2));
  CHECK(f * f == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("transfer matrix against the quadrature oracle") {
  const double pixel_dt = 1.0, sub_dt = 0.1;
  const Index n_pix = 12;
  const auto tm = build_gaussian_transfer(n_pix, pixel_dt, sub_dt, kBandwidth);
  Rng rng(21);
  for (int t = 0; t < 12; ++t) {
    const Index n = rng.integer(0, static_cast<int>(tm.n_subpixels()) - 1);
    const Index j = rng.integer(0, static_cast<int>(n_pix) - 1);
    const double time = static_cast<double>(n) * sub_dt;
    const double center = (static_cast<double>(j) + 0.5) * pixel_dt;
    CHECK(std::abs(tm.entries(n, j) - transfer_quadrature(time, center, pixel_dt, tm.reference_bandwidth)) < 1e-8);
  }
  SUBCASE("single pixel bump") {
    RealMatrix u = RealMatrix::Zero(n_pix, 1);
    u(5, 0) = 1.0;
    const auto s = apply_filter(tm, grid_of(u, pixel_dt));
    Index peak = 0;
    s.values.col(0).maxCoeff(&peak);
    // Centre of pixel 5 is at 5.5 ns; the nearest subpixel starts are 5.5 ns (index 55).
    CHECK(peak == 55);
    for (Index n = 0; n < s.n_subpixels(); ++n) {
      const double time = static_cast<double>(n) * sub_dt;
      CHECK(std::abs(s.values(n, 0) - transfer_quadrature(time, 5.5, pixel_dt, tm.reference_bandwidth)) < 1e-8);
    }
  }
}

TEST_CASE("wide bandwidth reduces to the raw pulse") {
  const Index n_pix = 5, r = 10;
  const auto tm = build_gaussian_transfer(n_pix, 1.0, 0.1, 1e6);
  for (Index n = 0; n < n_pix * r; ++n) {
    const Index owner = n / r;
    const bool on_edge = n % r == 0;
    for (Index j = 0; j < n_pix; ++j) {
      double want = j == owner ? 1.0 : 0.0;
      // A subpixel sampled exactly at a pixel edge sees both neighbours at one half.
      if (on_edge && owner > 0 && (j == owner || j == owner - 1)) want = 0.5;
      if (on_edge && owner == 0 && j == 0) want = 0.5;
      CHECK(std::abs(tm.entries(n, j) - want) < 1e-9);
    }
  }
}

TEST_CASE("transfer matrix invariants") {
  const auto tm = build_gaussian_transfer(30, 1.0, 0.1, kBandwidth);
  CHECK(tm.entries.minCoeff() >= -1e-12);
  CHECK(tm.entries.maxCoeff() <= 1.0 + 1e-12);
  const double w0 = tm.reference_bandwidth;
  const double horizon = 30.0;
  int interior = 0;
  for (Index n = 0; n < tm.n_subpixels(); ++n) {
    const double t = static_cast<double>(n) * tm.subpixel_dt;
    // Row sums telescope to the step response seen from both ends of [0, T].
    const double closed = 1.0 - 0.5 * std::erfc(0.5 * w0 * t) - 0.5 * std::erfc(0.5 * w0 * (horizon - t));
    CHECK(std::abs(tm.entries.row(n).sum() - closed) < 1e-12);
    if (t < kDcMargin / w0 || horizon - t < kDcMargin / w0) continue;
    CHECK(std::abs(tm.entries.row(n).sum() - 1.0) <= 1e-6);
    ++interior;
  }
  CHECK(interior > 150);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(build_gaussian_transfer(4, 1.0, 0.3, kBandwidth), GridMismatchError);
  CHECK_THROWS_AS(build_piecewise_transfer(4, 1.0, 0.3), GridMismatchError);
  CHECK_THROWS_AS(build_gaussian_transfer(4, 1.0, 2.0, kBandwidth), GridMismatchError);
  CHECK(subpixels_per_pixel(1.0, 0.1) == 10);
  CHECK(subpixels_per_pixel(1.0, 0.5) == 2);
  const auto tm = build_gaussian_transfer(4, 1.0, 0.1, kBandwidth);
  CHECK_THROWS_AS(apply_filter(tm, grid_of(RealMatrix::Zero(5, 1), 1.0)), ShapeError);
  CHECK_THROWS_AS(backprop_gradient(tm, RealMatrix::Zero(39, 1)), ShapeError);
}

TEST_CASE("apply_filter examples") {
  const auto tm = build_gaussian_transfer(20, 1.0, 0.1, kBandwidth);
  SUBCASE("constant controls stay constant in the interior") {
    const auto s = apply_filter(tm, grid_of(RealMatrix::Constant(20, 2, 0.37), 1.0));
    const double margin = kDcMargin / tm.reference_bandwidth;
    for (Index n = 0; n < s.n_subpixels(); ++n) {
      const double t = static_cast<double>(n) * 0.1;
      if (t < margin || 20.0 - t < margin) continue;
      CHECK(std::abs(s.values(n, 0) - 0.37) < 1e-6);
      CHECK(std::abs(s.values(n, 1) - 0.37) < 1e-6);
    }
  }
  SUBCASE("zero controls") {
    const auto s = apply_filter(tm, grid_of(RealMatrix::Zero(20, 1), 1.0));
    CHECK(s.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.subpixel_dt == 0.1);
  }
}

TEST_CASE("backprop_gradient examples and properties") {
  Rng rng(22);
  const Index n_pix = 15;
  const auto tm = build_gaussian_transfer(n_pix, 1.0, 0.1, kBandwidth);
  SUBCASE("zero in, zero out") {
    CHECK(backprop_gradient(tm, RealMatrix::Zero(tm.n_subpixels(), 2)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("piecewise transfer sums the subpixels of each pixel") {
    const auto pw = build_piecewise_transfer(4, 1.0, 0.25);
    RealMatrix g(16, 1);
    for (Index n = 0; n < 16; ++n) g(n, 0) = rng.uniform();
    const RealMatrix p = backprop_gradient(pw, g);
    for (Index j = 0; j < 4; ++j) CHECK(p(j, 0) == doctest::Approx(g.block(4 * j, 0, 4, 1).sum()).epsilon(1e-15));
  }
  SUBCASE("chain rule through the filter against finite differences") {
    // phi(s) = sum_n w_n sin(s_n) + 0.5 sum_n s_n^2, analytic dphi/ds known.
    RealMatrix w(tm.n_subpixels(), 1);
    for (Index n = 0; n < w.rows(); ++n) w(n, 0) = rng.uniform();
    const auto phi = [&](const ControlGrid& u) {
      const RealMatrix s = apply_filter(tm, u).values;
      return (w.array() * s.array().sin()).sum() + 0.5 * s.squaredNorm();
    };
    RealMatrix u0(n_pix, 1);
    for (Index j = 0; j < n_pix; ++j) u0(j, 0) = rng.uniform();
    const ControlGrid grid = grid_of(u0, 1.0);
    const RealMatrix s0 = apply_filter(tm, grid).values;
    const RealMatrix ds = (w.array() * s0.array().cos() + s0.array()).matrix();
    const RealMatrix analytic = backprop_gradient(tm, ds);
    RealMatrix numeric(n_pix, 1);
    const double h = 1e-6;
    for (Index j = 0; j < n_pix; ++j) {
      ControlGrid up = grid, dn = grid;
      up.values(j, 0) += h;
      dn.values(j, 0) -= h;
      numeric(j, 0) = (phi(up) - phi(dn)) / (2.0 * h);
    }
    CHECK(testing::rel_inf_error(analytic, numeric) < 1e-6);
  }
  SUBCASE("linearity") {
    RealMatrix u(n_pix, 2), v(n_pix, 2);
    for (Index j = 0; j < n_pix; ++j)
      for (Index k = 0; k < 2; ++k) {
        u(j, k) = rng.uniform();
        v(j, k) = rng.uniform();
      }
    const double a = 0.7, b = -1.9;
    const RealMatrix lhs = apply_filter(tm, grid_of(a * u + b * v, 1.0)).values;
    const RealMatrix rhs =
        a * apply_filter(tm, grid_of(u, 1.0)).values + b * apply_filter(tm, grid_of(v, 1.0)).values;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("transpose consistency over unpinned pixels") {
    const std::vector<PinMask> pins{{true, true}, {false, true}};
    RealMatrix u = RealMatrix::Zero(n_pix, 2), g(tm.n_subpixels(), 2);
    for (Index j = 0; j < n_pix; ++j)
      for (Index k = 0; k < 2; ++k) u(j, k) = rng.uniform();
    u(0, 0) = 0.0;
    u(n_pix - 1, 0) = 0.0;
    u(n_pix - 1, 1) = 0.0;
    for (Index n = 0; n < g.rows(); ++n)
      for (Index k = 0; k < 2; ++k) g(n, k) = rng.uniform();
    const double lhs = (g.array() * apply_filter(tm, grid_of(u, 1.0)).values.array()).sum();
    const RealMatrix back = backprop_gradient(tm, g, pins);
    const double rhs = (back.array() * u.array()).sum();
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(lhs)));
    CHECK(back(0, 0) == 0.0);
    CHECK(back(n_pix - 1, 0) == 0.0);
    CHECK(back(n_pix - 1, 1) == 0.0);
    CHECK(back(0, 1) != 0.0);
  }
}

TEST_CASE("pulse CSV format") {
  ControlGrid g;
  g.pixel_dt = 1.0;
  g.values.resize(3, 2);
  g.values << units::from_mhz(1.0), units::from_mhz(-2.0), units::from_mhz(0.5), 0.0, 0.0,
      units::from_mhz(3.25);
  std::ostringstream os;
  write_pixel_csv(os, g);
  const std::string text = os.str();
  CHECK(text.rfind("t_ns,u_1,u_2\n0,", 0) == 0);
  std::istringstream is(text);
  const ControlGrid back = read_pixel_csv(is);
  CHECK(back.pixel_dt == 1.0);
  CHECK((back.values - g.values).cwiseAbs().maxCoeff() < 1e-15);

  SubpixelGrid s;
  s.subpixel_dt = 0.5;
  s.values = RealMatrix::Constant(2, 1, units::from_mhz(1.0));
  std::ostringstream so;
  write_subpixel_csv(so, s);
  std::istringstream si(so.str());
  std::string line;
  std::getline(si, line);
  CHECK(line == "t_ns,s_1");
  std::getline(si, line);
  CHECK(line.rfind("0,", 0) == 0);
  CHECK(std::stod(line.substr(2)) == doctest::Approx(1.0).epsilon(1e-14));
  std::getline(si, line);
  CHECK(line.rfind("0.5,", 0) == 0);

  std::istringstream bad("time,u\n0,1\n");
  CHECK_THROWS_AS(read_pixel_csv(bad), ConfigError);
}
