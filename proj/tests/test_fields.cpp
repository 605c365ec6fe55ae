#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "kkstab/fields.hpp"

using namespace kkstab;

TEST(Components, ClassificationAndCount) {
  auto comps = all_components(9, 2);
  EXPECT_EQ(comps.size(), 12u * 13u / 2u);
  EXPECT_EQ((TensorComponent{0, 9}).classify(9), ComponentClass::Minkowski);
  EXPECT_EQ((TensorComponent{3, 10}).classify(9), ComponentClass::Mixed);
  EXPECT_EQ((TensorComponent{10, 11}).classify(9), ComponentClass::Internal);
}

TEST(Components, EuclideanNormDominatesInternalBlock) {
  const int n = 3, d = 2;
  auto comps = all_components(n, d);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N;
  std::vector<double> zero(comps.size(), 0.0);
  EXPECT_EQ(euclidean_norm(comps, zero), 0.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> h(comps.size());
    for (double& x : h) x = N(rng);
    EXPECT_GE(euclidean_norm(comps, h), internal_block_norm(comps, h, n));
    EXPECT_GT(euclidean_norm(comps, h), 0.0);
  }
  // Off-diagonal entries appear twice in the full contraction.
  std::vector<TensorComponent> one = {{0, 1}};
  EXPECT_DOUBLE_EQ(euclidean_norm(one, {3.0}), 3.0 * std::sqrt(2.0));
}

namespace {

TinyProductGrid make_grid(const FlatTorus& torus, int points, const RadialGrid& grid,
                          const std::function<double(double, const std::vector<double>&)>& f) {
  TinyProductGrid h;
  h.torus = torus;
  h.points = points;
  for (int k = 0; k < grid.size(); ++k) h.r.push_back(grid.r(k));
  h.values.assign(grid.size(), std::vector<double>(h.torus_nodes()));
  for (int k = 0; k < grid.size(); ++k)
    for (int m = 0; m < h.torus_nodes(); ++m) h.values[k][m] = f(grid.r(k), h.torus_point(m));
  return h;
}

}  // namespace

TEST(Decompose, ConstantOnTorusIsZeroMode) {
  RadialGrid grid(0.25, 2.0);
  FlatTorus torus = FlatTorus::cube(1, 2 * std::numbers::pi);
  auto h = make_grid(torus, 8, grid, [](double r, const std::vector<double>&) { return std::exp(-r * r); });
  auto f = mode_decompose(h, grid, 3, 4.0);
  ASSERT_EQ(f.modes.size(), 1u);
  EXPECT_EQ(f.modes[0].lambda, 0.0);
  for (int k = 0; k < grid.size(); ++k) EXPECT_NEAR(f.modes[0].u[0][k], std::exp(-grid.r(k) * grid.r(k)), 1e-14);
}

TEST(Decompose, CosineOnCircleIsUnitMode) {
  RadialGrid grid(0.25, 2.0);
  FlatTorus torus = FlatTorus::cube(1, 2 * std::numbers::pi);
  auto prof = [](double r) { return 1.0 + r * r; };
  auto h = make_grid(torus, 8, grid, [&](double r, const std::vector<double>& th) { return prof(r) * std::cos(th[0]); });
  auto f = mode_decompose(h, grid, 3, 4.0);
  ASSERT_EQ(f.modes.size(), 1u);
  EXPECT_NEAR(f.modes[0].lambda, 1.0, 1e-14);
  for (int k = 0; k < grid.size(); ++k) EXPECT_NEAR(f.modes[0].u[0][k], prof(grid.r(k)), 1e-13);
  EXPECT_NO_THROW(f.validate(10.0));
}

TEST(Decompose, RandomBandLimitedRoundTrip) {
  RadialGrid grid(0.5, 3.0);
  for (int d : {1, 2}) {
    FlatTorus torus(d, d == 1 ? std::vector<double>{1.3} : std::vector<double>{1.0, 2.0});
    auto field = random_torus_field(torus, 2, 11 + d);
    auto h = make_grid(torus, 7, grid, [&](double r, const std::vector<double>& x) {
      return std::exp(-r) * field.value(0, x) + r * field.value(d == 1 ? 0 : 2, x);
    });
    auto f = mode_decompose(h, grid, 3, 4.0);
    auto back = mode_reconstruct(f, 7);
    for (int k = 0; k < grid.size(); ++k)
      for (int m = 0; m < h.torus_nodes(); ++m) EXPECT_NEAR(back.values[k][m], h.values[k][m], 1e-10);
  }
}

TEST(Decompose, NyquistContentRejected) {
  RadialGrid grid(0.5, 2.0);
  FlatTorus torus = FlatTorus::cube(1, 1.0);
  auto h = make_grid(torus, 8, grid, [](double, const std::vector<double>& x) {
    return std::cos(2 * std::numbers::pi * 4 * x[0]);
  });
  EXPECT_THROW(mode_decompose(h, grid, 3, 4.0), AliasingError);
}

TEST(Decompose, ParsevalMatchesDirectIntegral) {
  // L^2(Sigma_s x T^1) from mode sums against direct quadrature of the grid.
  const int n = 3;
  RadialGrid grid(0.05, 12.0);
  FlatTorus torus = FlatTorus::cube(1, 2.0);
  auto fn = [](double t, double r, double x) {
    return std::exp(-r * r / (1 + 0.1 * t)) * (1.0 + 0.4 * std::cos(std::numbers::pi * x) - 0.2 * std::sin(2 * std::numbers::pi * x));
  };
  const double dt = 0.05;
  ProductTensorField pf;
  for (int j = 0; j < 60; ++j) {
    const double t = 3.0 + j * dt;
    auto h = make_grid(torus, 8, grid, [&](double r, const std::vector<double>& x) { return fn(t, r, x[0]); });
    auto slice = mode_decompose(h, grid, n, t, 0.0);
    if (j == 0) {
      pf = slice;
      for (auto& m : pf.modes) m.dt = dt;
    } else {
      for (std::size_t a = 0; a < pf.modes.size(); ++a) {
        pf.modes[a].times.push_back(t);
        pf.modes[a].u.push_back(slice.modes[a].u[0]);
      }
    }
  }
  for (auto& m : pf.modes) m.v.assign(m.u.size(), std::vector<double>(grid.size(), 0.0));
  const double s = 3.2;
  auto hs = make_slice(n, s, grid, 2.0);
  const double mode_sum = l2_sigma_k_norm2(pf, hs);
  double direct = 0.0;
  for (int k = 0; k < hs.size(); ++k) {
    double inner = 0.0;
    for (int m = 0; m < 64; ++m) {
      const double x = 2.0 * m / 64;
      const double v = fn(hs.t[k], hs.r[k], x);
      inner += v * v * 2.0 / 64;
    }
    direct += hs.weight[k] * inner;
  }
  // Time interpolation error of the mode path is the only difference.
  EXPECT_NEAR(mode_sum, direct, 1e-8 * direct);
}

namespace {

ModeField analytic_field(double (*f)(double, double), double (*ft)(double, double), double t0, double dt, int slices,
                         const RadialGrid& grid) {
  ModeField m;
  m.grid = grid;
  m.dt = dt;
  for (int j = 0; j < slices; ++j) {
    const double t = t0 + j * dt;
    m.times.push_back(t);
    std::vector<double> u(grid.size()), v(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
      u[k] = f(t, grid.r(k));
      v[k] = ft(t, grid.r(k));
    }
    m.u.push_back(u);
    m.v.push_back(v);
  }
  return m;
}

double lin_t(double t, double) { return t; }
double one(double, double) { return 1.0; }
double sq(double t, double r) { return t * t - r * r; }
double sq_t(double t, double) { return 2 * t; }
double wave(double t, double r) { return std::sin(1.3 * t - 0.7 * r) * std::exp(-0.05 * r * r); }
double wave_t(double t, double r) { return 1.3 * std::cos(1.3 * t - 0.7 * r) * std::exp(-0.05 * r * r); }

}  // namespace

TEST(Sampling, TimeFunction) {
  RadialGrid grid(0.1, 6.0);
  auto m = analytic_field(lin_t, one, 2.0, 0.1, 60, grid);
  auto slice = make_slice(3, 3.0, grid, 5.0);
  auto p = sample_on_hyperboloid(m, slice);
  for (int k = 0; k < slice.size(); ++k) {
    EXPECT_NEAR(p.u[k], std::hypot(3.0, slice.r[k]), 1e-12);
    EXPECT_NEAR(p.dt_u[k], 1.0, 1e-12);
  }
}

TEST(Sampling, LorentzInvariantIsConstant) {
  RadialGrid grid(0.1, 6.0);
  auto m = analytic_field(sq, sq_t, 2.0, 0.1, 60, grid);
  auto slice = make_slice(3, 3.0, grid, 5.0);
  auto p = sample_on_hyperboloid(m, slice);
  for (int k = 0; k < slice.size(); ++k) EXPECT_NEAR(p.u[k], 9.0, 1e-11);
  // Y_1 annihilates functions of s alone up to the radial stencil error.
  for (int k = 1; k + 1 < slice.size(); ++k) EXPECT_NEAR(p.y_u[k], 0.0, 1e-10);
}

TEST(Sampling, CubicBeatsLinearWithExpectedOrders) {
  auto errors = [](double dt, int order) {
    RadialGrid grid(0.1, 8.0);
    auto m = analytic_field(wave, wave_t, 2.0, dt, static_cast<int>(8.0 / dt), grid);
    auto slice = make_slice(3, 3.0, grid, 6.0);
    auto p = sample_on_hyperboloid(m, slice, order);
    double e = 0.0;
    for (int k = 0; k < slice.size(); ++k) e = std::max(e, std::abs(p.u[k] - wave(slice.t[k], slice.r[k])));
    return e;
  };
  const double l1 = errors(0.1, 1), l2 = errors(0.05, 1);
  const double c1 = errors(0.1, 3), c2 = errors(0.05, 3);
  EXPECT_NEAR(std::log2(l1 / l2), 2.0, 0.3);
  EXPECT_GT(std::log2(c1 / c2), 3.5);
  EXPECT_LT(c1, l1);
}

TEST(Sampling, OutsideWindowThrows) {
  RadialGrid grid(0.1, 6.0);
  auto m = analytic_field(lin_t, one, 2.0, 0.1, 10, grid);
  auto slice = make_slice(3, 2.5, grid, 3.0);
  EXPECT_THROW(sample_on_hyperboloid(m, slice), WindowError);
}

TEST(Norms, ZeroAndGaussian) {
  const int n = 5;
  RadialGrid grid(1.0 / 64, 12.0);
  auto gauss = [](double, double r) { return std::exp(-r * r); };
  ProductTensorField pf;
  pf.model = FlatTorus::cube(1, 2.0);
  ModeField m;
  m.n = n;
  m.lambda = std::pow(std::numbers::pi, 2);
  m.internal_norm2 = 1.0;
  m.grid = grid;
  m.dt = 0.05;
  for (int j = 0; j < 180; ++j) {
    m.times.push_back(4.0 + j * m.dt);
    std::vector<double> u(grid.size()), zero(grid.size(), 0.0);
    for (int k = 0; k < grid.size(); ++k) u[k] = gauss(0, grid.r(k));
    m.u.push_back(u);
    m.v.push_back(zero);
  }
  pf.modes.push_back(m);
  pf.basis.push_back({{1}, false});
  auto slice = make_slice(n, 4.5, grid, 7.0);
  EXPECT_NEAR(l2_sigma_k_norm2(pf, slice), std::pow(std::numbers::pi / 2.0, 0.5 * n), 1e-8);

  ProductTensorField zero = pf;
  for (auto& row : zero.modes[0].u) std::fill(row.begin(), row.end(), 0.0);
  EXPECT_EQ(l2_sigma_k_norm2(zero, slice), 0.0);
  EXPECT_EQ(internal_sobolev_norm(zero, 0, 3, 2), 0.0);

  const double lam = pf.modes[0].lambda;
  EXPECT_NEAR(internal_sobolev_norm(pf, 0, 0, 2), std::sqrt(1 + lam + lam * lam), 1e-12);
}

TEST(Snapshot, RoundTripIsByteStable) {
  RadialGrid grid(0.25, 3.0);
  auto m = analytic_field(wave, wave_t, 4.0, 0.1, 3, grid);
  m.n = 9;
  m.lambda = 39.47841760435743;
  m.label = "k=(1,0)c";
  m.support_radius = 2.5;
  std::ostringstream a;
  write_snapshot(a, m);
  std::istringstream in(a.str());
  auto back = read_snapshot(in);
  EXPECT_EQ(back.lambda, m.lambda);
  EXPECT_EQ(back.u, m.u);
  EXPECT_EQ(back.v, m.v);
  EXPECT_EQ(back.times, m.times);
  std::ostringstream b;
  write_snapshot(b, back);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream bad("kkstab-field v0\n");
  EXPECT_THROW(read_snapshot(bad), std::runtime_error);
}
