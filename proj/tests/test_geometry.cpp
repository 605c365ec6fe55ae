#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "kkstab/geometry.hpp"

using namespace kkstab;

TEST(Coordinates, ForwardExamples) {
  auto h = to_hyperboloidal({5.0, {3.0, 0.0, 0.0}});
  EXPECT_DOUBLE_EQ(h.s, 4.0);
  EXPECT_DOUBLE_EQ(h.y[0], 3.0);
  auto a = to_hyperboloidal({7.0, {0.0, 0.0}});
  EXPECT_DOUBLE_EQ(a.s, 7.0);
}

TEST(Coordinates, OutsideConeThrows) {
  EXPECT_THROW(to_hyperboloidal({1.0, {1.0}}), DomainError);
  EXPECT_THROW(to_hyperboloidal({1.0, {0.6, 0.9}}), DomainError);
  EXPECT_THROW(from_hyperboloidal({0.0, {1.0}}), DomainError);
}

TEST(Coordinates, RandomRoundtrip) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-10.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    CartesianPoint p;
    p.x.resize(9);
    for (double& xi : p.x) xi = U(rng);
    const double rx = euclidean_norm(p.x);
    p.t = rx + 1e-3 + std::abs(U(rng));
    const auto h = to_hyperboloidal(p);
    const auto q = from_hyperboloidal(h);
    double mag = std::abs(p.t);
    for (double xi : p.x) mag = std::hypot(mag, xi);
    EXPECT_LE(std::abs(q.t - p.t), 1e-12 * (1.0 + mag));
    EXPECT_NEAR(h.s * h.s + rx * rx, p.t * p.t, 1e-12 * p.t * p.t);
  }
}

TEST(Coordinates, TMaxOnSlice) {
  EXPECT_DOUBLE_EQ(t_max_on_slice(1.0), 1.0);
  EXPECT_DOUBLE_EQ(t_max_on_slice(3.0), 5.0);
  EXPECT_THROW(t_max_on_slice(0.5), DomainError);
  const double s = 6.5, t = t_max_on_slice(s);
  EXPECT_NEAR(t * t - (t - 1.0) * (t - 1.0), s * s, 1e-12);
}

TEST(Coordinates, MinkowskiDimRange) {
  EXPECT_THROW(MinkowskiDim(0), DomainError);
  EXPECT_FALSE(warn_if_below_main_range(MinkowskiDim(9), "test"));
  EXPECT_TRUE(warn_if_below_main_range(MinkowskiDim(3), "test"));
}

TEST(Slice, TBoundsHoldOnEveryNode) {
  RadialGrid grid(1.0 / 64, 200.0);
  for (double s : {2.0, 4.0, 7.3, 20.0}) {
    auto slice = make_slice_inside_cone(9, s, grid, 1.0);
    EXPECT_EQ(count_t_bound_violations(slice), 0) << "s=" << s;
    EXPECT_LE(slice.t_last(), t_max_on_slice(s) + 1e-12);
    for (int k = 0; k < slice.size(); ++k) EXPECT_LE(s, slice.t[k]);
  }
}

TEST(Slice, GaussianQuadrature) {
  RadialGrid grid(1.0 / 64, 200.0);
  for (int n : {1, 3, 9}) {
    auto slice = make_slice(n, 4.0, grid, 20.0);
    std::vector<double> f(slice.size());
    for (int k = 0; k < slice.size(); ++k) f[k] = std::exp(-slice.r[k] * slice.r[k]);
    // For n = 1 the radial weight counts both half-lines: |S^0| = 2.
    const double exact = std::pow(std::numbers::pi, 0.5 * n);
    EXPECT_NEAR(integrate(slice, f), exact, 1e-6 * exact) << "n=" << n;
  }
}

TEST(Slice, NormalCovector) {
  RadialGrid grid(0.5, 10.0);
  auto slice = make_slice(3, 2.0, grid, 5.0);
  for (int k = 0; k < slice.size(); ++k)
    EXPECT_DOUBLE_EQ(slice.normal_radial(k), -slice.r[k] / std::hypot(2.0, slice.r[k]));
}

namespace {

double minkowski_square(double t, double r) { return t * t - r * r; }

double smooth(double t, double r) { return (1.0 + 0.3 * t * r * r) * std::exp(-0.5 * r * r - 0.1 * (t - 5.0) * (t - 5.0)); }

}  // namespace

TEST(Generators, RotationsAnnihilateRadialData) {
  RadialGrid grid(0.05, 4.0);
  auto w = sample_window(grid, 5.0, 0.02, 5, smooth);
  for (int k = 0; k < grid.size(); ++k) {
    EXPECT_EQ(apply_generator(Generator::lorentz(1, 2), w, {2, k}), 0.0);
    EXPECT_EQ(apply_generator(Generator::lorentz(0, 3), w, {2, k}), 0.0);
    EXPECT_EQ(apply_generator(Generator::translation(4), w, {2, k}), 0.0);
    EXPECT_EQ(apply_generator(Generator::hyperboloidal(2), w, {2, k}), 0.0);
  }
}

TEST(Generators, BoostKillsLorentzInvariant) {
  RadialGrid grid(0.05, 4.0);
  auto w = sample_window(grid, 5.0, 0.02, 5, minkowski_square);
  // Quadratic data is differentiated exactly by centred stencils.
  for (int k = 0; k + 1 < grid.size(); ++k)
    EXPECT_NEAR(apply_generator(Generator::lorentz(0, 1), w, {2, k}), 0.0, 1e-11);
}

TEST(Generators, HyperboloidalMatchesSplitForm) {
  for (double h : {0.04, 0.02}) {
    RadialGrid grid(h, 4.0);
    auto w = sample_window(grid, 5.0, h, 5, smooth);
    double worst = 0.0;
    for (int k = 1; k + 2 < grid.size(); ++k) {
      const double t = w.times[2], r = grid.r(k);
      const double y = apply_generator(Generator::hyperboloidal(1), w, {2, k});
      const double split = apply_generator(Generator::translation(1), w, {2, k}) +
                           (r / t) * apply_generator(Generator::translation(0), w, {2, k});
      EXPECT_NEAR(y, split, 1e-13);
      // Against the analytic derivative, error must be O(h^2).
      const double e = 1e-6;
      const double exact = (smooth(t, r + e) - smooth(t, r - e)) / (2 * e) +
                           (r / t) * (smooth(t + e, r) - smooth(t - e, r)) / (2 * e);
      worst = std::max(worst, std::abs(y - exact));
    }
    EXPECT_LE(worst, 2.0 * h * h);
  }
}

TEST(Generators, StencilErrors) {
  RadialGrid grid(0.1, 2.0);
  auto w = sample_window(grid, 5.0, 0.1, 3, smooth);
  EXPECT_THROW(apply_generator(Generator::translation(0), w, {0, 3}), StencilError);
  EXPECT_THROW(apply_generator(Generator::translation(1), w, {1, 500}), StencilError);
  EXPECT_NO_THROW(apply_generator(Generator::translation(0), w, {1, 3}));
}

TEST(Generators, Names) {
  EXPECT_EQ(Generator::translation(0).name(), "T");
  EXPECT_EQ(Generator::lorentz(0, 1).name(), "Z_01");
  EXPECT_EQ(Generator::internal_laplacian().name(), "Lap_K");
}

TEST(Closure, DefectsScaleQuadratically) {
  auto defects_at = [](double h) {
    RadialGrid grid(h, 5.0);
    std::vector<FieldWindow> samples = {
        sample_window_fn(grid, 6.0, h, 7, smooth, 3.0),
        sample_window_fn(grid, 6.0, h, 7, [](double t, double r) { return (t * t + r * r * t) * std::exp(-r * r); }, 1.5),
    };
    return generator_closure_check(samples);
  };
  auto coarse = defects_at(0.04);
  auto fine = defects_at(0.02);
  ASSERT_EQ(coarse.size(), fine.size());
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    if (coarse[i].pair == "[T,X_1]" || coarse[i].pair.find("Lap_K") != std::string::npos) {
      EXPECT_LE(fine[i].max_defect, 1e-9) << fine[i].pair;
    } else {
      EXPECT_GT(coarse[i].max_defect / fine[i].max_defect, 3.0) << coarse[i].pair;
      EXPECT_LE(fine[i].max_defect, 0.05) << fine[i].pair;
    }
  }
}

TEST(Closure, PolynomialTranslationBracketIsExact) {
  RadialGrid grid(0.1, 3.0);
  auto w = sample_window_fn(grid, 2.0, 0.1, 5, [](double t, double r) { return t * t * r * r + 3 * t - r * r; });
  auto d = generator_closure_check({w});
  EXPECT_LE(d[0].max_defect, 1e-9);
}
