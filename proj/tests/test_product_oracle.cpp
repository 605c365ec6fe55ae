#include <cmath>

#include <gtest/gtest.h>

#include "kkstab/evolve.hpp"
#include "kkstab/product_oracle.hpp"
#include "three_dim_oracle.hpp"

using namespace kkstab;

namespace {

double zero(double, double) { return 0.0; }

FullGridConfig grid_config(double dr, double r_max) {
  FullGridConfig c;
  c.dr = dr;
  c.dt = dr / 8.0;
  c.r_max = r_max;
  return c;
}

}  // namespace

TEST(FullGridWave3, RejectsBadConfiguration) {
  const auto bump = bump_data();
  const auto h0 = [&](double r, double) { return bump.u0(r); };
  auto c = grid_config(1.0 / 32, 10.0);
  c.torus_points = 7;
  EXPECT_THROW(FullGridWave3(c, 4.0, h0, zero, 2.0), std::invalid_argument);
  c = grid_config(1.0 / 32, 10.0);
  c.dt = c.dr;
  EXPECT_THROW(FullGridWave3(c, 4.0, h0, zero, 2.0), std::invalid_argument);
  c = grid_config(1.0 / 32, 1.5);
  EXPECT_THROW(FullGridWave3(c, 4.0, h0, zero, 2.0), std::invalid_argument);

  FullGridWave3 ok(grid_config(1.0 / 32, 10.0), 4.0, h0, zero, 2.0);
  EXPECT_THROW(ok.advance_to(4.0 + 1.0 / 512), std::invalid_argument);
  EXPECT_THROW(ok.advance_to(3.0), std::invalid_argument);
}

TEST(FullGridWave3, TorusConstantDataMatchesDAlembert) {
  const kkstab_test::ThreeDimOracle exact;
  const auto bump = bump_data();
  double prev = 0.0;
  for (int res : {32, 64}) {
    FullGridWave3 solver(grid_config(1.0 / res, 12.0), 4.0, [&](double r, double) { return bump.u0(r); }, zero, 2.0);
    solver.advance_to(8.0);
    EXPECT_DOUBLE_EQ(solver.time(), 8.0);
    const auto snap = solver.snapshot();
    double err = 0.0;
    for (std::size_t k = 1; k < snap.r.size(); ++k)
      for (int m = 0; m < snap.points; ++m) err = std::max(err, std::abs(snap.values[k][m] - exact(0, 0, 8.0, snap.r[k])));
    // The axis value comes from the one-sided derivative of r u.
    for (int m = 0; m < snap.points; ++m) err = std::max(err, std::abs(snap.values[0][m] - exact(0, 0, 8.0, 1e-6)));
    if (res == 64) {
      EXPECT_LT(err, 2e-6);
      EXPECT_GT(std::log2(prev / err), 4.0);
    }
    prev = err;
  }
}

TEST(FullGridWave3, TorusModesStayDecoupled) {
  // A single internal mode keeps its angular profile exactly: the spectral
  // matrix maps cos(2 pi theta) to -4 pi^2 cos(2 pi theta).
  const auto bump = bump_data();
  FullGridWave3 solver(grid_config(1.0 / 32, 10.0), 4.0,
                       [&](double r, double th) { return bump.u0(r) * std::cos(2.0 * M_PI * th); }, zero, 2.0);
  solver.advance_to(6.0);
  const auto snap = solver.snapshot();
  double leak = 0.0, peak = 0.0;
  for (std::size_t k = 0; k < snap.r.size(); ++k) {
    const double a = snap.values[k][0];
    peak = std::max(peak, std::abs(a));
    for (int m = 0; m < snap.points; ++m)
      leak = std::max(leak, std::abs(snap.values[k][m] - a * std::cos(2.0 * M_PI * m / snap.points)));
  }
  EXPECT_GT(peak, 1e-2);
  EXPECT_LT(leak, 1e-12 * peak + 1e-14);
}

TEST(FullGridWave3, MassiveModeMatchesRadialKleinGordon) {
  // Agreement with the per-mode radial solver for lambda = 4 pi^2, up to the
  // radial solver's second-order error at dr = 1/256.
  const auto bump = bump_data();
  FullGridWave3 solver(grid_config(1.0 / 64, 12.0), 4.0,
                       [&](double r, double th) { return bump.u0(r) * std::cos(2.0 * M_PI * th); }, zero, 2.0);
  solver.advance_to(7.0);
  const auto snap = solver.snapshot();

  EvolutionConfig cfg;
  cfg.n = 3;
  cfg.dr = 1.0 / 256;
  cfg.dt = 1.0 / 640;
  cfg.r_max = 14.0;
  cfg.t_end = 7.0;
  const auto run = evolve_kg_radial(4.0 * M_PI * M_PI, bump, cfg);
  ASSERT_NEAR(run.t_final, 7.0, 1e-9);
  double err = 0.0;
  for (std::size_t k = 0; k < snap.r.size(); ++k) err = std::max(err, std::abs(snap.values[k][0] - run.u[4 * k]));
  EXPECT_LT(err, 2e-5);
}
