#include <cmath>
#include <memory>
#include <sstream>

#include <gtest/gtest.h>

#include "kkstab/evolve.hpp"
#include "three_dim_oracle.hpp"

using namespace kkstab;
using kkstab_test::ThreeDimOracle;

namespace {

EvolutionConfig three_dim(double dr, double r_max, double t_end) {
  EvolutionConfig c;
  c.n = 3;
  c.dr = dr;
  c.dt = 0.4 * dr;
  c.r_max = r_max;
  c.t_end = t_end;
  return c;
}

}  // namespace

TEST(Laplacian, AxisCellMatchesRegularLimit) {
  const RadialGrid grid(0.1, 5.0);
  for (int n : {1, 3, 9}) {
    RadialLaplacian lap(n, grid);
    std::vector<double> u(grid.size()), out(grid.size());
    for (int k = 0; k < grid.size(); ++k) u[k] = grid.r(k) * grid.r(k);
    lap.apply(u.data(), out.data(), 10);
    EXPECT_NEAR(out[0], 2.0 * n * u[1] / (0.1 * 0.1), 1e-9);
    // Interior cells reproduce the exact Laplacian 2n of r^2.
    for (int k = 1; k < 10; ++k) EXPECT_NEAR(out[k], 2.0 * n, 1e-9 * n) << "n=" << n << " k=" << k;
  }
}

TEST(Evolve, ThreeDimTransportOracle) {
  const ThreeDimOracle exact;
  double err_prev = 0.0;
  for (int res : {64, 128, 512}) {
    const auto cfg = three_dim(1.0 / res, 24.0, 14.0);
    const auto run = evolve_kg_radial(0.0, bump_data(), cfg);
    double err = 0.0;
    for (int k = 1; k < static_cast<int>(run.u.size()); ++k) {
      err = std::max(err, std::abs(run.u[k] - exact(0, 0, run.t_final, k * cfg.dr)));
    }
    if (res == 128) EXPECT_GT(std::log2(err_prev / err), 1.8);
    if (res == 512) EXPECT_LT(err, 1e-6);
    err_prev = err;
  }
}

TEST(Recorder, RetardedProbeFollowsTheRay) {
  const ThreeDimOracle exact;
  const auto cfg = three_dim(1.0 / 128, 40.0, 30.0);
  RetardedProbeRecorder ray(cfg.grid(), 3.0, 10, 8.0);
  evolve_kg_radial(0.0, bump_data(), cfg, {&ray});
  ASSERT_GT(ray.times.size(), 100u);
  EXPECT_GE(ray.times.front(), 8.0);
  double err = 0.0, scaled_min = 1e300, scaled_max = 0.0;
  for (std::size_t i = 0; i < ray.times.size(); ++i) {
    EXPECT_NEAR(ray.times[i] - ray.radii[i], 3.0, 0.5 * cfg.dr);
    err = std::max(err, std::abs(ray.values[i] - exact(0, 0, ray.times[i], ray.radii[i])));
    const double scaled = std::abs(ray.values[i]) * ray.radii[i];
    scaled_min = std::min(scaled_min, scaled);
    scaled_max = std::max(scaled_max, scaled);
  }
  EXPECT_LT(err, 1e-4);
  // r u is transported along the ray, so u decays like 1/r there.
  EXPECT_LT(scaled_max / scaled_min, 1.05);
}

TEST(Evolve, BackwardLegReachesEarlierTimes) {
  const ThreeDimOracle exact;
  auto cfg = three_dim(1.0 / 128, 24.0, 6.0);
  cfg.t_begin = 2.0;
  HistoryRecorder hist(3, 0.0, cfg.grid(), cfg.dt, 1);
  evolve_kg_radial(0.0, bump_data(), cfg, {&hist});
  const auto& f = hist.field();
  ASSERT_NEAR(f.times.front(), 2.0, 1e-12);
  double err = 0.0;
  for (int k = 1; k < 400; ++k) err = std::max(err, std::abs(f.u.front()[k] - exact(0, 0, 2.0, k * cfg.dr)));
  EXPECT_LT(err, 2e-5);
}

TEST(Evolve, UniformDataOscillatesAtMassFrequency) {
  const RadialGrid grid(1.0 / 32, 30.0);
  RadialKG kg(9, 1.0, grid, 0.4 / 32);
  kg.set_causal_margin(0.0);
  kg.set_state(4.0, std::vector<double>(grid.size(), 1.0), std::vector<double>(grid.size(), 0.0), 30.0);
  const int steps = 800;
  for (int i = 0; i < steps; ++i) kg.step();
  const double t = steps * kg.dt();
  for (int k : {0, 10, 200}) EXPECT_NEAR(kg.u()[k], std::cos(t), 1e-8);
}

TEST(Evolve, FlatEnergyConserved) {
  EvolutionConfig cfg;
  cfg.t_end = 60.0;
  for (double lambda : {0.0, 4.0}) {
    const auto run = evolve_kg_radial(lambda, bump_data(), cfg);
    const double e0 = run.monitor.front().flat_energy;
    for (const auto& row : run.monitor) EXPECT_LT(std::abs(row.flat_energy / e0 - 1.0), 1e-3);
  }
}

TEST(Evolve, SelfConvergenceOrder) {
  std::vector<std::vector<double>> u;
  for (int res : {32, 64, 128}) {
    EvolutionConfig cfg;
    cfg.dr = 1.0 / res;
    cfg.dt = 0.4 / res;
    cfg.r_max = 40.0;
    cfg.t_end = 20.0;
    const auto run = evolve_kg_radial(0.0, bump_data(), cfg);
    std::vector<double> coarse;
    for (int k = 0; k * (res / 32) < static_cast<int>(run.u.size()); ++k) coarse.push_back(run.u[k * (res / 32)]);
    u.push_back(coarse);
  }
  double d1 = 0.0, d2 = 0.0;
  for (std::size_t k = 0; k < u[0].size(); ++k) {
    d1 = std::max(d1, std::abs(u[0][k] - u[1][k]));
    d2 = std::max(d2, std::abs(u[1][k] - u[2][k]));
  }
  EXPECT_GE(std::log2(d1 / d2), 1.8);
}

// The discrete dispersion relation lets an exponentially small precursor run
// ahead of the light cone; its lead shrinks as the lattice is refined.
TEST(Evolve, SupportStaysInsideConeAndPrecursorConverges) {
  double lead_prev = 1e300;
  for (int res : {32, 64, 128}) {
    EvolutionConfig cfg;
    cfg.dr = 1.0 / res;
    cfg.dt = 0.4 / res;
    cfg.r_max = 70.0;
    cfg.t_end = 60.0;
    cfg.check_stride = 10;
    const auto run = evolve_kg_radial(0.0, bump_data(), cfg);
    double lead = 0.0;
    for (const auto& row : run.monitor) {
      EXPECT_LE(row.support_radius, row.t - 1.0);
      lead = std::max(lead, row.support_radius - (row.t - 2.0));
    }
    EXPECT_LT(lead, lead_prev);
    lead_prev = lead;
  }
}

TEST(Evolve, RejectsBadConfigurations) {
  EvolutionConfig cfg;
  cfg.dt = 0.6 * cfg.dr;
  EXPECT_THROW(evolve_kg_radial(0.0, bump_data(), cfg), EvolutionError);
  cfg = EvolutionConfig{};
  EXPECT_THROW(evolve_kg_radial(0.0, bump_data(1.0, 3.0), cfg), EvolutionError);
  cfg.t_begin = 5.0;
  EXPECT_THROW(evolve_kg_radial(0.0, bump_data(), cfg), EvolutionError);
  cfg = EvolutionConfig{};
  cfg.nonlinearity = Nonlinearity::QuasilinearToy;
  cfg.epsilon = 0.1;
  EXPECT_THROW(cfg.validate(2.0), EvolutionError);
}

TEST(Recorder, JetsMatchThreeDimOracle) {
  const ThreeDimOracle exact;
  const auto cfg = three_dim(1.0 / 128, 40.0, 24.0);
  HyperboloidRecorder rec(3, cfg.grid(), cfg.dt, {6.0, 8.0}, 2.0, 4.0);
  evolve_kg_radial(0.0, bump_data(), cfg, {&rec});
  for (int i = 0; i < rec.count(); ++i) {
    const auto& sj = rec.slice(i);
    for (int a = 0; a <= kJetOrder; ++a) {
      for (int b = 0; a + b <= kJetOrder; ++b) {
        double err = 0.0, scale = 0.0;
        for (int k = 0; k < sj.slice.size(); ++k) {
          const double r = sj.slice.r[k];
          if (r < 0.5) continue;
          const double e = exact(a, b, sj.slice.t[k], r);
          scale = std::max(scale, std::abs(e));
          err = std::max(err, std::abs(sj.jet[k][jet_index(a, b)] - e));
        }
        EXPECT_LT(err, 2e-2 * scale) << "s=" << sj.slice.s << " a=" << a << " b=" << b;
      }
    }
  }
}

TEST(Recorder, IncompleteSliceThrows) {
  const auto cfg = three_dim(1.0 / 32, 40.0, 10.0);
  HyperboloidRecorder rec(3, cfg.grid(), cfg.dt, {8.0}, 2.0, 4.0);
  evolve_kg_radial(0.0, bump_data(), cfg, {&rec});
  EXPECT_THROW(rec.slice(0), WindowError);
}

TEST(Recorder, SliceBeforeHistoryThrows) {
  const auto cfg = three_dim(1.0 / 32, 40.0, 10.0);
  HyperboloidRecorder rec(3, cfg.grid(), cfg.dt, {3.0}, 2.0, 4.0);
  EXPECT_THROW(evolve_kg_radial(0.0, bump_data(), cfg, {&rec}), WindowError);
}

TEST(Recorder, CutRadiusFollowsCausalBound) {
  EXPECT_NEAR(recorder_cut_radius(20.0, 2.0, 4.0, 500.0), (400.0 - 2.25) / 3.0, 1e-9);
  EXPECT_DOUBLE_EQ(recorder_cut_radius(20.0, 2.0, 4.0, 50.0), 50.0);
}

TEST(Product, ModesDecoupleAndMatchSingleRuns) {
  EvolutionConfig cfg;
  cfg.model = FlatTorus::cube(1, 1.0);
  cfg.r_max = 30.0;
  cfg.t_end = 14.0;
  const double lam = 4.0 * M_PI * M_PI;
  std::vector<ModeInit> modes = {{0.0, "k=(0)", 1.0, bump_data()}, {lam, "k=(1)", 0.5, bump_data(0.5)}};
  auto factory = [&](const ModeInit& m) {
    std::vector<std::unique_ptr<SliceObserver>> obs;
    obs.push_back(std::make_unique<SupNormRecorder>(50));
    (void)m;
    return obs;
  };
  const auto serial = evolve_linearized_product(cfg, modes, factory, 1);
  const auto pooled = evolve_linearized_product(cfg, modes, factory, 2);
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const auto alone = evolve_kg_radial(modes[i].lambda, modes[i].data, cfg);
    EXPECT_EQ(alone.u, serial[i].summary.u);
    EXPECT_EQ(alone.u, pooled[i].summary.u);
  }
  modes.push_back({3.0, "bogus", 1.0, bump_data()});
  EXPECT_THROW(evolve_linearized_product(cfg, modes, factory, 2), SpectrumError);
}

TEST(Artifacts, ManifestAndMonitorAreDeterministic) {
  EvolutionConfig cfg;
  cfg.r_max = 20.0;
  cfg.t_end = 6.0;
  const std::vector<ModeInit> modes = {{0.0, "", 1.0, bump_data()}};
  const auto a = evolve_kg_radial(0.0, bump_data(), cfg);
  const auto b = evolve_kg_radial(0.0, bump_data(), cfg);
  std::ostringstream m1, m2, c1, c2;
  write_manifest(m1, cfg, modes);
  write_manifest(m2, cfg, modes);
  write_monitor_csv(c1, a.monitor);
  write_monitor_csv(c2, b.monitor);
  EXPECT_EQ(m1.str(), m2.str());
  EXPECT_EQ(c1.str(), c2.str());
  EXPECT_NE(m1.str().find("causal_margin = 4"), std::string::npos);
  EXPECT_EQ(c1.str().rfind("t,sup_norm,support_radius,cfl_margin,flat_energy\n", 0), 0u);
}
