#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "kkstab/energy.hpp"
#include "kkstab/evolve.hpp"
#include "kkstab/product_oracle.hpp"
#include "kkstab/schwarzschild.hpp"
#include "kkstab/toy.hpp"
#include "suite_registry.hpp"

namespace kkstab::verify {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMassSquared = 4.0 * kPi * kPi;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

double bump(double r, double R) {
  const double x = r / R;
  return x < 1.0 ? std::pow(1.0 - x * x, 6) : 0.0;
}

std::vector<double> uniform_grid(double from, double to, double step) {
  std::vector<double> s;
  for (int i = 0;; ++i) {
    const double x = from + i * step;
    if (x > to + 1e-9) break;
    s.push_back(x);
  }
  return s;
}

std::vector<double> log_grid(double from, double to, int count) {
  std::vector<double> r;
  for (int i = 0; i < count; ++i) r.push_back(from * std::pow(to / from, i / double(count - 1)));
  return r;
}

std::vector<double> abs_values(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) out.push_back(std::abs(x));
  return out;
}

/// Long n = 9 run on the default lattice, large enough for t_end.
EvolutionConfig long_run(double t_end) {
  EvolutionConfig cfg;
  cfg.n = 9;
  cfg.t_end = t_end;
  cfg.r_max = t_end + 10.0;
  return cfg;
}

void runtime_limit(Check& c, const Stopwatch& w, double limit) {
  const double s = w.seconds();
  c.expect(s <= limit, fmt::format("runtime {:.0f} s over the {:.0f} s budget", s, limit));
}

// ---------------------------------------------------------------------------

void wave_decay(Check& c, const SuiteOptions& opt) {
  const Stopwatch watch;
  const auto cfg = long_run(200.0);
  const int stride = static_cast<int>(std::lround(0.5 / cfg.dt));
  RetardedProbeRecorder ray(cfg.grid(), cfg.t_start, stride, 20.0);
  SupNormRecorder sup(stride);
  ProbeRecorder fixed(cfg.grid(), {10.0}, stride);
  evolve_kg_radial(0.0, bump_data(), cfg, {&ray, &sup, &fixed});
  runtime_limit(c, watch, 120.0);

  const auto fit = decay_fit(ray.times, abs_values(ray.values), opt.seed);
  std::vector<double> st, sv;
  double fixed_max = 0.0;
  for (std::size_t i = 0; i < sup.times.size(); ++i) {
    if (sup.times[i] < 20.0) continue;
    st.push_back(sup.times[i]);
    sv.push_back(sup.sup[i]);
  }
  for (std::size_t i = 0; i < fixed.times.size(); ++i)
    if (fixed.times[i] >= 20.0) fixed_max = std::max(fixed_max, std::abs(fixed.values[0][i]));
  const auto sup_fit = decay_fit(st, sv, opt.seed);
  c.expect(std::abs(fit.exponent + 4.0) <= 0.3, fmt::format("exponent {:.3f} outside -4 +- 0.3", fit.exponent));
  c.metric("exponent", fit.exponent);
  c.metric("sup_exponent", sup_fit.exponent);
  c.metric("fixed_r10_max", fixed_max);
  c.note("exponent {:.3f} [{:.3f}, {:.3f}] along t - r = 4 over t in [20, 200]", fit.exponent, fit.ci_low, fit.ci_high);
  c.note("sup-norm exponent {:.3f}; |u(t, r=10)| <= {:.1e} for t >= 20 (sharp Huygens)", sup_fit.exponent, fixed_max);
}

void klein_gordon_decay(Check& c, const SuiteOptions& opt) {
  const Stopwatch watch;
  const auto cfg = long_run(200.0);
  ProbeRecorder axis(cfg.grid(), {0.0}, 1);
  evolve_kg_radial(kMassSquared, bump_data(), cfg, {&axis});
  runtime_limit(c, watch, 120.0);
  const auto [px, py] = envelope_peaks(axis.times, axis.values[0]);
  std::vector<double> x, y;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (px[i] < 20.0) continue;
    x.push_back(px[i]);
    y.push_back(std::abs(py[i]));
  }
  const auto fit = decay_fit(x, y, opt.seed);
  c.expect(std::abs(fit.exponent + 4.5) <= 0.5, fmt::format("exponent {:.3f} outside -4.5 +- 0.5", fit.exponent));
  c.metric("exponent", fit.exponent);
  c.note("envelope exponent {:.3f} [{:.3f}, {:.3f}] from {} peaks on r = 0, t in [20, 200]", fit.exponent, fit.ci_low,
         fit.ci_high, x.size());
}

void hyperboloidal_decay(Check& c, const SuiteOptions& opt) {
  const Stopwatch watch;
  const auto s = uniform_grid(5.0, 20.0, 1.0);
  const double t_last = (s.back() * s.back() + 2.25) / 3.0;
  auto cfg = long_run(t_last + 1.0);
  cfg.model = FlatTorus::cube(1, 1.0);
  const std::vector<ModeInit> modes = {{0.0, "k=(0)", 1.0, bump_data(1.0)},
                                       {kMassSquared, "k=(1)", 0.5, bump_data(0.5)}};
  const auto runs = evolve_linearized_product(
      cfg, modes,
      [&](const ModeInit&) {
        std::vector<std::unique_ptr<SliceObserver>> obs;
        obs.push_back(std::make_unique<HyperboloidRecorder>(cfg.n, cfg.grid(), cfg.dt, s, 2.0, cfg.t_start));
        return obs;
      },
      opt.workers);
  runtime_limit(c, watch, 180.0);
  // sup over the circle of u0 + u1 cos(2 pi theta) is |u0| + |u1|.
  std::vector<double> sup;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& a = static_cast<const HyperboloidRecorder&>(*runs[0].observers[0]).slice(static_cast<int>(i));
    const auto& b = static_cast<const HyperboloidRecorder&>(*runs[1].observers[0]).slice(static_cast<int>(i));
    double m = 0.0;
    for (std::size_t k = 0; k < a.jet.size(); ++k)
      m = std::max(m, std::abs(a.jet[k][jet_index(0, 0)]) + std::abs(b.jet[k][jet_index(0, 0)]));
    sup.push_back(m);
  }
  const auto fit = decay_fit(s, sup, opt.seed);
  c.expect(fit.exponent <= -3.1, fmt::format("exponent {:.3f} above -3.1", fit.exponent));
  c.metric("exponent", fit.exponent);
  c.note("sup over Sigma_s x S^1 decays with exponent {:.3f} [{:.3f}, {:.3f}] for s in [5, 20]", fit.exponent,
         fit.ci_low, fit.ci_high);
}

void energy_conservation(Check& c, const SuiteOptions&) {
  const auto s = uniform_grid(2.0, 20.0, 0.25);
  auto spread_at = [&](double dr) {
    EvolutionConfig cfg;
    cfg.n = 9;
    cfg.dr = dr;
    cfg.dt = 0.4 * dr;
    cfg.t_begin = 1.9;
    cfg.t_end = 136.0;
    cfg.r_max = 150.0;
    HyperboloidRecorder rec(9, cfg.grid(), cfg.dt, s, 2.0, cfg.t_start);
    evolve_kg_radial(0.0, bump_data(), cfg, {&rec});
    double lo = 1e300, hi = 0.0;
    for (int i = 0; i < rec.count(); ++i) {
      const double e = hyperboloidal_energy(ModeSlice{&rec.slice(i), 0.0, 1.0, 1.0});
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
    return (hi - lo) / hi;
  };
  const double coarse = spread_at(1.0 / 64);
  const double fine = spread_at(1.0 / 128);
  const double order = std::log2(coarse / fine);
  c.expect(coarse <= 0.01, fmt::format("spread {:.3f}% at dr = 1/64", 100 * coarse));
  c.expect(fine <= 0.0025, fmt::format("spread {:.3f}% at dr = 1/128", 100 * fine));
  c.expect(order >= 1.8, fmt::format("convergence order {:.2f}", order));
  c.metric("spread_coarse", coarse);
  c.metric("spread_fine", fine);
  c.note("E[0] spread over s in [2, 20]: {:.3f}% (dr 1/64), {:.3f}% (dr 1/128), order {:.2f}", 100 * coarse,
         100 * fine, order);
}

void energy_nonnegative(Check& c, const SuiteOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const RadialGrid grid(1.0 / 32, 6.0);
  double worst = 1e300;
  int draws = 0;
  while (draws < 100) {
    InternalModel model;
    if (U(rng) < 0.5) {
      const int d = 1 + static_cast<int>(3 * U(rng));
      std::vector<double> periods;
      for (int i = 0; i < d; ++i) periods.push_back(0.5 + 1.5 * U(rng));
      model = FlatTorus(d, periods);
    } else {
      std::vector<SpectralMode> list{{0.0, 1, "zero"}};
      const int extra = 1 + static_cast<int>(4 * U(rng));
      for (int i = 0; i < extra; ++i) list.push_back({50.0 * U(rng), 1 + static_cast<int>(3 * U(rng)), ""});
      model = SpectralData(6, list);
    }
    if (!is_linearly_stable(model).stable) continue;
    const auto spec = lichnerowicz_spectrum(model, 200.0);
    const int count = 1 + static_cast<int>(3 * U(rng));
    std::vector<std::unique_ptr<HyperboloidRecorder>> recs;
    std::vector<ModeSlice> modes;
    double scale = 0.0;
    for (int m = 0; m < count; ++m) {
      const auto& entry = spec.entries[static_cast<std::size_t>(U(rng) * spec.entries.size())];
      const double a0 = 2.0 * U(rng) - 1.0, a1 = 2.0 * U(rng) - 1.0, w = 0.5 + 1.5 * U(rng);
      auto f = [=](double t, double r) { return (a0 + a1 * (t - 4.0)) * bump(r, w); };
      auto ft = [=](double, double r) { return a1 * bump(r, w); };
      recs.push_back(record_analytic_field(9, grid, 0.4 / 32, {4.0}, f, ft, w, 4.0));
      const double norm2 = 0.5 + 1.5 * U(rng);
      modes.push_back(ModeSlice{&recs.back()->slice(0), entry.lambda, norm2, 1.0});
      const auto& sj = recs.back()->slice(0);
      std::vector<double> dens(sj.slice.size());
      for (int k = 0; k < sj.slice.size(); ++k) {
        const auto& j = sj.jet[k];
        dens[k] = (1.0 + entry.lambda) * j[jet_index(0, 0)] * j[jet_index(0, 0)] +
                  j[jet_index(1, 0)] * j[jet_index(1, 0)] + j[jet_index(0, 1)] * j[jet_index(0, 1)];
      }
      scale += norm2 * integrate(sj.slice, dens);
    }
    const double e = hyperboloidal_energy(modes);
    worst = std::min(worst, e / std::max(scale, 1e-300));
    ++draws;
  }
  c.expect(worst >= -1e-10, fmt::format("min E/scale = {:.3e}", worst));
  c.metric("min_ratio", worst);
  c.note("min E[0]/scale over {} stable draws = {:.3e}", draws, worst);
}

void equivalence_window(Check& c, const SuiteOptions& opt) {
  EvolutionConfig cfg;
  cfg.n = 9;
  cfg.t_begin = 3.9;
  cfg.t_end = 40.0;
  cfg.r_max = 60.0;
  const std::vector<double> s{4.0, 6.0, 8.0};
  HyperboloidRecorder rec(9, cfg.grid(), cfg.dt, s, 2.0, cfg.t_start);
  evolve_kg_radial(0.0, bump_data(), cfg, {&rec});
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> deltas;
  for (double d = 0.01; d < 1000.0; d *= 1.25) deltas.push_back(d);
  double rlo = 1e300, rhi = 0.0, star_min = 1e300;
  int exits = 0, cases = 0;
  for (int i = 0; i < rec.count(); ++i) {
    const ModeSlice m{&rec.slice(i), 0.0, 1.0, 1.0};
    for (int p = 0; p < 4; ++p) {
      const GammaPoint pattern{U(rng), U(rng), U(rng), U(rng)};
      const auto small = equivalence_check(m, scaled_gamma(rec.slice(i).slice, pattern, 1e-3));
      c.expect(small.sup_t_gamma <= 1e-3 * (1 + 1e-12), "sup t|gamma| above 1e-3");
      rlo = std::min(rlo, small.ratio);
      rhi = std::max(rhi, small.ratio);
      const auto scan = equivalence_scan(m, pattern, deltas);
      if (scan.exited_while_small) ++exits;
      if (scan.delta_star > 0.0) star_min = std::min(star_min, scan.delta_star);
      ++cases;
    }
  }
  c.expect(rlo >= 0.9 && rhi <= 1.1, fmt::format("ratio range [{:.4f}, {:.4f}]", rlo, rhi));
  c.expect(exits == 0, fmt::format("{} scans left [1/2, 2] while small", exits));
  c.metric("ratio_min", rlo);
  c.metric("ratio_max", rhi);
  c.note("{} slice/pattern cases: ratio in [{:.5f}, {:.5f}] at delta = 1e-3; no exit from [1/2, 2] below the "
         "smallness threshold {} (first exit at delta {:.3g})",
         cases, rlo, rhi, kEquivalenceEpsilon, star_min);
}

void torus_spectrum(Check& c, const SuiteOptions&) {
  const double top = kMassSquared * 25.0;
  const auto spec = lichnerowicz_spectrum(FlatTorus::cube(2, 1.0), top * (1.0 + 1e-9));
  // Direct summation over the integer lattice, grouped by k1^2 + k2^2.
  std::map<int, int> oracle;
  for (int a = -5; a <= 5; ++a)
    for (int b = -5; b <= 5; ++b)
      if (a * a + b * b <= 25) oracle[a * a + b * b] += 3;
  std::map<int, int> got;
  double worst = 0.0;
  for (const auto& e : spec.entries) {
    const double q = e.lambda / kMassSquared;
    const int key = static_cast<int>(std::lround(q));
    worst = std::max(worst, std::abs(e.lambda - kMassSquared * key) / std::max(1.0, e.lambda));
    got[key] += e.multiplicity;
  }
  c.expect(worst <= 1e-8, fmt::format("eigenvalue error {:.2e}", worst));
  c.expect(got == oracle, "multiplicities differ from direct summation");
  c.metric("max_rel_error", worst);
  c.note("{} distinct eigenvalues, {} modes with |k| <= 5, max relative error {:.1e}", oracle.size(),
         spec.total_multiplicity(), worst);
}

void estimate_stability(Check& c, const SuiteOptions&) {
  const auto params = sobolev_params(9, 1);
  // The t-weighted Sobolev form follows from the s-weighted one; it is
  // reported but not gated.
  const char* names[] = {"hardy", "sobolev_s", "sobolev_t"};
  const auto gated = [](const std::string& n) { return n != "sobolev_t"; };
  std::map<std::string, std::vector<double>> constants;
  std::string listing;
  for (double dr : {1.0 / 32, 1.0 / 64}) {
    for (double s : {4.0, 8.0, 16.0}) {
      auto f = [s](double, double r) { return bump(r / s, 0.4); };
      auto ft = [](double, double) { return 0.0; };
      const auto rec = record_analytic_field(9, RadialGrid(dr, 1.5 * s), 0.4 * dr, {s}, f, ft, 0.4 * s, s);
      const auto row = estimate_suite(ModeSlice{&rec->slice(0), 0.0, 1.0, 1.0}, params);
      for (const char* n : names) {
        const auto& e = row.entry(n);
        c.expect(!e.skipped && std::isfinite(e.constant), fmt::format("{} not measured at s={}", n, s));
        constants[n].push_back(e.constant);
      }
    }
  }
  for (const char* n : names) {
    const auto& v = constants[n];
    const double ref = v.front();
    double dev = 0.0;
    for (double x : v) dev = std::max(dev, std::abs(x / ref - 1.0));
    if (gated(n)) c.expect(dev <= 0.2, fmt::format("{} varies by {:.1f}%", n, 100 * dev));
    c.metric(std::string(n) + "_max_deviation", dev);
    c.note("{} = {:.4f}, max deviation {:.1f}%", n, ref, 100 * dev);
  }
}

void harmonic_schwarzschild(Check& c, const SuiteOptions& opt) {
  SchwarzschildParams p;
  p.n = 9;
  p.c_s = 0.1;
  const HarmonicChart refined(p, HarmonicVariant::Harmonic, 2);
  const HarmonicChart literal(p, HarmonicVariant::Literal, 1);
  const auto r = log_grid(20.0, 200.0, 16);
  std::vector<double> dev, v_ref, v_lit;
  for (double x : r) {
    std::vector<double> pt(p.n + 1, 0.0);
    pt[1] = x;
    dev.push_back(harmonic_deviation(refined, x));
    v_ref.push_back(tensor_norm(harmonic_wave_gauge_residual(refined, pt)));
    v_lit.push_back(tensor_norm(harmonic_wave_gauge_residual(literal, pt)));
  }
  const double dev_slope = decay_fit(r, dev, opt.seed).exponent;
  const double v_slope = decay_fit(r, v_ref, opt.seed).exponent;
  const double lit_slope = decay_fit(r, v_lit, opt.seed).exponent;
  c.expect(std::abs(dev_slope + 7.0) <= 0.05, fmt::format("|g - eta| slope {:.4f}", dev_slope));
  c.expect(v_slope < -8.0, fmt::format("|V| slope {:.3f} not steeper than -8", v_slope));
  c.metric("deviation_slope", dev_slope);
  c.metric("gauge_slope", v_slope);
  c.note("|g - eta| slope {:.4f}; |V| slope {:.3f} (order-2 chart), {:.3f} with the leading-order literal chart",
         dev_slope, v_slope, lit_slope);
}

void geodesic_probe(Check& c, const SuiteOptions&) {
  SchwarzschildParams p;
  p.n = 9;
  p.c_s = 0.05;
  const HarmonicChart chart(p, HarmonicVariant::Harmonic, 2);
  GeodesicOptions opt;
  opt.lambda_end = 1e6;
  opt.stop_radius = 1e3;
  const auto res = integrate_geodesic(chart, radial_null_state(chart, 10.0, 12.0), opt);
  c.expect(res.t_monotone, "t not strictly increasing");
  c.expect(res.samples.back().r >= 1e3, "ray did not reach r = 1000");
  c.expect(std::abs(res.asymptotic_drdt - 1.0) <= 1e-3, fmt::format("dr/dt = {:.6f}", res.asymptotic_drdt));
  c.expect(res.norm_drift_rate <= 1e-8, fmt::format("norm drift {:.2e} per unit lambda", res.norm_drift_rate));
  c.metric("drdt_minus_one", res.asymptotic_drdt - 1.0);
  c.metric("norm_drift_rate", res.norm_drift_rate);
  c.note("t monotone over {} steps; dr/dt - 1 = {:.1e} at r = {:.0f}; norm drift {:.1e} per unit lambda", res.steps,
         res.asymptotic_drdt - 1.0, res.samples.back().r, res.norm_drift_rate);
}

/// Keeps u at chosen times.
class SliceCapture : public SliceObserver {
 public:
  SliceCapture(std::vector<double> targets, double dt) : targets_(std::move(targets)), dt_(dt), u(targets_.size()) {}
  void on_slice(double t, const std::vector<double>& uu, const std::vector<double>&, int) override {
    for (std::size_t i = 0; i < targets_.size(); ++i)
      if (std::abs(t - targets_[i]) < 0.25 * dt_) u[i] = uu;
  }

 private:
  std::vector<double> targets_;
  double dt_;

 public:
  std::vector<std::vector<double>> u;
};

void oracle_equivalence(Check& c, const SuiteOptions& opt) {
  const FlatTorus torus = FlatTorus::cube(1, 1.0);
  const auto targets = uniform_grid(4.0, 20.0, 0.5);
  auto profile = [](double r, double th) {
    return bump(r, 2.0) * (1.0 + 0.5 * std::cos(2.0 * kPi * th) + 0.25 * std::sin(4.0 * kPi * th));
  };

  FullGridConfig fc;
  fc.r_max = 24.0;
  FullGridWave3 grid_solver(fc, 4.0, profile, [](double, double) { return 0.0; }, 2.0);

  EvolutionConfig cfg;
  cfg.n = 3;
  cfg.model = torus;
  cfg.dr = 1.0 / 1024;
  cfg.dt = 0.4 * cfg.dr;
  cfg.r_max = 26.0;
  cfg.t_end = 20.0;
  const std::vector<ModeInit> modes = {{0.0, "k=(0)", 1.0, bump_data(1.0)},
                                       {torus.eigenvalue({1}), "k=(1)", 0.5, bump_data(0.5)},
                                       {torus.eigenvalue({2}), "k=(2) sin", 0.5, bump_data(0.25)}};
  const std::vector<TorusBasisTag> tags = {{{0}, false}, {{1}, false}, {{2}, true}};
  const auto runs = evolve_linearized_product(
      cfg, modes,
      [&](const ModeInit&) {
        std::vector<std::unique_ptr<SliceObserver>> obs;
        obs.push_back(std::make_unique<SliceCapture>(targets, cfg.dt));
        return obs;
      },
      opt.workers);

  const int ratio = static_cast<int>(std::lround(fc.dr / cfg.dr));
  double worst = 0.0, worst_t = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    grid_solver.advance_to(targets[i]);
    const auto snap = grid_solver.snapshot();
    for (std::size_t k = 0; k < snap.r.size(); ++k) {
      for (int m = 0; m < snap.points; ++m) {
        const std::vector<double> th{snap.torus_point(m)};
        double assembled = 0.0;
        for (std::size_t q = 0; q < modes.size(); ++q) {
          const auto& cap = static_cast<const SliceCapture&>(*runs[q].observers[0]);
          if (cap.u[i].empty()) throw std::runtime_error("mode run missed a comparison time");
          assembled += cap.u[i][k * ratio] * amplitude_basis(torus, tags[q], th);
        }
        const double err = std::abs(assembled - snap.values[k][m]);
        if (err > worst) {
          worst = err;
          worst_t = targets[i];
        }
      }
    }
  }
  c.expect(worst <= 1e-6, fmt::format("L-infinity difference {:.2e}", worst));
  c.metric("linf", worst);
  c.note("max |mode-assembled - full grid| = {:.2e} (at t = {}) over {} times in [4, 20]", worst, worst_t,
         targets.size());
}

void quasilinear_consistency(Check& c, const SuiteOptions&) {
  const std::array<InitialData, kToyComponents> data{bump_data(1.0), outgoing_bump_data(0.5), bump_data(-0.25)};
  // epsilon = 0 against the linear solver.
  {
    EvolutionConfig cfg;
    cfg.n = 9;
    cfg.r_max = 40.0;
    cfg.t_end = 30.0;
    cfg.nonlinearity = Nonlinearity::QuasilinearToy;
    const auto toy = evolve_quasilinear_toy(cfg, data);
    EvolutionConfig lin = cfg;
    lin.nonlinearity = Nonlinearity::Linear;
    bool same = toy.completed;
    for (int k = 0; k < kToyComponents; ++k) {
      const auto run = evolve_kg_radial(0.0, data[k], lin);
      same = same && run.u == toy.u[k] && run.v == toy.v[k];
    }
    c.expect(same, "epsilon = 0 toy differs from the linear run");
  }
  const double eps = 1e-3;
  auto cfg = long_run(200.0);
  cfg.nonlinearity = Nonlinearity::QuasilinearToy;
  cfg.epsilon = eps;
  const auto s = uniform_grid(5.0, 24.0, 0.25);
  std::array<std::unique_ptr<HyperboloidRecorder>, kToyComponents> rec;
  std::array<std::vector<SliceObserver*>, kToyComponents> obs;
  for (int k = 0; k < kToyComponents; ++k) {
    rec[k] = std::make_unique<HyperboloidRecorder>(9, cfg.grid(), cfg.dt, s, 2.0, cfg.t_start);
    obs[k] = {rec[k].get()};
  }
  const auto run = evolve_quasilinear_toy(cfg, data, obs);
  c.expect(run.completed && run.blowup_time < 0.0, fmt::format("run stopped at t = {}", run.t_final));
  if (!run.completed) return;
  const double weight[kToyComponents] = {1.0, 2.0, 1.0};
  std::vector<double> E, F;
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    const auto& sl = rec[0]->slice(i).slice;
    std::vector<GammaPoint> gamma(sl.size());
    std::array<std::vector<double>, kToyComponents> forcing;
    for (auto& f : forcing) f.assign(sl.size(), 0.0);
    for (int k = 0; k < sl.size(); ++k) {
      Sym2 h;
      std::array<Sym2, 2> dh;
      for (int q = 0; q < kToyComponents; ++q) {
        const auto& jet = rec[q]->slice(i).jet[k];
        h[q] = jet[jet_index(0, 0)];
        dh[0][q] = jet[jet_index(1, 0)];
        dh[1][q] = jet[jet_index(0, 1)];
      }
      gamma[k] = toy_gamma_point(h, dh, eps);
      const Sym2 qv = toy_q(h, dh, eps);
      for (int q = 0; q < kToyComponents; ++q) forcing[q][k] = eps * qv[q];
    }
    double e = 0.0, f = 0.0;
    for (int q = 0; q < kToyComponents; ++q) {
      const ModeSlice m{&rec[q]->slice(i), 0.0, 1.0, weight[q]};
      e += hyperboloidal_energy(m, gamma);
      f += identity_flux(m, forcing[q], gamma);
    }
    E.push_back(e);
    F.push_back(f);
  }
  const auto res = energy_identity_residual(s, E, F);
  c.expect(res.max_residual <= 0.05, fmt::format("identity residual {:.2f}%", 100 * res.max_residual));
  c.metric("identity_residual", res.max_residual);
  c.metric("max_cfl", run.max_cfl);
  c.note("epsilon = 0 bit-identical to linear; epsilon = 1e-3 reached t = {:.6g} (max CFL {:.4f}), identity residual "
         "{:.2f}% over s in [5, 24]",
         run.t_final, run.max_cfl, 100 * res.max_residual);
}

}  // namespace

std::vector<CheckDef> acceptance_checks() {
  return {
      {"c01", "wave decay, lambda 0, n 9", wave_decay},
      {"c02", "Klein-Gordon decay on the axis, lambda 4 pi^2, n 9", klein_gordon_decay},
      {"c03", "hyperboloidal sup-norm decay of a product solution", hyperboloidal_decay},
      {"c04", "energy conservation and its convergence", energy_conservation},
      {"c05", "energy nonnegativity over random stable draws", energy_nonnegative},
      {"c06", "energy equivalence window", equivalence_window},
      {"c07", "T^2 spectrum against direct summation", torus_spectrum},
      {"c08", "Hardy and Sobolev constants stable in s and resolution", estimate_stability},
      {"c09", "harmonic Schwarzschild decay and wave gauge", harmonic_schwarzschild},
      {"c10", "radial null geodesic probe", geodesic_probe},
      {"c11", "mode assembly against the full-grid solver", oracle_equivalence},
      {"c12", "quasilinear toy consistency", quasilinear_consistency},
  };
}

}  // namespace kkstab::verify
