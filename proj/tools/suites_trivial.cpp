#include <cmath>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "kkstab/energy.hpp"
#include "kkstab/evolve.hpp"
#include "kkstab/schwarzschild.hpp"
#include "kkstab/toy.hpp"
#include "suite_registry.hpp"

namespace kkstab::verify {

namespace {

constexpr double kPi = std::numbers::pi;

double minkowski_square(double t, double r) { return t * t - r * r; }
double radial_gaussian(double t, double r) { return std::exp(-r * r) * (1.0 + 0.1 * t); }

SchwarzschildParams schwarzschild(int n, double c_s) {
  SchwarzschildParams p;
  p.n = n;
  p.c_s = c_s;
  return p;
}

void coordinates(Check& c, const SuiteOptions&) {
  const auto a = to_hyperboloidal({5.0, {3.0, 0.0, 0.0}});
  c.expect(a.s == 4.0 && a.y[0] == 3.0 && a.y[1] == 0.0, "(t=5, x=(3,0,0)) -> (s=4, y=(3,0,0))");
  const auto b = to_hyperboloidal({7.0, {0.0, 0.0}});
  c.expect(b.s == 7.0 && b.y[0] == 0.0, "(t=7, x=0) -> (s=7, y=0)");
  c.expect(t_max_on_slice(1.0) == 1.0 && t_max_on_slice(3.0) == 5.0, "t_max(1) = 1, t_max(3) = 5");
  c.note("s=4 and s=7 recovered, t_max exact");
}

void generators(Check& c, const SuiteOptions&) {
  const RadialGrid grid(0.05, 3.0);
  const auto radial = sample_window(grid, 5.0, 0.02, 5, radial_gaussian);
  const auto square = sample_window(grid, 5.0, 0.02, 5, minkowski_square);
  double rot = 0.0, boost = 0.0;
  for (int k = 0; k + 1 < grid.size(); ++k) {
    rot = std::max(rot, std::abs(apply_generator(Generator::lorentz(1, 2), radial, {2, k})));
    boost = std::max(boost, std::abs(apply_generator(Generator::lorentz(0, 1), square, {2, k})));
  }
  c.expect(rot == 0.0, "rotation of radial data is not zero");
  c.expect(boost < 1e-11, fmt::format("Z_01 (t^2 - r^2) = {:.2e}", boost));
  c.note("|Z_12 u| = {:.1e}, |Z_01 (t^2 - r^2)| = {:.1e}", rot, boost);
}

void commuting_translations(Check& c, const SuiteOptions&) {
  auto poly = [](double t, double r) { return 1.0 + t + 2.0 * t * r * r + r * r * r * r; };
  const RadialGrid grid(0.1, 3.0);
  const auto w = sample_window_fn(grid, 5.0, 0.1, 7, poly);
  const auto tx = apply_on_window(Generator::translation(1), apply_on_window(Generator::translation(0), w));
  const auto xt = apply_on_window(Generator::translation(0), apply_on_window(Generator::translation(1), w));
  double defect = 0.0;
  for (int j = 0; j < tx.slices(); ++j)
    for (int k = 0; k < grid.size(); ++k) defect = std::max(defect, std::abs(tx.u[j][k] - xt.u[j][k]));
  c.expect(defect < 1e-9, fmt::format("[T, X_1] defect {:.2e}", defect));
  c.note("[T, X_1] u defect {:.1e} on a polynomial", defect);
}

void torus_zero_mode(Check& c, const SuiteOptions&) {
  for (int d = 1; d <= 3; ++d) {
    const FlatTorus torus = FlatTorus::cube(d, 1.0 + 0.5 * d);
    const auto spec = lichnerowicz_spectrum(torus, 1.0);
    const auto grouped = spec.grouped();
    c.expect(!grouped.empty() && grouped.front().lambda == 0.0, fmt::format("d={}: lowest eigenvalue not 0", d));
    c.expect(!grouped.empty() && grouped.front().multiplicity >= d * (d + 1) / 2,
             fmt::format("d={}: zero-mode multiplicity below d(d+1)/2", d));
    const auto st = is_linearly_stable(torus);
    c.expect(st.stable && st.lambda_min == 0.0, fmt::format("d={}: flat torus not reported stable", d));
  }
  c.note("lambda_min = 0 with multiplicity d(d+1)/2 for d = 1, 2, 3");
}

void unstable_spectrum(Check& c, const SuiteOptions&) {
  const SpectralData data(4, {{-0.3, 1, "negative"}, {2.0, 5, "positive"}});
  const auto st = is_linearly_stable(data);
  c.expect(!st.stable && st.lambda_min == -0.3, "{(-0.3,1),(2,5)} should give (false, -0.3)");
  c.note("(stable, lambda_min) = ({}, {})", st.stable, st.lambda_min);
}

void spectrum_file(Check& c, const SuiteOptions&) {
  std::istringstream in("internal-spectrum v1 d=2\n0 3 zero\n39.47841760435743 6 k=1\n");
  const auto data = parse_spectral_data(in, "inline");
  std::ostringstream out;
  write_spectral_data(out, data);
  std::istringstream again(out.str());
  const auto back = parse_spectral_data(again, "inline-2");
  c.expect(back.modes.size() == 2 && back.modes[1].lambda == data.modes[1].lambda, "round trip changed the data");
  std::istringstream bad("internal-spectrum v1 d=1\n0 1\nnot-a-number 2\n");
  int line = -1;
  try {
    parse_spectral_data(bad, "bad.spec");
  } catch (const SpectrumParseError& e) {
    line = e.line();
  }
  c.expect(line == 3, "malformed line 3 not reported at line 3");
  c.note("round trip exact, malformed input reported at line {}", line);
}

void constant_tensor_norms(Check& c, const SuiteOptions&) {
  TorusTensorField u;
  u.torus = FlatTorus::cube(2, 1.0);
  u.modes.push_back({{0, 0}, {1.0, -2.0, 0.5}, {0.0, 0.0, 0.0}});
  const auto n = elliptic_norms(u, 2, 8, 100.0);
  c.expect(std::abs(n.h_norm - n.l2_norm) < 1e-12, "H^4 norm differs from L^2 norm");
  c.expect(n.lap_norm < 1e-12, "Lap^2 u not zero");
  c.note("||u||_H4 = ||u||_L2 = {:.6f}, ||Lap^2 u|| = {:.1e}", n.l2_norm, n.lap_norm);
}

void constant_on_torus(Check& c, const SuiteOptions&) {
  const RadialGrid grid(0.25, 2.0);
  TinyProductGrid h;
  h.torus = FlatTorus::cube(1, 2.0 * kPi);
  h.points = 8;
  for (int k = 0; k < grid.size(); ++k) {
    h.r.push_back(grid.r(k));
    h.values.emplace_back(8, std::exp(-grid.r(k) * grid.r(k)));
  }
  const auto f = mode_decompose(h, grid, 3, 4.0);
  c.expect(f.modes.size() == 1 && f.modes[0].lambda == 0.0, "constant field did not give a single zero mode");
  c.note("{} mode(s), lambda = {}", f.modes.size(), f.modes.empty() ? -1.0 : f.modes[0].lambda);
}

void zero_field(Check& c, const SuiteOptions&) {
  const RadialGrid grid(1.0 / 32, 8.0);
  auto zero = [](double, double) { return 0.0; };
  const auto rec = record_analytic_field(9, grid, 0.4 / 32, {4.0}, zero, zero, 2.0, 4.0);
  const ModeSlice m{&rec->slice(0), 0.0, 1.0, 1.0};
  c.expect(hyperboloidal_energy(m) == 0.0, "E[0] of the zero field");
  c.expect(boosted_energy(3, m) == 0.0, "E_3 of the zero field");
  const auto row = estimate_suite(m, sobolev_params(9, 1));
  bool skipped = true;
  for (const auto& e : row.entries) skipped = skipped && e.skipped;
  c.expect(skipped, "estimate ratios of the zero field not reported as skipped");
  const auto T = stress_tensor(9, {}, std::vector<double>(10, 0.0), 0.0, 0.0);
  double tmax = 0.0;
  for (double x : T) tmax = std::max(tmax, std::abs(x));
  c.expect(tmax == 0.0, "stress tensor of the zero field");
  c.note("energies 0, stress tensor 0, {} estimate ratios skipped", row.entries.size());
}

void hyperboloid_sampling(Check& c, const SuiteOptions&) {
  const RadialGrid grid(0.1, 6.0);
  ModeField m;
  m.n = 3;
  m.grid = grid;
  m.dt = 0.1;
  for (int j = 0; j < 60; ++j) {
    const double t = 2.0 + 0.1 * j;
    m.times.push_back(t);
    std::vector<double> u(grid.size()), v(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
      u[k] = minkowski_square(t, grid.r(k)) + t;
      v[k] = 2.0 * t + 1.0;
    }
    m.u.push_back(u);
    m.v.push_back(v);
  }
  const auto slice = make_slice(3, 3.0, grid, 5.0);
  const auto p = sample_on_hyperboloid(m, slice);
  double err = 0.0, derr = 0.0;
  for (int k = 0; k < slice.size(); ++k) {
    err = std::max(err, std::abs(p.u[k] - 9.0 - std::hypot(3.0, slice.r[k])));
    derr = std::max(derr, std::abs(p.dt_u[k] - 2.0 * slice.t[k] - 1.0));
  }
  c.expect(err < 1e-10 && derr < 1e-10, fmt::format("sampling error {:.1e}, d_t error {:.1e}", err, derr));
  c.note("u = t^2 - r^2 + t sampled as s^2 + sqrt(s^2 + r^2) within {:.1e}", err);
}

void schwarzschild_closed_form(Check& c, const SuiteOptions&) {
  const auto flat = schwarzschild_metric(schwarzschild(9, 0.0), {0.0, 3.0, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4});
  c.expect(flat.metric(0, 0) == -1.0, "C_S = 0 g_tt != -1");
  const auto g = schwarzschild_metric(schwarzschild(9, 1.0), {0.0, 2.0, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4});
  c.expect(g.metric(0, 0) == -0.9921875, fmt::format("g_tt = {} at rbar = 2", g.metric(0, 0)));
  c.note("g_tt = -1 for C_S = 0, g_tt = {} for n=9, C_S=1, rbar=2", g.metric(0, 0));
}

void harmonic_chart_trivial(Check& c, const SuiteOptions&) {
  const HarmonicChart flat(schwarzschild(9, 0.0));
  c.expect(flat.radius(7.5) == 7.5, "C_S = 0 chart is not the identity");
  c.expect(harmonic_deviation(flat, 20.0) == 0.0, "C_S = 0 metric is not Minkowski");
  std::vector<double> x(10, 0.0);
  x[0] = 30.0;
  x[1] = 12.0;
  double v = 0.0;
  for (double e : harmonic_wave_gauge_residual(flat, x)) v = std::max(v, std::abs(e));
  c.expect(v == 0.0, "C_S = 0 wave-gauge residual nonzero");
  const HarmonicChart literal(schwarzschild(9, 1.0), HarmonicVariant::Literal, 1);
  const double r = literal.radius(10.0);
  c.expect(std::abs(r - 9.9999995) < 1e-12, fmt::format("literal r(10) = {:.10f}", r));
  c.note("identity chart and V = 0 for C_S = 0; literal r(10) = {:.7f}", r);
}

void flat_constraints(Check& c, const SuiteOptions&) {
  const auto flat = schwarzschild_slice_metric(schwarzschild(9, 0.0));
  const auto res = constraint_residual(flat, {{1, 2, 0, 0, 0, 0, 0, 0, 0, 0.5}}, 1e-2);
  c.expect(res.hamiltonian == 0.0 && res.momentum == 0.0, "flat product constraints nonzero");
  c.note("Hamiltonian {} momentum {}", res.hamiltonian, res.momentum);
}

void straight_null_ray(Check& c, const SuiteOptions&) {
  const HarmonicChart flat(schwarzschild(9, 0.0));
  GeodesicOptions opt;
  opt.lambda_end = 50.0;
  const auto res = integrate_geodesic(flat, radial_null_state(flat, 1.0, 5.0), opt);
  c.expect(std::abs(res.asymptotic_drdt - 1.0) < 1e-14, "dr/dt differs from 1");
  c.expect(std::abs(res.final_state.x[1] - 51.0) < 1e-10, "ray is not the straight line r = 1 + lambda");
  c.note("dr/dt - 1 = {:.1e}", res.asymptotic_drdt - 1.0);
}

void uniform_klein_gordon(Check& c, const SuiteOptions&) {
  const RadialGrid grid(1.0 / 32, 30.0);
  RadialKG kg(9, 1.0, grid, 0.4 / 32);
  kg.set_causal_margin(0.0);
  kg.set_state(4.0, std::vector<double>(grid.size(), 1.0), std::vector<double>(grid.size(), 0.0), 30.0);
  for (int i = 0; i < 800; ++i) kg.step();
  const double t = 800 * kg.dt();
  double err = 0.0;
  for (int k : {0, 10, 200}) err = std::max(err, std::abs(kg.u()[k] - std::cos(t)));
  c.expect(err < 1e-8, fmt::format("|u - cos t| = {:.1e}", err));
  c.note("|u - cos(sqrt(lambda) t)| = {:.1e} after {} steps", err, 800);
}

void single_zero_mode(Check& c, const SuiteOptions& opt) {
  EvolutionConfig cfg;
  cfg.r_max = 20.0;
  cfg.t_end = 10.0;
  const std::vector<ModeInit> modes = {{0.0, "k=(0)", 1.0, bump_data()}, {4.0 * kPi * kPi, "k=(1)", 0.5, bump_data(0.5)}};
  const auto runs = evolve_linearized_product(cfg, modes, {}, opt.workers);
  const auto wave = evolve_kg_radial(0.0, bump_data(), cfg);
  c.expect(runs[0].summary.u == wave.u, "zero mode differs from the pure wave run");
  // Modes evolve independently: the product run of each mode equals its solo run.
  const auto massive = evolve_kg_radial(4.0 * kPi * kPi, bump_data(0.5), cfg);
  c.expect(runs[1].summary.u == massive.u, "massive mode differs from its solo run");
  c.note("zero mode bit-identical to the wave run, modes decoupled");
}

void toy_linear_limit(Check& c, const SuiteOptions&) {
  EvolutionConfig cfg;
  cfg.dr = 1.0 / 32;
  cfg.dt = 0.4 / 32;
  cfg.r_max = 20.0;
  cfg.t_end = 10.0;
  cfg.nonlinearity = Nonlinearity::QuasilinearToy;
  const std::array<InitialData, kToyComponents> data{bump_data(1.0), outgoing_bump_data(0.5), bump_data(-0.25)};
  const auto toy = evolve_quasilinear_toy(cfg, data);
  EvolutionConfig lin = cfg;
  lin.nonlinearity = Nonlinearity::Linear;
  bool same = toy.completed;
  for (int k = 0; k < kToyComponents; ++k) {
    const auto run = evolve_kg_radial(0.0, data[k], lin);
    same = same && run.u == toy.u[k] && run.v == toy.v[k];
  }
  c.expect(same, "epsilon = 0 toy differs from the linear run");
  c.note("epsilon = 0 reproduces the linear run bit for bit");
}

void linear_sources_vanish(Check& c, const SuiteOptions&) {
  EvolutionConfig cfg;
  cfg.dr = 1.0 / 32;
  cfg.dt = 0.4 / 32;
  cfg.r_max = 20.0;
  cfg.t_end = 10.5;
  cfg.nonlinearity = Nonlinearity::QuasilinearToy;
  std::array<std::unique_ptr<HistoryRecorder>, kToyComponents> rec;
  std::array<std::vector<SliceObserver*>, kToyComponents> obs;
  for (int k = 0; k < kToyComponents; ++k) {
    rec[k] = std::make_unique<HistoryRecorder>(9, 0.0, cfg.grid(), cfg.dt, 2, 10.0 - 8 * cfg.dt - 1e-9, 10.0 + 8 * cfg.dt + 1e-9);
    obs[k] = {rec[k].get()};
  }
  evolve_quasilinear_toy(cfg, {bump_data(1.0), outgoing_bump_data(0.5), bump_data(-0.25)}, obs);
  std::array<FieldWindow, kToyComponents> w;
  for (int k = 0; k < kToyComponents; ++k) w[k] = rec[k]->field().window();
  double worst = 0.0;
  for (const auto& word : {std::vector<Generator>{}, std::vector<Generator>{Generator::lorentz(0, 1)}}) {
    const auto s = commuted_sources(w, word, 9, 0.0);
    for (int k = 0; k < kToyComponents; ++k)
      for (std::size_t i = 0; i < s.f1[k].size(); ++i)
        worst = std::max({worst, std::abs(s.f1[k][i]), std::abs(s.f2[k][i]), std::abs(s.f3[k][i]), std::abs(s.g[k][i])});
  }
  c.expect(worst == 0.0, fmt::format("largest source {:.1e}", worst));
  c.note("all commuted sources of a linear run are exactly 0");
}

void conservation_and_equivalence(Check& c, const SuiteOptions&) {
  EvolutionConfig cfg;
  cfg.dr = 1.0 / 32;
  cfg.dt = 0.4 / 32;
  cfg.r_max = 40.0;
  cfg.t_end = 30.0;
  cfg.t_begin = 1.9;
  std::vector<double> s;
  for (double x = 2.0; x <= 8.0 + 1e-9; x += 0.5) s.push_back(x);
  HyperboloidRecorder rec(9, cfg.grid(), cfg.dt, s, 2.0, 4.0);
  evolve_kg_radial(0.0, bump_data(), cfg, {&rec});
  std::vector<double> E, F;
  for (int i = 0; i < rec.count(); ++i) {
    const ModeSlice m{&rec.slice(i), 0.0, 1.0, 1.0};
    E.push_back(hyperboloidal_energy(m));
    F.push_back(identity_flux(m, {}, {}));
  }
  const auto res = energy_identity_residual(s, E, F);
  c.expect(res.max_residual < 0.01, fmt::format("identity residual {:.3e}", res.max_residual));
  const ModeSlice m{&rec.slice(4), 0.0, 1.0, 1.0};
  const auto eq = equivalence_check(m, std::vector<GammaPoint>(rec.slice(4).slice.size()));
  c.expect(eq.ratio == 1.0, "gamma = 0 ratio differs from 1");
  c.note("identity residual {:.2e} with gamma = F = 0, ratio {} for gamma = 0", res.max_residual, eq.ratio);
}

void synthetic_decay(Check& c, const SuiteOptions& opt) {
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(2.0 + i);
    y.push_back(1.0 / (x.back() * x.back()));
  }
  const auto fit = decay_fit(x, y, opt.seed);
  c.expect(std::abs(fit.exponent + 2.0) <= 1e-3, fmt::format("exponent {:.6f}", fit.exponent));
  c.metric("exponent", fit.exponent);
  c.note("y = t^-2 fitted exponent {:.6f}", fit.exponent);
}

void empty_report(Check& c, const SuiteOptions&) {
  EnergyReport r;
  r.title = "empty";
  std::ostringstream out;
  write_report_json(out, r);
  const auto j = nlohmann::json::parse(out.str());
  c.expect(j.at("schema") == kReportSchema, "schema tag missing");
  c.expect(j.at("tables").is_array() && j.at("tables").empty(), "empty report does not have zero tables");
  c.note("schema '{}' with zero tables", j.at("schema").get<std::string>());
}

}  // namespace

std::vector<CheckDef> trivial_checks() {
  return {
      {"t01", "hyperboloidal coordinates", coordinates},
      {"t02", "generators on radial and Lorentz-invariant data", generators},
      {"t03", "coordinate vector fields commute", commuting_translations},
      {"t04", "flat torus zero modes and stability", torus_zero_mode},
      {"t05", "negative supplied eigenvalue is unstable", unstable_spectrum},
      {"t06", "spectrum file round trip and diagnostics", spectrum_file},
      {"t07", "constant tensor elliptic norms", constant_tensor_norms},
      {"t08", "constant on the torus is a single zero mode", constant_on_torus},
      {"t09", "zero field", zero_field},
      {"t10", "hyperboloid sampling of exact polynomials", hyperboloid_sampling},
      {"t11", "Schwarzschild closed form", schwarzschild_closed_form},
      {"t12", "harmonic chart for zero mass and literal substitution", harmonic_chart_trivial},
      {"t13", "flat product satisfies the constraints", flat_constraints},
      {"t14", "straight null ray in Minkowski", straight_null_ray},
      {"t15", "uniform Klein-Gordon data oscillates at the mass frequency", uniform_klein_gordon},
      {"t16", "single zero mode equals the wave run", single_zero_mode},
      {"t17", "toy at epsilon 0 equals the linear run", toy_linear_limit},
      {"t18", "commuted sources vanish for linear runs", linear_sources_vanish},
      {"t19", "identity degenerates to conservation, gamma 0 ratio", conservation_and_equivalence},
      {"t20", "synthetic power law fit", synthetic_decay},
      {"t21", "empty report schema", empty_report},
  };
}

}  // namespace kkstab::verify
