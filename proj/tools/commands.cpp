#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

#include "kkstab/energy.hpp"
#include "kkstab/evolve.hpp"
#include "kkstab/internal.hpp"
#include "kkstab/schwarzschild.hpp"
#include "kkstab/toy.hpp"
#include "suites.hpp"

namespace kkstab::app {

namespace fs = std::filesystem;

OutputDir::OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

void OutputDir::write(const std::string& name, const std::function<void(std::ostream&)>& body) const {
  const fs::path target = root_ / name;
  const fs::path tmp = root_ / (name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
    body(out);
    out.flush();
    if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", tmp.string()));
  }
  fs::rename(tmp, target);
}

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

void write_report(const OutputDir& out, const EnergyReport& r) {
  for (const auto& t : r.tables) out.write(t.name + ".csv", [&](std::ostream& os) { write_table_csv(os, t); });
  out.write("report.json", [&](std::ostream& os) { write_report_json(os, r); });
}

InternalModel build_model(const ModelOptions& m) {
  if (!m.spectrum_file.empty()) return load_spectral_data(m.spectrum_file);
  if (m.torus_dim < 1) throw UsageError("torus-dim must be at least 1");
  std::vector<double> periods = m.periods;
  if (periods.size() == 1) periods.assign(static_cast<std::size_t>(m.torus_dim), periods.front());
  if (static_cast<int>(periods.size()) != m.torus_dim)
    throw UsageError(fmt::format("{} periods given for a {}-torus", periods.size(), m.torus_dim));
  return FlatTorus(m.torus_dim, periods);
}

/// Snaps a requested eigenvalue onto the model spectrum and returns its label.
SpectrumEntry match_mode(const InternalModel& model, double lambda) {
  if (lambda < 0.0) throw UsageError(fmt::format("lambda {} is negative", lambda));
  const auto spec = lichnerowicz_spectrum(model, lambda * (1.0 + 1e-6) + 1.0);
  for (const auto& e : spec.entries)
    if (std::abs(e.lambda - lambda) <= 1e-6 * std::max(1.0, lambda)) return e;
  throw UsageError(fmt::format("lambda {} is not an eigenvalue of the internal model", lambda));
}

std::vector<double> s_grid(double from, double to, double step) {
  if (!(step > 0.0) || to < from) throw UsageError("s grid needs s-step > 0 and s-max >= s-min");
  std::vector<double> s;
  for (int i = 0;; ++i) {
    const double x = from + i * step;
    if (x > to + 1e-9 * step) break;
    s.push_back(x);
  }
  return s;
}

template <class T>
const T& observer(const ModeRun& run, std::size_t i) {
  return static_cast<const T&>(*run.observers.at(i));
}

void add_fit_row(ReportTable& table, EnergyReport& report, const std::string& name, double index, double lambda,
                 const std::vector<double>& x, const std::vector<double>& y, double reference, std::uint64_t seed) {
  try {
    const auto fit = decay_fit(x, y, seed);
    table.rows.push_back({index, lambda, fit.exponent, fit.ci_low, fit.ci_high, double(fit.samples), reference});
    report.fits.push_back({name, fit, reference});
  } catch (const std::exception& e) {
    report.notes.push_back(fmt::format("{}: no fit ({})", name, e.what()));
  }
}

ReportTable fit_table(const std::string& name) {
  return {name, {"mode", "lambda", "exponent", "ci_low", "ci_high", "samples", "reference"}, {}};
}

std::pair<std::vector<double>, std::vector<double>> tail(const std::vector<double>& x, const std::vector<double>& y,
                                                         double from) {
  std::pair<std::vector<double>, std::vector<double>> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < from) continue;
    out.first.push_back(x[i]);
    out.second.push_back(std::abs(y[i]));
  }
  return out;
}

EvolutionConfig evolution_config(const EvolveOptions& o, const InternalModel& model) {
  if (!(o.t_end > o.t_start)) throw UsageError("t-end must exceed t-start");
  if (!(o.dr > 0.0) || !(o.cfl > 0.0)) throw UsageError("dr and cfl must be positive");
  EvolutionConfig cfg;
  cfg.n = o.n;
  cfg.model = model;
  cfg.dr = o.dr;
  cfg.dt = o.cfl * o.dr;
  cfg.t_start = o.t_start;
  cfg.t_begin = o.t_start;
  cfg.t_end = o.t_end;
  cfg.r_max = o.r_max > 0.0 ? o.r_max : o.t_end + o.radius + 8.0;
  cfg.epsilon = o.epsilon;
  cfg.epsilon_max = o.epsilon_max;
  if (o.nonlinearity == "linear") {
    cfg.nonlinearity = Nonlinearity::Linear;
  } else if (o.nonlinearity == "toy") {
    cfg.nonlinearity = Nonlinearity::QuasilinearToy;
  } else {
    throw UsageError("nonlinearity must be 'linear' or 'toy'");
  }
  return cfg;
}

int stride_for(double every, double dt) { return std::max(1, static_cast<int>(std::lround(every / dt))); }

int run_toy(const GlobalOptions& g, const EvolveOptions& o, const EvolutionConfig& cfg, EnergyReport& report,
            const OutputDir& out) {
  const std::array<InitialData, kToyComponents> data{bump_data(o.amplitude, o.radius),
                                                     outgoing_bump_data(0.5 * o.amplitude, o.radius),
                                                     bump_data(-0.25 * o.amplitude, o.radius)};
  std::vector<std::unique_ptr<HistoryRecorder>> history;
  std::vector<std::unique_ptr<SupNormRecorder>> sup;
  std::array<std::vector<SliceObserver*>, kToyComponents> obs;
  for (int k = 0; k < kToyComponents; ++k) {
    history.push_back(std::make_unique<HistoryRecorder>(cfg.n, 0.0, cfg.grid(), cfg.dt,
                                                        stride_for(o.history_every, cfg.dt)));
    sup.push_back(std::make_unique<SupNormRecorder>(stride_for(0.5, cfg.dt)));
    obs[k] = {history.back().get(), sup.back().get()};
  }
  const auto run = evolve_quasilinear_toy(cfg, data, obs);
  report.meta.emplace_back("completed", run.completed ? "true" : "false");
  report.meta.emplace_back("t_final", num(run.t_final));
  report.meta.emplace_back("blowup_time", num(run.blowup_time));
  report.meta.emplace_back("max_cfl", num(run.max_cfl));
  ReportTable fits = fit_table("sup_decay");
  for (int k = 0; k < kToyComponents; ++k) {
    history[k]->field().label = fmt::format("toy component {}", k);
    out.write(fmt::format("history_component{}.txt", k),
              [&](std::ostream& os) { write_snapshot(os, history[k]->field()); });
    const auto [x, y] = tail(sup[k]->times, sup[k]->sup, o.fit_from);
    add_fit_row(fits, report, fmt::format("component{}_sup", k), k, 0.0, x, y, -(cfg.n - 1) / 2.0, g.seed);
  }
  out.write("monitor.csv", [&](std::ostream& os) {
    os << "t,sup_norm,cfl\n";
    for (const auto& r : run.monitor) os << num(r.t) << ',' << num(r.sup_norm) << ',' << num(r.cfl) << '\n';
  });
  report.tables.push_back(std::move(fits));
  write_report(out, report);
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------

int run_spectrum(const GlobalOptions&, const SpectrumOptions& o, const OutputDir& out) {
  const auto model = build_model(o.model);
  const auto spec = lichnerowicz_spectrum(model, o.cutoff);
  const auto stab = is_linearly_stable(model);
  EnergyReport report;
  report.title = "spectrum";
  report.d = internal_dimension(model);
  report.meta.emplace_back("cutoff", num(o.cutoff));
  report.meta.emplace_back("stable", stab.stable ? "true" : "false");
  report.meta.emplace_back("lambda_min", num(stab.lambda_min));
  report.meta.emplace_back("total_multiplicity", std::to_string(spec.total_multiplicity()));
  report.meta.emplace_back("only_zero_mode", spec.only_zero_mode ? "true" : "false");
  ReportTable grouped{"spectrum", {"lambda", "multiplicity"}, {}};
  for (const auto& e : spec.grouped()) grouped.rows.push_back({e.lambda, double(e.multiplicity)});
  report.tables.push_back(std::move(grouped));
  out.write("modes.txt", [&](std::ostream& os) {
    std::vector<SpectralMode> modes;
    for (const auto& e : spec.entries) modes.push_back({e.lambda, e.multiplicity, e.label});
    write_spectral_data(os, SpectralData(report.d, modes));
  });
  write_report(out, report);
  return 0;
}

int run_evolve(const GlobalOptions& g, const EvolveOptions& o, const OutputDir& out) {
  const auto model = build_model(o.model);
  const auto cfg = evolution_config(o, model);
  EnergyReport report;
  report.title = "evolve";
  report.n = cfg.n;
  report.d = internal_dimension(model);
  report.add_beta_reference();
  report.meta.emplace_back("nonlinearity", o.nonlinearity);
  report.meta.emplace_back("epsilon", num(cfg.epsilon));
  report.meta.emplace_back("dr", num(cfg.dr));
  report.meta.emplace_back("dt", num(cfg.dt));
  report.meta.emplace_back("r_max", num(cfg.r_max));
  report.meta.emplace_back("t_end", num(cfg.t_end));
  report.meta.emplace_back("seed", std::to_string(g.seed));
  if (cfg.nonlinearity == Nonlinearity::QuasilinearToy) return run_toy(g, o, cfg, report, out);

  std::vector<ModeInit> modes;
  for (double lambda : o.lambdas) {
    const auto e = match_mode(model, lambda);
    modes.push_back({e.lambda, e.label, 1.0, bump_data(o.amplitude, o.radius)});
  }
  const int hist_stride = stride_for(o.history_every, cfg.dt);
  const int sup_stride = stride_for(0.5, cfg.dt);
  const auto runs = evolve_linearized_product(
      cfg, modes,
      [&](const ModeInit& m) {
        std::vector<std::unique_ptr<SliceObserver>> obs;
        obs.push_back(std::make_unique<HistoryRecorder>(cfg.n, m.lambda, cfg.grid(), cfg.dt, hist_stride));
        obs.push_back(std::make_unique<SupNormRecorder>(sup_stride));
        if (m.lambda == 0.0) {
          obs.push_back(std::make_unique<RetardedProbeRecorder>(cfg.grid(), cfg.t_start, sup_stride, o.fit_from));
        } else {
          obs.push_back(std::make_unique<ProbeRecorder>(cfg.grid(), std::vector<double>{0.0}, 1));
        }
        return obs;
      },
      g.workers);

  out.write("manifest.txt", [&](std::ostream& os) { write_manifest(os, cfg, modes); });
  ReportTable profile = fit_table("decay");
  ReportTable sup_fits = fit_table("sup_decay");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& run = runs[i];
    auto field = observer<HistoryRecorder>(run, 0).field();
    field.label = run.init.label;
    out.write(fmt::format("history_mode{}.txt", i), [&](std::ostream& os) { write_snapshot(os, field); });
    out.write(fmt::format("monitor_mode{}.csv", i), [&](std::ostream& os) { write_monitor_csv(os, run.summary.monitor); });

    const double lambda = run.init.lambda;
    const auto& sup = observer<SupNormRecorder>(run, 1);
    const auto [sx, sy] = tail(sup.times, sup.sup, o.fit_from);
    const double sup_ref = lambda == 0.0 ? -(cfg.n - 1) / 2.0 : -cfg.n / 2.0;
    add_fit_row(sup_fits, report, fmt::format("mode{}_sup", i), double(i), lambda, sx, sy, sup_ref, g.seed);
    if (lambda == 0.0) {
      const auto& ray = observer<RetardedProbeRecorder>(run, 2);
      const auto [x, y] = tail(ray.times, ray.values, o.fit_from);
      add_fit_row(profile, report, fmt::format("mode{}_retarded_ray", i), double(i), lambda, x, y,
                  -(cfg.n - 1) / 2.0, g.seed);
    } else {
      const auto& axis = observer<ProbeRecorder>(run, 2);
      const auto [px, py] = envelope_peaks(axis.times, axis.values[0]);
      const auto [x, y] = tail(px, py, o.fit_from);
      add_fit_row(profile, report, fmt::format("mode{}_axis_envelope", i), double(i), lambda, x, y, -cfg.n / 2.0,
                  g.seed);
    }
  }
  report.tables.push_back(std::move(profile));
  report.tables.push_back(std::move(sup_fits));
  write_report(out, report);
  return 0;
}

int run_energy(const GlobalOptions& g, const EnergyOptions& o, const OutputDir& out) {
  const auto model = build_model(o.model);
  const auto mode = match_mode(model, o.lambda);
  if (o.boost_order < 0 || o.boost_order > kJetOrder)
    throw UsageError(fmt::format("boost-order must lie in [0, {}]", kJetOrder));
  const auto s = s_grid(o.s_min, o.s_max, o.s_step);
  const double t_start = 4.0;
  if (!(o.radius + 0.5 < t_start)) throw UsageError("radius must be below 3.5 so the data sit inside the light cone");
  const double cut = recorder_cut_radius(s.back(), o.radius, t_start, 1e9);
  const double t_hit = std::hypot(s.back(), cut);

  EvolutionConfig cfg;
  cfg.n = o.n;
  cfg.model = model;
  cfg.dr = o.dr;
  cfg.dt = o.cfl * o.dr;
  cfg.t_start = t_start;
  cfg.t_begin = std::min(t_start, s.front() - 0.25);
  cfg.t_end = t_hit + 1.0;
  cfg.r_max = t_hit + 8.0;
  HyperboloidRecorder rec(cfg.n, cfg.grid(), cfg.dt, s, o.radius, cfg.t_start);
  evolve_kg_radial(mode.lambda, bump_data(o.amplitude, o.radius), cfg, {&rec});

  EnergyReport report;
  report.title = "energy";
  report.n = cfg.n;
  report.d = internal_dimension(model);
  report.add_beta_reference();
  report.meta.emplace_back("lambda", num(mode.lambda));
  report.meta.emplace_back("label", mode.label);
  report.meta.emplace_back("dr", num(cfg.dr));
  report.meta.emplace_back("seed", std::to_string(g.seed));

  ReportTable energies{"energies", {"s", "E0"}, {}};
  for (int k = 1; k <= o.boost_order; ++k) energies.columns.push_back(fmt::format("E_boost{}", k));
  ReportTable sup{"sup", {"s", "sup_u"}, {}};
  ReportTable estimates{"estimates", {"s"}, {}};
  const auto params = sobolev_params(cfg.n, std::max(1, report.d));
  std::vector<double> sups;
  double e_lo = 1e300, e_hi = 0.0;
  for (int i = 0; i < rec.count(); ++i) {
    const ModeSlice m{&rec.slice(i), mode.lambda, 1.0, 1.0};
    std::vector<double> row{s[i], hyperboloidal_energy(m)};
    for (int k = 1; k <= o.boost_order; ++k) row.push_back(boosted_energy(k, m));
    e_lo = std::min(e_lo, row[1]);
    e_hi = std::max(e_hi, row[1]);
    energies.rows.push_back(std::move(row));
    double peak = 0.0;
    for (const auto& j : rec.slice(i).jet) peak = std::max(peak, std::abs(j[jet_index(0, 0)]));
    sup.rows.push_back({s[i], peak});
    sups.push_back(peak);
    if (o.estimates) {
      try {
        const auto est = estimate_suite(m, params);
        if (estimates.columns.size() == 1)
          for (const auto& e : est.entries) estimates.columns.push_back(e.name);
        std::vector<double> er{s[i]};
        for (const auto& e : est.entries) er.push_back(e.skipped ? std::nan("") : e.constant);
        estimates.rows.push_back(std::move(er));
      } catch (const std::exception& e) {
        report.notes.push_back(fmt::format("estimates at s = {}: {}", s[i], e.what()));
      }
    }
  }
  report.meta.emplace_back("E0_relative_spread", num(e_hi > 0.0 ? (e_hi - e_lo) / e_hi : 0.0));
  try {
    report.fits.push_back({"sup_sigma_s", decay_fit(s, sups, g.seed), -2.0 * params.beta});
  } catch (const std::exception& e) {
    report.notes.push_back(fmt::format("sup_sigma_s: no fit ({})", e.what()));
  }
  report.tables.push_back(std::move(energies));
  report.tables.push_back(std::move(sup));
  if (!estimates.rows.empty()) report.tables.push_back(std::move(estimates));
  write_report(out, report);
  return 0;
}

int run_schwarzschild(const GlobalOptions& g, const SchwarzschildOptions& o, const OutputDir& out) {
  HarmonicVariant variant;
  if (o.variant == "harmonic") {
    variant = HarmonicVariant::Harmonic;
  } else if (o.variant == "literal") {
    variant = HarmonicVariant::Literal;
  } else {
    throw UsageError("variant must be 'harmonic' or 'literal'");
  }
  if (o.points < 2 || !(o.r_min > 0.0) || !(o.r_max > o.r_min)) throw UsageError("need points >= 2 and 0 < r-min < r-max");
  SchwarzschildParams p;
  p.n = o.n;
  p.c_s = o.c_s;
  const HarmonicChart chart(p, variant, o.order);

  EnergyReport report;
  report.title = "schwarzschild";
  report.n = o.n;
  report.d = p.torus_dim;
  report.meta.emplace_back("c_s", num(o.c_s));
  report.meta.emplace_back("variant", o.variant);
  report.meta.emplace_back("order", std::to_string(chart.order()));
  ReportTable table{"profile", {"r", "metric_deviation", "wave_gauge_norm"}, {}};
  std::vector<double> r, dev, gauge;
  for (int i = 0; i < o.points; ++i) {
    const double x = o.r_min * std::pow(o.r_max / o.r_min, i / double(o.points - 1));
    std::vector<double> pt(static_cast<std::size_t>(o.n) + 1, 0.0);
    pt[1] = x;
    r.push_back(x);
    dev.push_back(harmonic_deviation(chart, x));
    gauge.push_back(tensor_norm(harmonic_wave_gauge_residual(chart, pt)));
    table.rows.push_back({x, dev.back(), gauge.back()});
  }
  report.tables.push_back(std::move(table));
  for (const auto& [name, y, ref] : {std::tuple{"metric_deviation", dev, -(o.n - 2.0)},
                                     std::tuple{"wave_gauge_norm", gauge, -(o.n - 1.0)}}) {
    try {
      report.fits.push_back({name, decay_fit(r, y, g.seed), ref});
    } catch (const std::exception& e) {
      report.notes.push_back(fmt::format("{}: no fit ({})", name, e.what()));
    }
  }
  write_report(out, report);
  return 0;
}

int run_geodesic(const GlobalOptions& g, const GeodesicCliOptions& o, const OutputDir& out) {
  if (o.perturbed) throw UsageError("geodesics in the perturbed metric are not supported");
  if (o.r0.empty()) throw UsageError("at least one r0 is required");
  SchwarzschildParams p;
  p.n = o.n;
  p.c_s = o.c_s;
  const HarmonicChart chart(p, HarmonicVariant::Harmonic, o.order);
  std::vector<GeodesicState> inits;
  for (double r0 : o.r0) inits.push_back(radial_null_state(chart, r0, o.t0));
  GeodesicOptions opt;
  opt.lambda_end = o.lambda_end;
  opt.stop_radius = o.stop_radius;
  const auto results = integrate_geodesics(chart, inits, opt, g.workers);

  EnergyReport report;
  report.title = "geodesic";
  report.n = o.n;
  report.d = p.torus_dim;
  report.meta.emplace_back("c_s", num(o.c_s));
  report.meta.emplace_back("t0", num(o.t0));
  ReportTable table{"summary",
                    {"r0", "r_final", "t_monotone", "asymptotic_drdt", "norm_drift_rate", "energy_drift", "steps"},
                    {}};
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& res = results[i];
    out.write(fmt::format("geodesic{}.csv", i), [&](std::ostream& os) { write_geodesic_csv(os, chart, res); });
    table.rows.push_back({o.r0[i], res.samples.empty() ? std::nan("") : res.samples.back().r,
                          res.t_monotone ? 1.0 : 0.0, res.asymptotic_drdt, res.norm_drift_rate, res.energy_drift,
                          double(res.steps)});
  }
  report.tables.push_back(std::move(table));
  write_report(out, report);
  return 0;
}

int run_verify(const GlobalOptions& g, const VerifyOptions& o, const OutputDir& out, std::ostream& log) {
  if (!verify::has_suite(o.suite)) throw UsageError(fmt::format("unknown suite '{}'", o.suite));
  verify::SuiteOptions opt;
  opt.workers = g.workers;
  opt.seed = g.seed;
  opt.only = o.only;
  std::vector<verify::CheckResult> results;
  try {
    results = verify::run_suite(o.suite, opt);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  EnergyReport report;
  report.title = "verify";
  report.meta.emplace_back("suite", o.suite);
  report.meta.emplace_back("seed", std::to_string(g.seed));
  ReportTable checks{"checks", {"index", "passed"}, {}};
  ReportTable metrics{"metrics", {"index", "value"}, {}};
  int failed = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const std::string line = verify::format_result(r);
    log << line << '\n';
    report.notes.push_back(line);
    checks.rows.push_back({double(i), r.passed ? 1.0 : 0.0});
    for (const auto& [name, value] : r.metrics) {
      report.meta.emplace_back(r.id + "." + name, num(value));
      metrics.rows.push_back({double(i), value});
    }
    if (!r.passed) ++failed;
  }
  if (!checks.rows.empty()) report.tables.push_back(std::move(checks));
  if (!metrics.rows.empty()) report.tables.push_back(std::move(metrics));
  log << fmt::format("{} checks, {} failed\n", results.size(), failed);
  write_report(out, report);
  return failed == 0 ? 0 : 1;
}

}  // namespace kkstab::app
