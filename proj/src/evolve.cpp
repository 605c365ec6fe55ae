#include "kkstab/evolve.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>

namespace kkstab {

InitialData bump_data(double amplitude, double radius) {
  InitialData d;
  d.support = radius;
  d.u0 = [=](double r) {
    if (r >= radius) return 0.0;
    const double q = 1.0 - (r / radius) * (r / radius);
    return amplitude * std::pow(q, 6);
  };
  d.v0 = [](double) { return 0.0; };
  return d;
}

InitialData outgoing_bump_data(double amplitude, double radius) {
  InitialData d = bump_data(amplitude, radius);
  d.v0 = [=](double r) {
    if (r >= radius) return 0.0;
    const double q = 1.0 - (r / radius) * (r / radius);
    // -d/dr of amplitude * q^6
    return amplitude * 12.0 * r / (radius * radius) * std::pow(q, 5);
  };
  return d;
}

void EvolutionConfig::validate(double initial_support) const {
  if (n < 1) throw EvolutionError("spatial dimension must be positive");
  if (!(dr > 0.0) || !(dt > 0.0)) throw EvolutionError("dr and dt must be positive");
  if (dt / dr > 0.5 + 1e-12) {
    throw EvolutionError(fmt::format("CFL violation: dt/dr = {} exceeds 0.5", dt / dr));
  }
  if (!(r_max > dr)) throw EvolutionError("r_max must exceed dr");
  if (t_end < t_start) throw EvolutionError("t_end must not precede t_start");
  if (t_begin > t_start) throw EvolutionError("t_begin must not exceed t_start");
  if (initial_support > t_start - 2.0 + 1e-12) {
    throw EvolutionError(fmt::format("initial support {} is not inside r <= t_start - 2 = {}", initial_support,
                                     t_start - 2.0));
  }
  if (nonlinearity == Nonlinearity::QuasilinearToy && std::abs(epsilon) > epsilon_max) {
    throw EvolutionError(fmt::format("coupling {} exceeds epsilon_max {}", epsilon, epsilon_max));
  }
  if (initial_support + (t_end - t_start) + causal_margin > r_max && t_end > t_start) {
    // The zero outer boundary would be reached; not an error, the active
    // region is clipped at r_max.
  }
}

// ---------------------------------------------------------------------------

RadialLaplacian::RadialLaplacian(int n, const RadialGrid& grid) : dr_(grid.dr()) {
  const int N = grid.size();
  face_.resize(N);
  inv_volume_.resize(N);
  for (int k = 0; k < N; ++k) {
    const double rp = (k + 0.5) * dr_;
    face_[k] = std::pow(rp, n - 1) / dr_;
    double vol;
    if (k == 0) {
      vol = std::pow(0.5 * dr_, n) / n;
    } else {
      // (a^n - b^n)/n = (a - b) sum_j a^{n-1-j} b^j / n without cancellation.
      const double a = rp, b = (k - 0.5) * dr_;
      double acc = 0.0, ap = std::pow(a, n - 1), ratio = b / a, bp = 1.0;
      for (int j = 0; j < n; ++j) {
        acc += ap * bp;
        bp *= ratio;
      }
      vol = dr_ * acc / n;
    }
    inv_volume_[k] = 1.0 / vol;
  }
}

void RadialLaplacian::apply(const double* u, double* out, int count) const {
  const int N = size();
  double flux_left = 0.0;
  for (int k = 0; k < count; ++k) {
    const double right = k + 1 < N ? u[k + 1] : 0.0;
    const double flux_right = face_[k] * (right - u[k]);
    out[k] = inv_volume_[k] * (flux_right - flux_left);
    flux_left = flux_right;
  }
}

// ---------------------------------------------------------------------------

RadialKG::RadialKG(int n, double lambda, const RadialGrid& grid, double dt)
    : n_(n), lambda_(lambda), grid_(grid), lap_(n, grid), dt_(dt) {
  const int N = grid.size();
  u_.assign(N, 0.0);
  v_.assign(N, 0.0);
  for (auto& k : ku_) k.assign(N, 0.0);
  for (auto& k : kv_) k.assign(N, 0.0);
  tu_.assign(N, 0.0);
  tv_.assign(N, 0.0);
}

void RadialKG::set_state(double t, std::vector<double> u, std::vector<double> v, double support) {
  if (static_cast<int>(u.size()) != grid_.size() || static_cast<int>(v.size()) != grid_.size())
    throw EvolutionError("state size does not match the lattice");
  t_ = t;
  u_ = std::move(u);
  v_ = std::move(v);
  support0_ = support;
  t_support0_ = t;
  update_active();
}

void RadialKG::initialize(double t, const InitialData& data) {
  std::vector<double> u(grid_.size(), 0.0), v(grid_.size(), 0.0);
  for (int k = 0; k < grid_.size(); ++k) {
    const double r = grid_.r(k);
    if (r > data.support) break;
    u[k] = data.u0(r);
    v[k] = data.v0 ? data.v0(r) : 0.0;
  }
  set_state(t, std::move(u), std::move(v), data.support);
}

void RadialKG::update_active() {
  const double reach = causal_support() + margin_;
  active_ = std::min(grid_.size() - 1, static_cast<int>(std::ceil(reach / grid_.dr())));
}

void RadialKG::rhs(const std::vector<double>& u, const std::vector<double>& v, double t, std::vector<double>& du,
                   std::vector<double>& dv, int count) const {
  lap_.apply(u.data(), dv.data(), count);
  for (int k = 0; k < count; ++k) {
    du[k] = v[k];
    dv[k] = dv[k] - lambda_ * u[k];
  }
  if (source_) {
    for (int k = 0; k < count; ++k) dv[k] += source_(t, grid_.r(k));
  }
}

void RadialKG::step() {
  const double h = backward_ ? -dt_ : dt_;
  // Grow the active region to cover the support at the end of the step.
  const double t_new = t_ + h;
  const double reach = support0_ + std::abs(t_new - t_support0_) + margin_;
  active_ = std::min(grid_.size() - 1, static_cast<int>(std::ceil(reach / grid_.dr())));
  const int count = active_ + 1;

  rhs(u_, v_, t_, ku_[0], kv_[0], count);
  for (int k = 0; k < count; ++k) {
    tu_[k] = u_[k] + 0.5 * h * ku_[0][k];
    tv_[k] = v_[k] + 0.5 * h * kv_[0][k];
  }
  rhs(tu_, tv_, t_ + 0.5 * h, ku_[1], kv_[1], count);
  for (int k = 0; k < count; ++k) {
    tu_[k] = u_[k] + 0.5 * h * ku_[1][k];
    tv_[k] = v_[k] + 0.5 * h * kv_[1][k];
  }
  rhs(tu_, tv_, t_ + 0.5 * h, ku_[2], kv_[2], count);
  for (int k = 0; k < count; ++k) {
    tu_[k] = u_[k] + h * ku_[2][k];
    tv_[k] = v_[k] + h * kv_[2][k];
  }
  rhs(tu_, tv_, t_ + h, ku_[3], kv_[3], count);
  const double w = h / 6.0;
  for (int k = 0; k < count; ++k) {
    u_[k] += w * (ku_[0][k] + 2.0 * ku_[1][k] + 2.0 * ku_[2][k] + ku_[3][k]);
    v_[k] += w * (kv_[0][k] + 2.0 * kv_[1][k] + 2.0 * kv_[2][k] + kv_[3][k]);
  }
  t_ = t_new;
}

double RadialKG::flat_energy() const {
  double acc = 0.0;
  const int N = grid_.size();
  for (int k = 0; k <= active_; ++k) {
    acc += lap_.volume(k) * (v_[k] * v_[k] + lambda_ * u_[k] * u_[k]);
    const double right = k + 1 < N ? u_[k + 1] : 0.0;
    acc += lap_.face(k) * (right - u_[k]) * (right - u_[k]);
  }
  return 0.5 * unit_sphere_area(n_) * acc;
}

double RadialKG::sup_norm() const {
  double m = 0.0;
  for (int k = 0; k <= active_; ++k) {
    if (std::isnan(u_[k])) return std::numeric_limits<double>::quiet_NaN();
    m = std::max(m, std::abs(u_[k]));
  }
  return m;
}

double RadialKG::measured_support(double rel_tol) const {
  double mu = 0.0, mv = 0.0;
  for (int k = 0; k <= active_; ++k) {
    mu = std::max(mu, std::abs(u_[k]));
    mv = std::max(mv, std::abs(v_[k]));
  }
  for (int k = active_; k >= 0; --k) {
    if (std::abs(u_[k]) > rel_tol * mu || std::abs(v_[k]) > rel_tol * mv) return grid_.r(k);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

RunSummary evolve_kg_radial(double lambda, const InitialData& init, const EvolutionConfig& cfg,
                            const std::vector<SliceObserver*>& observers) {
  cfg.validate(init.support);
  if (lambda < 0.0) throw EvolutionError("mode eigenvalue must be nonnegative");
  const RadialGrid grid = cfg.grid();
  RadialKG kg(cfg.n, lambda, grid, cfg.dt);
  kg.set_causal_margin(cfg.causal_margin);
  kg.initialize(cfg.t_start, init);

  double t0 = cfg.t_start;
  if (cfg.t_begin < cfg.t_start) {
    const long long back = static_cast<long long>(std::ceil((cfg.t_start - cfg.t_begin) / cfg.dt - 1e-9));
    kg.set_backward(true);
    for (long long i = 0; i < back; ++i) kg.step();
    kg.set_backward(false);
    t0 = cfg.t_start - back * cfg.dt;
  }

  RunSummary out;
  const long long steps = static_cast<long long>(std::llround((cfg.t_end - t0) / cfg.dt));
  for (auto* o : observers) o->on_slice(kg.time(), kg.u(), kg.v(), kg.active());
  for (long long i = 1; i <= steps; ++i) {
    kg.step();
    for (auto* o : observers) o->on_slice(kg.time(), kg.u(), kg.v(), kg.active());
    if (i % cfg.check_stride == 0 || i == steps) {
      MonitorRow row;
      row.t = kg.time();
      row.sup_norm = kg.sup_norm();
      if (std::isnan(row.sup_norm)) throw EvolutionError(fmt::format("NaN detected at t = {}", row.t));
      row.support_radius = kg.measured_support();
      row.cfl_margin = 0.5 - cfg.dt / cfg.dr;
      row.flat_energy = kg.flat_energy();
      if (row.t >= cfg.t_start && row.support_radius > row.t - 1.0 && row.sup_norm > 0.0) {
        throw EvolutionError(
            fmt::format("support {} left the region r <= t - 1 at t = {}", row.support_radius, row.t));
      }
      out.monitor.push_back(row);
    }
  }
  for (auto* o : observers) o->on_finish();
  out.t_final = kg.time();
  out.steps = steps;
  out.u = kg.u();
  out.v = kg.v();
  return out;
}

// ---------------------------------------------------------------------------

HistoryRecorder::HistoryRecorder(int n, double lambda, const RadialGrid& grid, double dt, int stride, double t_from,
                                 double t_to)
    : stride_(std::max(1, stride)), t_from_(t_from), t_to_(t_to) {
  field_.n = n;
  field_.lambda = lambda;
  field_.grid = grid;
  field_.dt = dt * stride_;
}

void HistoryRecorder::on_slice(double t, const std::vector<double>& u, const std::vector<double>& v, int) {
  if (count_++ % stride_ != 0) return;
  if (t < t_from_ - 1e-12 || t > t_to_ + 1e-12) return;
  field_.times.push_back(t);
  field_.u.push_back(u);
  field_.v.push_back(v);
}

ProbeRecorder::ProbeRecorder(const RadialGrid& grid, std::vector<double> radii, int stride)
    : stride_(std::max(1, stride)) {
  for (double r : radii) nodes_.push_back(std::clamp(static_cast<int>(std::lround(r / grid.dr())), 0, grid.size() - 1));
  values.resize(nodes_.size());
}

void ProbeRecorder::on_slice(double t, const std::vector<double>& u, const std::vector<double>&, int) {
  if (count_++ % stride_ != 0) return;
  times.push_back(t);
  for (std::size_t i = 0; i < nodes_.size(); ++i) values[i].push_back(u[nodes_[i]]);
}

RetardedProbeRecorder::RetardedProbeRecorder(const RadialGrid& grid, double q, int stride, double t_from)
    : grid_(grid), q_(q), t_from_(t_from), stride_(std::max(1, stride)) {}

void RetardedProbeRecorder::on_slice(double t, const std::vector<double>& u, const std::vector<double>&, int) {
  if (count_++ % stride_ != 0 || t < t_from_) return;
  const long k = std::lround((t - q_) / grid_.dr());
  if (k < 0 || k >= grid_.size()) return;
  times.push_back(t);
  radii.push_back(grid_.r(static_cast<int>(k)));
  values.push_back(u[k]);
}

void SupNormRecorder::on_slice(double t, const std::vector<double>& u, const std::vector<double>&, int active) {
  if (count_++ % stride_ != 0) return;
  double m = 0.0;
  for (int k = 0; k <= active; ++k) m = std::max(m, std::abs(u[k]));
  times.push_back(t);
  sup.push_back(m);
}

// ---------------------------------------------------------------------------

std::unique_ptr<HyperboloidRecorder> record_analytic_field(int n, const RadialGrid& grid, double dt,
                                                           std::vector<double> s_values,
                                                           const std::function<double(double, double)>& f,
                                                           const std::function<double(double, double)>& ft,
                                                           double support0, double t_start) {
  if (s_values.empty()) throw std::invalid_argument("no hyperboloids requested");
  const double t0 = *std::min_element(s_values.begin(), s_values.end()) - 0.5;
  auto rec = std::make_unique<HyperboloidRecorder>(n, grid, dt, std::move(s_values), support0, t_start);
  double t_last = t0;
  for (const auto& sj : rec->slices()) t_last = std::max(t_last, sj.slice.t_last());
  const long long max_steps = static_cast<long long>((t_last - t0) / dt) + 32;
  std::vector<double> u(grid.size()), v(grid.size());
  for (long long i = 0; i <= max_steps; ++i) {
    const double t = t0 + static_cast<double>(i) * dt;
    for (int k = 0; k < grid.size(); ++k) {
      u[k] = f(t, grid.r(k));
      v[k] = ft(t, grid.r(k));
    }
    rec->on_slice(t, u, v, grid.size() - 1);
    bool done = true;
    for (const auto& sj : rec->slices()) done = done && sj.complete();
    if (done) return rec;
  }
  throw WindowError("analytic field did not complete every hyperboloid");
}

double recorder_cut_radius(double s, double support0, double t_start, double r_max) {
  // R0 + |t - t0| + 0.5 - r is decreasing in r along the slice; bisect its root.
  auto f = [&](double r) { return support0 + std::abs(std::hypot(s, r) - t_start) + 0.5 - r; };
  if (f(r_max) >= 0.0) return r_max;
  double lo = 0.0, hi = r_max;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) >= 0.0 ? lo : hi) = mid;
  }
  return lo;
}

HyperboloidRecorder::HyperboloidRecorder(int n, const RadialGrid& grid, double dt, std::vector<double> s_values,
                                         double support0, double t_start)
    : grid_(grid), dt_(dt) {
  for (double s : s_values) {
    SliceJets sj;
    const double cut = recorder_cut_radius(s, support0, t_start, grid.r_max() - 3 * grid.dr());
    sj.slice = make_slice(n, s, grid, cut);
    sj.jet.assign(sj.slice.size(), Jet{});
    slices_.push_back(std::move(sj));
  }
  ring_u_.assign(kWindow, std::vector<double>(grid.size(), 0.0));
  ring_v_.assign(kWindow, std::vector<double>(grid.size(), 0.0));
  ring_t_.assign(kWindow, 0.0);
}

void HyperboloidRecorder::on_slice(double t, const std::vector<double>& u, const std::vector<double>& v,
                                   int active) {
  if (received_ == 0) t_first_ = t;
  const int slot = ring(static_cast<int>(received_));
  const int count = std::min(grid_.size(), active + 1);
  std::copy(u.begin(), u.begin() + count, ring_u_[slot].begin());
  std::copy(v.begin(), v.begin() + count, ring_v_[slot].begin());
  ring_t_[slot] = t;
  ++received_;
  process(static_cast<int>(received_ - 1));
}

namespace {

// Fourth-order centred radial differences of an even function, zero past the lattice.
struct RadialStencil {
  const std::vector<double>& f;
  int N;
  double h;
  double at(int k) const {
    if (k < 0) k = -k;
    return k < N ? f[k] : 0.0;
  }
  double d(int b, int k) const {
    const double m3 = at(k - 3), m2 = at(k - 2), m1 = at(k - 1), c = at(k), p1 = at(k + 1), p2 = at(k + 2),
                 p3 = at(k + 3);
    switch (b) {
      case 0:
        return c;
      case 1:
        return (-p2 + 8 * p1 - 8 * m1 + m2) / (12 * h);
      case 2:
        return (-p2 + 16 * p1 - 30 * c + 16 * m1 - m2) / (12 * h * h);
      case 3:
        return (-p3 + 8 * p2 - 13 * p1 + 13 * m1 - 8 * m2 + m3) / (8 * h * h * h);
      default:
        return (-p3 + 12 * p2 - 39 * p1 + 56 * c - 39 * m1 + 12 * m2 - m3) / (6 * h * h * h * h);
    }
  }
};

}  // namespace

void HyperboloidRecorder::process(int newest) {
  if (newest < 7) return;
  const double t_limit = t_first_ + (newest - 3) * dt_;
  const int N = grid_.size();
  const double h = grid_.dr();
  for (auto& sj : slices_) {
    while (sj.filled < sj.slice.size() && sj.slice.t[sj.filled] < t_limit) {
      const int k = sj.filled;
      const double tau = sj.slice.t[k];
      const int m = static_cast<int>(std::floor((tau - t_first_) / dt_));
      if (m - 3 < 0 || m - 3 < newest - (kWindow - 1)) {
        throw WindowError(fmt::format("hyperboloid s = {} starts before the recorded history (t = {})",
                                      sj.slice.s, tau));
      }
      Jet jet{};
      for (int i = 0; i < 4; ++i) {
        const int j = m - 1 + i;
        double w = 1.0;
        for (int q = 0; q < 4; ++q) {
          if (q == i) continue;
          w *= (tau - (t_first_ + (m - 1 + q) * dt_)) / ((i - q) * dt_);
        }
        const RadialStencil su{ring_u_[ring(j)], N, h};
        const RadialStencil vm2{ring_v_[ring(j - 2)], N, h}, vm1{ring_v_[ring(j - 1)], N, h},
            v0{ring_v_[ring(j)], N, h}, vp1{ring_v_[ring(j + 1)], N, h}, vp2{ring_v_[ring(j + 2)], N, h};
        for (int b = 0; b <= kJetOrder; ++b) jet[jet_index(0, b)] += w * su.d(b, k);
        for (int b = 0; b <= kJetOrder - 1; ++b) {
          const double a2 = vm2.d(b, k), a1 = vm1.d(b, k), c = v0.d(b, k), p1 = vp1.d(b, k), p2 = vp2.d(b, k);
          jet[jet_index(1, b)] += w * c;
          if (b <= kJetOrder - 2) jet[jet_index(2, b)] += w * (-p2 + 8 * p1 - 8 * a1 + a2) / (12 * dt_);
          if (b <= kJetOrder - 3) {
            jet[jet_index(3, b)] += w * (-p2 + 16 * p1 - 30 * c + 16 * a1 - a2) / (12 * dt_ * dt_);
          }
          if (b <= kJetOrder - 4) jet[jet_index(4, b)] += w * (p2 - 2 * p1 + 2 * a1 - a2) / (2 * dt_ * dt_ * dt_);
        }
      }
      sj.jet[k] = jet;
      ++sj.filled;
    }
  }
}

void HyperboloidRecorder::on_finish() {}

const SliceJets& HyperboloidRecorder::slice(int i) const {
  const auto& sj = slices_.at(i);
  if (!sj.complete()) {
    throw WindowError(fmt::format("hyperboloid s = {} recorded on {} of {} nodes; extend t_end past {}",
                                  sj.slice.s, sj.filled, sj.slice.size(), sj.slice.t_last()));
  }
  return sj;
}

// ---------------------------------------------------------------------------

void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex guard;
  std::vector<std::thread> pool;
  const int threads = std::min(workers, count);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(guard);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

std::vector<ModeRun> evolve_linearized_product(const EvolutionConfig& cfg, const std::vector<ModeInit>& modes,
                                               const ObserverFactory& factory, int workers) {
  double top = 1.0;
  for (const auto& m : modes) top = std::max(top, m.lambda + 1.0);
  const auto spec = lichnerowicz_spectrum(cfg.model, top);
  for (const auto& m : modes) {
    if (!spec.contains(m.lambda, 1e-9)) {
      throw SpectrumError(fmt::format("mode '{}' with lambda {} is not in the internal spectrum", m.label, m.lambda));
    }
  }
  std::vector<ModeRun> runs(modes.size());
  parallel_for(static_cast<int>(modes.size()), workers, [&](int i) {
    ModeRun& run = runs[i];
    run.init = modes[i];
    if (factory) run.observers = factory(modes[i]);
    std::vector<SliceObserver*> raw;
    for (auto& o : run.observers) raw.push_back(o.get());
    run.summary = evolve_kg_radial(modes[i].lambda, modes[i].data, cfg, raw);
  });
  return runs;
}

// ---------------------------------------------------------------------------

namespace {

std::string describe_model(const InternalModel& model) {
  if (const auto* t = std::get_if<FlatTorus>(&model)) {
    std::string p;
    for (std::size_t j = 0; j < t->periods.size(); ++j) p += fmt::format("{}{:.17g}", j ? "," : "", t->periods[j]);
    return fmt::format("torus d={} periods={}", t->d, p);
  }
  const auto& s = std::get<SpectralData>(model);
  return fmt::format("spectral d={} modes={}", s.d, s.modes.size());
}

}  // namespace

void write_manifest(std::ostream& out, const EvolutionConfig& cfg, const std::vector<ModeInit>& modes) {
  out << "[evolution]\n";
  out << fmt::format("n = {}\ndr = {:.17g}\ndt = {:.17g}\nr_max = {:.17g}\n", cfg.n, cfg.dr, cfg.dt, cfg.r_max);
  out << fmt::format("t_start = {:.17g}\nt_end = {:.17g}\nt_begin = {:.17g}\n", cfg.t_start, cfg.t_end, cfg.t_begin);
  out << fmt::format("nonlinearity = {}\nepsilon = {:.17g}\nepsilon_max = {:.17g}\n",
                     cfg.nonlinearity == Nonlinearity::Linear ? "linear" : "quasilinear-toy", cfg.epsilon,
                     cfg.epsilon_max);
  out << fmt::format("causal_margin = {:.17g}\ncheck_stride = {}\n", cfg.causal_margin, cfg.check_stride);
  out << fmt::format("internal_model = {}\n", describe_model(cfg.model));
  for (std::size_t i = 0; i < modes.size(); ++i) {
    out << fmt::format("\n[mode.{}]\nlambda = {:.17g}\nlabel = {}\ninternal_norm2 = {:.17g}\nsupport = {:.17g}\n", i,
                       modes[i].lambda, modes[i].label.empty() ? "-" : modes[i].label, modes[i].internal_norm2,
                       modes[i].data.support);
  }
}

void write_monitor_csv(std::ostream& out, const std::vector<MonitorRow>& rows) {
  out << "t,sup_norm,support_radius,cfl_margin,flat_energy\n";
  for (const auto& r : rows) {
    out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.t, r.sup_norm, r.support_radius, r.cfl_margin,
                       r.flat_energy);
  }
}

}  // namespace kkstab
