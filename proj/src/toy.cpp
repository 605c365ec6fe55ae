#include "kkstab/toy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <variant>

#include <fmt/format.h>

namespace kkstab {

Sym2 toy_inverse_metric(const Sym2& h, double eps) {
  const double gtt = -1.0 + eps * h[kTT], gtr = eps * h[kTR], grr = 1.0 + eps * h[kRR];
  const double det = gtt * grr - gtr * gtr;
  return {grr / det, -gtr / det, gtt / det};
}

Sym2 toy_inverse_perturbation(const Sym2& h, double eps) {
  const double tt = h[kTT], tr = h[kTR], rr = h[kRR];
  return {-tt + eps * (tr * tr - tt * tt), tr + eps * (tt * tr - tr * rr), -rr + eps * (rr * rr - tr * tr)};
}

GammaPoint toy_gamma_point(const Sym2& h, const std::array<Sym2, 2>& dh, double eps) {
  const double tt = h[kTT], tr = h[kTR], rr = h[kRR];
  const Sym2 H = toy_inverse_perturbation(h, eps);
  std::array<Sym2, 2> dH{};
  for (int c = 0; c < 2; ++c) {
    const double dtt = dh[c][kTT], dtr = dh[c][kTR], drr = dh[c][kRR];
    dH[c] = {-dtt + eps * (2.0 * tr * dtr - 2.0 * tt * dtt),
             dtr + eps * (dtt * tr + tt * dtr - dtr * rr - tr * drr),
             -drr + eps * (2.0 * rr * drr - 2.0 * tr * dtr)};
  }
  GammaPoint g;
  g.a = eps * H[kTT];
  g.b = eps * H[kTR];
  g.e = eps * H[kRR];
  g.a_t = eps * dH[0][kTT];
  g.b_t = eps * dH[0][kTR];
  g.e_t = eps * dH[0][kRR];
  g.a_r = eps * dH[1][kTT];
  g.b_r = eps * dH[1][kTR];
  g.e_r = eps * dH[1][kRR];
  return g;
}

namespace {

void q_contract(int D, const double* ginv, const double* dg, double* q) {
  auto gi = [&](int a, int b) { return ginv[a * D + b]; };
  auto d = [&](int c, int a, int b) { return dg[(c * D + a) * D + b]; };
  for (int mu = 0; mu < D; ++mu) {
    for (int nu = 0; nu < D; ++nu) {
      double acc = 0.0;
      for (int gm = 0; gm < D; ++gm) {
        for (int dl = 0; dl < D; ++dl) {
          const double g1 = gi(gm, dl);
          if (g1 == 0.0) continue;
          for (int al = 0; al < D; ++al) {
            for (int be = 0; be < D; ++be) {
              const double g2 = gi(al, be);
              if (g2 == 0.0) continue;
              const double term = d(nu, dl, be) * d(al, mu, gm) + d(mu, gm, al) * d(be, nu, dl) -
                                  0.5 * d(nu, dl, be) * d(mu, gm, al) + d(gm, mu, al) * d(dl, nu, be) -
                                  d(gm, mu, al) * d(be, nu, dl);
              acc += g1 * g2 * term;
            }
          }
        }
      }
      q[mu * D + nu] = acc;
    }
  }
}

}  // namespace

std::vector<double> nonlinear_q(int D, const std::vector<double>& ginv, const std::vector<double>& dg) {
  if (D < 1 || static_cast<int>(ginv.size()) != D * D || static_cast<int>(dg.size()) != D * D * D) {
    throw std::invalid_argument("nonlinear_q: inconsistent dimensions");
  }
  std::vector<double> q(D * D, 0.0);
  q_contract(D, ginv.data(), dg.data(), q.data());
  return q;
}

Sym2 toy_q(const Sym2& h, const std::array<Sym2, 2>& dh, double eps) {
  // Closed-form expansion of q_contract for D = 2 (common subexpressions
  // eliminated); the generic routine is the reference in the tests.
  const Sym2 gi = toy_inverse_metric(h, eps);
  const double Gtt = gi[kTT], Gtr = gi[kTR], Grr = gi[kRR];
  const double a0tt = dh[0][kTT], a0tr = dh[0][kTR], a0rr = dh[0][kRR];
  const double a1tt = dh[1][kTT], a1tr = dh[1][kTR], a1rr = dh[1][kRR];
const double x0 = (a1tt * a1tt);
  const double x1 = Gtt*x0;
  const double x2 = (Gtr * Gtr);
  const double x3 = a0rr*x2;
  const double x4 = 2*Grr;
  const double x5 = a1tt*x4;
  const double x6 = 4*a0tr;
  const double x7 = Gtr*a1tr*x6;
  const double x8 = Gtr*a0tt;
  const double x9 = Gtt*x8;
  const double x10 = 2*Gtr;
  const double x11 = Gtt*a1tt;
  const double x12 = Gtt*(a0tr * a0tr);
  const double x13 = (Grr * Grr);
  const double x14 = a1tr*x13;
  const double x15 = 2*a0rr;
  const double x16 = a1tt*x2;
  const double x17 = a0tt*x2;
  const double x18 = 2*a1tr;
  const double x19 = (a0rr * a0rr);
  const double x20 = (1.0/2.0)*x13;
  const double x21 = (Gtt * Gtt);
  const double x22 = Grr*a1tt;
  const double x23 = Gtr*a1rr;
  const double x24 = Gtt*a0rr;
  const double x25 = Grr*x19;
  const double x26 = a0tt*x21;
  const double x27 = a0tr*x4;
  const double x28 = (a1tr * a1tr)*x4;
  const double x29 = a0rr*a1rr;
  const double x30 = (1.0/2.0)*a1tt;
  const double x31 = a0tr*x2;
  const double x32 = 4*a1tr;
  const double qtt = Grr*x1 + Grr*x7 + Gtr*a0rr*x5 + (3.0/2.0)*(a0tt * a0tt)*x21 + a0tt*x10*x11 + a0tt*x3 - x0*x2 + x12*x4 + x14*x15 + x16*x6 + x17*x18 - x19*x20 + x6*x9;
  const double qtr = Gtr*x1 + Gtr*x25 + Gtr*x28 + Gtt*a1tr*x5 + a0tr*x26 + a0tr*x3 + a1rr*x14 + (3.0/2.0)*a1rr*x17 + a1tr*x16 + x10*x12 + x18*x31 + x18*x9 + x20*x29 + x22*x23 - x22*x24 + x23*x27 + x24*x27 + x24*x8 + x26*x30 + x3*x30;
  const double qrr = Grr*x23*x32 + Gtr*x11*x15 + Gtr*x29*x4 + Gtt*x25 + Gtt*x28 + Gtt*x7 + 2*a0tr*a1tt*x21 + (3.0/2.0)*(a1rr * a1rr)*x13 + a1rr*x16 + 2*a1rr*x31 - 1.0/2.0*x0*x21 - x19*x2 + x3*x32;
  return {qtt, qtr, qrr};
}

double toy_characteristic_speed(const Sym2& h, double eps) {
  const Sym2 H = toy_inverse_perturbation(h, eps);
  const double att = -1.0 + eps * H[kTT], atr = eps * H[kTR], arr = 1.0 + eps * H[kRR];
  const double disc = atr * atr - att * arr;
  if (disc < 0.0 || att == 0.0) return std::numeric_limits<double>::infinity();
  const double root = std::sqrt(disc);
  return std::max(std::abs((atr + root) / att), std::abs((atr - root) / att));
}

// ---------------------------------------------------------------------------

namespace {

struct ToyState {
  std::array<std::vector<double>, kToyComponents> u, v;
  void resize(int N) {
    for (auto& x : u) x.assign(N, 0.0);
    for (auto& x : v) x.assign(N, 0.0);
  }
};

// The toy evolves the zero internal mode.
constexpr double kZeroModeLambda = 0.0;

class ToySolver {
 public:
  explicit ToySolver(const EvolutionConfig& cfg)
      : cfg_(cfg), grid_(cfg.grid()), lap_(cfg.n, grid_), N_(grid_.size()), h_(grid_.dr()) {
    s_.resize(N_);
    tmp_.resize(N_);
    for (auto& k : k_) k.resize(N_);
  }

  void initialize(double t, const std::array<InitialData, kToyComponents>& init) {
    t_ = t0_ = t;
    support0_ = 0.0;
    for (int c = 0; c < kToyComponents; ++c) {
      support0_ = std::max(support0_, init[c].support);
      for (int k = 0; k < N_; ++k) {
        const double r = grid_.r(k);
        if (r > init[c].support) break;
        s_.u[c][k] = init[c].u0(r);
        s_.v[c][k] = init[c].v0 ? init[c].v0(r) : 0.0;
      }
    }
    active_ = active_at(t_);
  }

  int active_at(double t) const {
    const double reach = support0_ + std::abs(t - t0_) + cfg_.causal_margin;
    return std::min(N_ - 1, static_cast<int>(std::ceil(reach / grid_.dr())));
  }

  void step() {
    const double h = cfg_.dt;
    active_ = active_at(t_ + h);
    const int count = active_ + 1;
    rhs(s_, k_[0], count);
    axpy(s_, k_[0], 0.5 * h, tmp_, count);
    rhs(tmp_, k_[1], count);
    axpy(s_, k_[1], 0.5 * h, tmp_, count);
    rhs(tmp_, k_[2], count);
    axpy(s_, k_[2], h, tmp_, count);
    rhs(tmp_, k_[3], count);
    const double w = h / 6.0;
    for (int c = 0; c < kToyComponents; ++c) {
      for (int k = 0; k < count; ++k) {
        s_.u[c][k] += w * (k_[0].u[c][k] + 2.0 * k_[1].u[c][k] + 2.0 * k_[2].u[c][k] + k_[3].u[c][k]);
        s_.v[c][k] += w * (k_[0].v[c][k] + 2.0 * k_[1].v[c][k] + 2.0 * k_[2].v[c][k] + k_[3].v[c][k]);
      }
    }
    t_ += h;
  }

  double sup_norm() const {
    double m = 0.0;
    for (const auto& u : s_.u) {
      for (int k = 0; k <= active_; ++k) {
        if (std::isnan(u[k])) return std::numeric_limits<double>::quiet_NaN();
        m = std::max(m, std::abs(u[k]));
      }
    }
    return m;
  }

  double max_speed() const {
    double c = 0.0;
    for (int k = 0; k <= active_; ++k) {
      c = std::max(c, toy_characteristic_speed({s_.u[kTT][k], s_.u[kTR][k], s_.u[kRR][k]}, cfg_.epsilon));
    }
    return c;
  }

  double measured_support(double rel_tol) const {
    double m = sup_norm();
    for (int k = active_; k >= 0; --k) {
      for (const auto& u : s_.u) {
        if (std::abs(u[k]) > rel_tol * m) return grid_.r(k);
      }
    }
    return 0.0;
  }

  double time() const { return t_; }
  int active() const { return active_; }
  const ToyState& state() const { return s_; }

 private:
  static void axpy(const ToyState& a, const ToyState& k, double h, ToyState& out, int count) {
    for (int c = 0; c < kToyComponents; ++c) {
      for (int i = 0; i < count; ++i) {
        out.u[c][i] = a.u[c][i] + h * k.u[c][i];
        out.v[c][i] = a.v[c][i] + h * k.v[c][i];
      }
    }
  }

  void rhs(const ToyState& s, ToyState& d, int count) {
    const double eps = cfg_.epsilon;
    for (int c = 0; c < kToyComponents; ++c) {
      lap_.apply(s.u[c].data(), d.v[c].data(), count);
      for (int k = 0; k < count; ++k) {
        d.u[c][k] = s.v[c][k];
        d.v[c][k] = d.v[c][k] - kZeroModeLambda * s.u[c][k];
      }
    }
    const double inv2h = 1.0 / (2.0 * h_), invh2 = 1.0 / (h_ * h_);
    for (int k = 0; k < count; ++k) {
      // Even reflection at the axis, zero past the lattice.
      const int km = k == 0 ? 1 : k - 1;
      const bool has_next = k + 1 < N_;
      const Sym2 hk{s.u[kTT][k], s.u[kTR][k], s.u[kRR][k]};
      const Sym2 H = toy_inverse_perturbation(hk, eps);
      std::array<Sym2, 2> dh;
      Sym2 drv{}, drr{};
      for (int c = 0; c < kToyComponents; ++c) {
        const double up = has_next ? s.u[c][k + 1] : 0.0, um = s.u[c][km];
        const double vp = has_next ? s.v[c][k + 1] : 0.0, vm = s.v[c][km];
        dh[0][c] = s.v[c][k];
        dh[1][c] = (up - um) * inv2h;
        drv[c] = (vp - vm) * inv2h;
        drr[c] = (up - 2 * s.u[c][k] + um) * invh2;
      }
      const Sym2 Q = toy_q(hk, dh, eps);
      const double denom = 1.0 - eps * H[kTT];
      for (int c = 0; c < kToyComponents; ++c) {
        const double base = d.v[c][k];
        const double M = 2.0 * H[kTR] * drv[c] + H[kRR] * drr[c] - Q[c];
        d.v[c][k] = base + eps * (M + H[kTT] * base) / denom;
      }
    }
  }

  EvolutionConfig cfg_;
  RadialGrid grid_;
  RadialLaplacian lap_;
  int N_;
  double h_;
  double t_ = 0.0, t0_ = 0.0, support0_ = 0.0;
  int active_ = 0;
  ToyState s_, tmp_;
  std::array<ToyState, 4> k_;
};

}  // namespace

ToyRunResult evolve_quasilinear_toy(const EvolutionConfig& cfg, const std::array<InitialData, kToyComponents>& init,
                                    const std::array<std::vector<SliceObserver*>, kToyComponents>& observers) {
  if (cfg.nonlinearity != Nonlinearity::QuasilinearToy) {
    throw EvolutionError("the toy evolution requires nonlinearity = quasilinear-toy");
  }
  if (!std::holds_alternative<FlatTorus>(cfg.model)) {
    throw EvolutionError("the toy evolution is defined for flat-torus internal models only");
  }
  double support = 0.0;
  for (const auto& d : init) support = std::max(support, d.support);
  cfg.validate(support);

  ToySolver solver(cfg);
  solver.initialize(cfg.t_start, init);
  ToyRunResult out;
  out.initial_sup = solver.sup_norm();
  const double threshold = 10.0 * out.initial_sup;

  auto notify = [&] {
    for (int c = 0; c < kToyComponents; ++c) {
      for (auto* o : observers[c]) o->on_slice(solver.time(), solver.state().u[c], solver.state().v[c], solver.active());
    }
  };
  notify();
  const long long steps = std::llround((cfg.t_end - cfg.t_start) / cfg.dt);
  for (long long i = 1; i <= steps; ++i) {
    const double cfl = solver.max_speed() * cfg.dt / cfg.dr;
    out.max_cfl = std::max(out.max_cfl, cfl);
    if (cfl > 0.5) {
      throw EvolutionError(fmt::format("CFL violation against the perturbed speed at t = {}: {}", solver.time(), cfl));
    }
    solver.step();
    notify();
    const double sup = solver.sup_norm();
    if (std::isnan(sup)) throw EvolutionError(fmt::format("NaN detected at t = {}", solver.time()));
    if (sup > threshold) {
      out.blowup_time = solver.time();
      break;
    }
    if (i % cfg.check_stride == 0 || i == steps) {
      out.monitor.push_back({solver.time(), sup, cfl});
      const double edge = (solver.active() - 2) * cfg.dr;
      if (solver.active() < cfg.grid().size() - 1 && solver.measured_support(1e-6) > edge) {
        throw EvolutionError(fmt::format("toy support reached the active-region edge at t = {}", solver.time()));
      }
    }
  }
  for (const auto& obs : observers) {
    for (auto* o : obs) o->on_finish();
  }
  out.completed = out.blowup_time < 0.0;
  out.t_final = solver.time();
  out.u = solver.state().u;
  out.v = solver.state().v;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

FieldWindow dt_of(const FieldWindow& w) { return apply_on_window(Generator::translation(0), w); }
FieldWindow dr_of(const FieldWindow& w) { return apply_on_window(Generator::translation(1), w); }

FieldWindow apply_word(const std::vector<Generator>& word, FieldWindow w) {
  // Z^I = Z_1 Z_2 ... acts right to left.
  for (auto it = word.rbegin(); it != word.rend(); ++it) w = apply_on_window(*it, w);
  return w;
}

std::vector<double> centre(const FieldWindow& w) { return w.u[w.u.size() / 2]; }

FieldWindow blank_like(const FieldWindow& w) {
  FieldWindow out = w;
  out.v.clear();
  out.odd = false;
  for (auto& row : out.u) std::fill(row.begin(), row.end(), 0.0);
  return out;
}

}  // namespace

int commuted_sources_depth(int order) { return 2 * (order + 2) + 1; }

SourceTerms commuted_sources(const std::array<FieldWindow, kToyComponents>& h, const std::vector<Generator>& word,
                             int n, double eps) {
  const int L = static_cast<int>(word.size());
  if (L > 2) throw std::invalid_argument("commuted sources are implemented for words of length <= 2");
  const int S = h[0].slices();
  for (const auto& w : h) {
    if (w.slices() != S || w.grid.size() != h[0].grid.size()) {
      throw std::invalid_argument("component windows must share slices and lattice");
    }
  }
  if (S < commuted_sources_depth(L) || S % 2 == 0) {
    throw WindowError(fmt::format("window of {} slices is too shallow for a word of length {} (need an odd count >= {})",
                                  S, L, commuted_sources_depth(L)));
  }
  const int N = h[0].grid.size();
  const double dr = h[0].grid.dr();

  std::array<FieldWindow, kToyComponents> ht, hr;
  for (int c = 0; c < kToyComponents; ++c) {
    ht[c] = dt_of(h[c]);
    hr[c] = dr_of(h[c]);
  }

  // Level-1 windows of eps Q and of eps H (the latter on level 0).
  std::array<FieldWindow, kToyComponents> Qw, Hw;
  for (int c = 0; c < kToyComponents; ++c) {
    Qw[c] = blank_like(ht[c]);
    Hw[c] = blank_like(h[c]);
  }
  for (int j = 0; j < S; ++j) {
    for (int k = 0; k < N; ++k) {
      const Sym2 hk{h[kTT].u[j][k], h[kTR].u[j][k], h[kRR].u[j][k]};
      const Sym2 H = toy_inverse_perturbation(hk, eps);
      for (int c = 0; c < kToyComponents; ++c) Hw[c].u[j][k] = eps * H[c];
      if (j == 0 || j == S - 1) continue;
      std::array<Sym2, 2> dh;
      for (int c = 0; c < kToyComponents; ++c) {
        dh[0][c] = ht[c].u[j - 1][k];
        dh[1][c] = hr[c].u[j - 1][k];
      }
      const Sym2 Q = toy_q(hk, dh, eps);
      for (int c = 0; c < kToyComponents; ++c) Qw[c].u[j - 1][k] = eps * Q[c];
    }
  }

  // eps H^{ab} d_a d_b f on level (level of f + 2).
  auto principal = [&](const FieldWindow& f, int level_f) {
    const FieldWindow ft = dt_of(f), fr = dr_of(f);
    const FieldWindow ftt = dt_of(ft), ftr = dt_of(fr), frr = dr_of(fr);
    FieldWindow out = blank_like(ftt);
    const int lvl = level_f + 2;
    for (int j = 0; j < out.slices(); ++j) {
      for (int k = 0; k < N; ++k) {
        const double a = Hw[kTT].u[j + lvl][k], b = Hw[kTR].u[j + lvl][k], e = Hw[kRR].u[j + lvl][k];
        out.u[j][k] = a * ftt.u[j][k] + 2.0 * b * ftr.u[j][k] + e * frr.u[j][k];
      }
    }
    return out;
  };

  SourceTerms out;
  out.first_node = 2 * (L + 2) + 1;
  for (int c = 0; c < kToyComponents; ++c) {
    out.f1[c] = centre(apply_word(word, Qw[c]));
    out.f2[c].assign(N, 0.0);
    const FieldWindow zh = apply_word(word, h[c]);
    out.f3[c] = centre(apply_word(word, principal(h[c], 0)));
    const auto& rhs = centre(principal(zh, L));
    for (int k = 0; k < N; ++k) out.f3[c][k] -= rhs[k];

    const FieldWindow zt = dt_of(zh), zr = dr_of(zh);
    const auto& zt0 = centre(zt);
    const auto& zr0 = centre(zr);
    const auto& at = centre(dt_of(Hw[kTT]));
    const auto& ar = centre(dr_of(Hw[kTT]));
    const auto& bt = centre(dt_of(Hw[kTR]));
    const auto& br = centre(dr_of(Hw[kTR]));
    const auto& et = centre(dt_of(Hw[kRR]));
    const auto& er = centre(dr_of(Hw[kRR]));
    const auto& b0 = centre(Hw[kTR]);
    const auto& e0 = centre(Hw[kRR]);
    out.g[c].assign(N, 0.0);
    std::vector<double> denom(N, 0.0);
    double dmax = 0.0;
    for (int k = out.first_node; k < N; ++k) {
      const double r = k * dr;
      const double div_t = at[k] + br[k] + (n - 1) * b0[k] / r;
      const double div_r = bt[k] + er[k] + (n - 1) * e0[k] / r;
      out.g[c][k] = div_t * zt0[k] + div_r * zr0[k];
      const double dH2 = at[k] * at[k] + ar[k] * ar[k] +
                         2.0 * (bt[k] * bt[k] + br[k] * br[k] + (n - 1) * b0[k] * b0[k] / (r * r)) +
                         et[k] * et[k] + er[k] * er[k] + 2.0 * (n - 1) * e0[k] * e0[k] / (r * r);
      denom[k] = std::sqrt(dH2 * (zt0[k] * zt0[k] + zr0[k] * zr0[k]));
      dmax = std::max(dmax, denom[k]);
    }
    for (int k = out.first_node; k < N; ++k) {
      if (denom[k] > 1e-12 * dmax && dmax > 0.0) {
        out.g_constant = std::max(out.g_constant, std::abs(out.g[c][k]) / denom[k]);
      }
    }
    for (int k = 0; k < out.first_node && k < N; ++k) {
      out.f1[c][k] = 0.0;
      out.f3[c][k] = 0.0;
    }
  }
  return out;
}

}  // namespace kkstab
