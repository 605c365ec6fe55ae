#include "kkstab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "json.hpp"

namespace kkstab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const SliceJets& jets_of(const ModeSlice& m) {
  if (m.jets == nullptr) throw std::invalid_argument("mode slice without jets");
  if (!m.jets->complete()) {
    throw WindowError(fmt::format("hyperboloid s = {} is incomplete ({} of {} nodes)", m.jets->slice.s,
                                  m.jets->filled, m.jets->slice.size()));
  }
  return *m.jets;
}

void check_gamma(const SliceJets& sj, const std::vector<GammaPoint>& gamma) {
  if (!gamma.empty() && static_cast<int>(gamma.size()) != sj.slice.size()) {
    throw std::invalid_argument(
        fmt::format("gamma has {} nodes, slice has {}", gamma.size(), sj.slice.size()));
  }
}

double weighted_sum(const HyperboloidSlice& sl, const std::vector<double>& f) {
  return integrate(sl, std::span<const double>(f.data(), f.size()));
}

struct FirstJet {
  double u, ut, ur;
};

FirstJet first_jet(const Jet& j) { return {j[jet_index(0, 0)], j[jet_index(1, 0)], j[jet_index(0, 1)]}; }

/// Product of two polynomials in mu (coefficient vectors).
std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

std::vector<double> poly_axpy(double alpha, const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> out(std::max(x.size(), y.size()), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += alpha * x[i];
  for (std::size_t i = 0; i < y.size(); ++i) out[i] += y[i];
  return out;
}

/// Sphere average of a polynomial in mu.
double sphere_mean(int n, const std::vector<double>& p) {
  double acc = 0.0;
  for (std::size_t j = 0; j < p.size(); j += 2) acc += p[j] * sphere_moment(n, static_cast<int>(j));
  return acc;
}

/// Sphere average of sum_i |Y_i w|^2 = (w_r + (r/t) w_t)^2 + (1 - mu^2) w_mu^2 / r^2.
double y_squared_mean(int n, double t, double r, const std::vector<double>& wt, const std::vector<double>& wr,
                      const std::vector<double>& wm) {
  const auto yw = poly_axpy(r / t, wt, wr);
  const auto ang = poly_mul({1.0, 0.0, -1.0}, poly_mul(wm, wm));
  return sphere_mean(n, poly_mul(yw, yw)) + sphere_mean(n, ang) / (r * r);
}

/// Images of a word and of its first derivatives.
struct WordStack {
  std::vector<WordOperator> op, op_t, op_r, op_mu;
};

WordStack make_stack(const std::vector<WordOperator>& words) {
  WordStack st;
  for (const auto& w : words) {
    st.op.push_back(w);
    st.op_t.push_back(w.after(WordOperator::Letter::T, 0.0));
    st.op_r.push_back(w.partial_r());
    st.op_mu.push_back(w.partial_mu());
  }
  return st;
}

/// Sphere-averaged energy density of w = Gamma u given its mu polynomials.
double averaged_density(int n, double s, double t, double r, double lambda, const std::vector<double>& w,
                        const std::vector<double>& wt, const std::vector<double>& wr, const std::vector<double>& wm,
                        const GammaPoint* g) {
  const double q = s / t;
  const double tt = sphere_mean(n, poly_mul(wt, wt));
  double rho = q * q * tt + y_squared_mean(n, t, r, wt, wr, wm) + lambda * sphere_mean(n, poly_mul(w, w));
  if (g != nullptr) {
    const double tr = sphere_mean(n, poly_mul(wt, wr));
    const double rr = sphere_mean(n, poly_mul(wr, wr));
    const double grad2 = rr + sphere_mean(n, poly_mul({1.0, 0.0, -1.0}, poly_mul(wm, wm))) / (r * r);
    const double normal_t = g->a * tt + g->b * tr - (r / t) * (g->b * tt + (g->c + g->e) * tr);
    rho += -2.0 * normal_t + g->a * tt + 2.0 * g->b * tr + g->c * grad2 + g->e * rr;
  }
  return rho;
}

}  // namespace

// ---------------------------------------------------------------------------

SobolevParams sobolev_params(int n, int d) {
  if (n < 1 || d < 0) throw std::invalid_argument(fmt::format("invalid dimensions n = {}, d = {}", n, d));
  SobolevParams p;
  p.n = n;
  p.d = d;
  // smallest even integer strictly above d/2
  p.d_tilde = 2 * (d / 4 + 1);
  // smallest integer strictly above n/2 + d_tilde
  p.nu_tilde = n / 2 + p.d_tilde + 1;
  p.beta = (n - 2) / 4.0;
  // smallest even integer strictly above (n + d + 8)/2
  const int m = n + d + 8;
  const int floor_half = m / 2;
  p.N = floor_half % 2 == 0 ? floor_half + 2 : floor_half + 1;
  return p;
}

double gamma_euclidean_norm(int n, const GammaPoint& g) {
  return std::sqrt(g.a * g.a + 2.0 * g.b * g.b + n * g.c * g.c + 2.0 * g.c * g.e + g.e * g.e);
}

std::vector<double> gamma_matrix(int n, const GammaPoint& g) {
  const int D = n + 1;
  std::vector<double> m(D * D, 0.0);
  m[0] = g.a;
  m[1] = m[D] = g.b;
  m[D + 1] = g.c + g.e;
  for (int i = 2; i < D; ++i) m[i * D + i] = g.c;
  return m;
}

std::vector<double> stress_tensor(int n, const std::vector<double>& gamma, const std::vector<double>& du,
                                  double lambda, double u) {
  const int D = n + 1;
  if (static_cast<int>(du.size()) != D) throw std::invalid_argument("gradient size must be n + 1");
  if (!gamma.empty() && static_cast<int>(gamma.size()) != D * D) {
    throw std::invalid_argument("gamma must be (n + 1) x (n + 1)");
  }
  auto ginv = [&](int a, int b) {
    const double eta = a != b ? 0.0 : (a == 0 ? -1.0 : 1.0);
    return eta + (gamma.empty() ? 0.0 : gamma[a * D + b]);
  };
  double contraction = 0.0;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) contraction += ginv(a, b) * du[a] * du[b];
  const double trace_part = 0.5 * (contraction + lambda * u * u);
  std::vector<double> T(D * D, 0.0);
  for (int mu = 0; mu < D; ++mu) {
    double raised = 0.0;
    for (int a = 0; a < D; ++a) raised += ginv(mu, a) * du[a];
    for (int nu = 0; nu < D; ++nu) T[mu * D + nu] = raised * du[nu] - (mu == nu ? trace_part : 0.0);
  }
  return T;
}

double stress_energy_density(int n, const std::vector<double>& T, double t, const std::vector<double>& x) {
  const int D = n + 1;
  if (static_cast<int>(x.size()) != n) throw std::invalid_argument("position must have n components");
  double acc = T[0];
  for (int i = 1; i < D; ++i) acc -= T[i * D] * x[i - 1] / t;
  return -2.0 * acc;
}

double energy_density(int /*n*/, double s, double t, double r, double lambda, double u, double u_t, double u_r,
                      const GammaPoint* g) {
  const double q = s / t;
  const double yu = u_r + (r / t) * u_t;
  double rho = q * q * u_t * u_t + yu * yu + lambda * u * u;
  if (g != nullptr) {
    const double normal = (g->a * u_t + g->b * u_r) - (r / t) * (g->b * u_t + (g->c + g->e) * u_r);
    const double quad = g->a * u_t * u_t + 2.0 * g->b * u_t * u_r + (g->c + g->e) * u_r * u_r;
    rho += -2.0 * normal * u_t + quad;
  }
  return rho;
}

std::vector<double> stress_divergence(const ModeField& f, int j) {
  if (f.v.empty()) throw std::invalid_argument("stress divergence needs d_t u");
  if (j < 1 || j + 1 >= f.slices()) throw WindowError(fmt::format("slice {} has no time neighbours", j));
  const int K = f.grid.size();
  const double dr = f.grid.dr();
  const int n = f.n;
  auto radial = [&](const std::vector<double>& u) {
    std::vector<double> d(K, 0.0);
    for (int k = 1; k + 1 < K; ++k) d[k] = (u[k + 1] - u[k - 1]) / (2.0 * dr);
    return d;
  };
  auto t00 = [&](int jj) {
    const auto ur = radial(f.u[jj]);
    std::vector<double> e(K);
    for (int k = 0; k < K; ++k) {
      const double v = f.v[jj][k];
      e[k] = -0.5 * (v * v + ur[k] * ur[k] + f.lambda * f.u[jj][k] * f.u[jj][k]);
    }
    return e;
  };
  const auto before = t00(j - 1);
  const auto after = t00(j + 1);
  const double dt = f.times[j + 1] - f.times[j];
  const auto ur = radial(f.u[j]);
  std::vector<double> flux(K);
  for (int k = 0; k < K; ++k) flux[k] = ur[k] * f.v[j][k];
  std::vector<double> div(K, 0.0);
  for (int k = 2; k + 2 < K; ++k) {
    const double r = f.grid.r(k);
    div[k] = (after[k] - before[k]) / (2.0 * dt) + (flux[k + 1] - flux[k - 1]) / (2.0 * dr) + (n - 1) * flux[k] / r;
  }
  return div;
}

// ---------------------------------------------------------------------------

double hyperboloidal_energy(const ModeSlice& m, const std::vector<GammaPoint>& gamma) {
  const auto& sj = jets_of(m);
  check_gamma(sj, gamma);
  const auto& sl = sj.slice;
  std::vector<double> rho(sl.size());
  for (int k = 0; k < sl.size(); ++k) {
    const auto j = first_jet(sj.jet[k]);
    rho[k] = energy_density(sl.n, sl.s, sl.t[k], sl.r[k], m.lambda, j.u, j.ut, j.ur,
                            gamma.empty() ? nullptr : &gamma[k]);
  }
  return m.internal_norm2 * m.weight * weighted_sum(sl, rho);
}

double hyperboloidal_energy(const std::vector<ModeSlice>& modes, const std::vector<GammaPoint>& gamma) {
  double e = 0.0;
  for (const auto& m : modes) e += hyperboloidal_energy(m, gamma);
  return e;
}

WordOperator WordOperator::identity() {
  WordOperator op;
  op.terms_[{0, 0}][{0, 0, 0}] = 1.0;
  return op;
}

namespace {

using Monomial = std::array<int, 3>;

void add_to(AxialPoly& dst, const Monomial& key, double c) { dst[key] += c; }

/// d/dt, d/dr or d/dmu of a coefficient (index 0, 1, 2).
AxialPoly coefficient_derivative(const AxialPoly& p, int var) {
  AxialPoly out;
  for (const auto& [key, c] : p) {
    if (key[var] == 0) continue;
    Monomial k = key;
    --k[var];
    add_to(out, k, c * key[var]);
  }
  return out;
}

/// Multiplies by t^dp r^dq mu^dm.
AxialPoly shifted(const AxialPoly& p, int dp, int dq, int dm, double scale = 1.0) {
  AxialPoly out;
  for (const auto& [key, c] : p) out[{key[0] + dp, key[1] + dq, key[2] + dm}] += scale * c;
  return out;
}

void accumulate(AxialPoly& dst, const AxialPoly& src) {
  for (const auto& [key, c] : src) dst[key] += c;
}

}  // namespace

void WordOperator::prune() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    std::erase_if(it->second, [](const auto& kv) { return kv.second == 0.0; });
    it = it->second.empty() ? terms_.erase(it) : std::next(it);
  }
}

WordOperator WordOperator::partial_r() const {
  WordOperator out;
  for (const auto& [ab, c] : terms_) {
    accumulate(out.terms_[ab], coefficient_derivative(c, 1));
    accumulate(out.terms_[{ab.first, ab.second + 1}], c);
  }
  out.prune();
  return out;
}

WordOperator WordOperator::partial_mu() const {
  WordOperator out;
  for (const auto& [ab, c] : terms_) accumulate(out.terms_[ab], coefficient_derivative(c, 2));
  out.prune();
  return out;
}

WordOperator WordOperator::after(Letter letter, double lambda) const {
  WordOperator out;
  // d_t applied after multiplication by t^dp r^dq mu^dm.
  auto time_part = [&](int dp, int dq, int dm) {
    for (const auto& [ab, c] : terms_) {
      accumulate(out.terms_[ab], shifted(coefficient_derivative(c, 0), dp, dq, dm));
      accumulate(out.terms_[{ab.first + 1, ab.second}], shifted(c, dp, dq, dm));
    }
  };
  // d_1 = mu d_r + (1 - mu^2) / r d_mu, times t^dp.
  auto space_part = [&](int dp) {
    for (const auto& [ab, c] : terms_) {
      accumulate(out.terms_[ab], shifted(coefficient_derivative(c, 1), dp, 0, 1));
      accumulate(out.terms_[{ab.first, ab.second + 1}], shifted(c, dp, 0, 1));
      const auto cm = coefficient_derivative(c, 2);
      accumulate(out.terms_[ab], shifted(cm, dp, -1, 0));
      accumulate(out.terms_[ab], shifted(cm, dp, -1, 2, -1.0));
    }
  };
  switch (letter) {
    case Letter::T:
      time_part(0, 0, 0);
      break;
    case Letter::X:
      space_part(0);
      break;
    case Letter::Z:
      time_part(0, 1, 1);  // x^1 d_t = r mu d_t
      space_part(1);       // t d_1
      break;
    case Letter::Lap:
      for (const auto& [ab, c] : terms_) accumulate(out.terms_[ab], shifted(c, 0, 0, 0, -lambda));
      break;
  }
  out.prune();
  return out;
}

int WordOperator::order() const {
  int o = 0;
  for (const auto& [ab, c] : terms_) o = std::max(o, ab.first + ab.second);
  return o;
}

std::vector<double> WordOperator::mu_polynomial(const Jet& jet, double t, double r) const {
  std::vector<double> p;
  for (const auto& [ab, c] : terms_) {
    if (ab.first + ab.second > kJetOrder) {
      throw WindowError(fmt::format("operator of order {} exceeds the recorded jet order {}",
                                    ab.first + ab.second, kJetOrder));
    }
    const double d = jet[jet_index(ab.first, ab.second)];
    for (const auto& [key, coef] : c) {
      if (static_cast<int>(p.size()) <= key[2]) p.resize(key[2] + 1, 0.0);
      p[key[2]] += coef * std::pow(t, key[0]) * std::pow(r, key[1]) * d;
    }
  }
  return p;
}

std::vector<WordOperator> generator_words(int k, const std::vector<WordOperator::Letter>& letters, double lambda) {
  std::vector<WordOperator> all{WordOperator::identity()};
  std::vector<WordOperator> layer = all;
  for (int len = 1; len <= k; ++len) {
    std::vector<WordOperator> next;
    for (const auto& w : layer)
      for (auto l : letters) next.push_back(w.after(l, lambda));
    all.insert(all.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  return all;
}

double sphere_moment(int n, int j) {
  if (j < 0) throw std::invalid_argument("negative moment");
  if (j % 2 == 1) return 0.0;
  double m = 1.0;
  for (int k = 1; 2 * k <= j; ++k) m *= (2.0 * k - 1.0) / (n + 2.0 * k - 2.0);
  return m;
}

namespace {

/// Sum over the word stack of the energies of Gamma^I u.
double stacked_energy(const ModeSlice& m, const std::vector<GammaPoint>& gamma, const WordStack& st) {
  const auto& sj = jets_of(m);
  check_gamma(sj, gamma);
  const auto& sl = sj.slice;
  std::vector<double> rho(sl.size(), 0.0);
  for (int k = 0; k < sl.size(); ++k) {
    const double t = sl.t[k], r = sl.r[k];
    if (r <= 0.0) continue;  // zero quadrature weight on the axis
    for (std::size_t w = 0; w < st.op.size(); ++w) {
      rho[k] += averaged_density(sl.n, sl.s, t, r, m.lambda, st.op[w].mu_polynomial(sj.jet[k], t, r),
                                 st.op_t[w].mu_polynomial(sj.jet[k], t, r),
                                 st.op_r[w].mu_polynomial(sj.jet[k], t, r),
                                 st.op_mu[w].mu_polynomial(sj.jet[k], t, r), gamma.empty() ? nullptr : &gamma[k]);
    }
  }
  return m.internal_norm2 * m.weight * weighted_sum(sl, rho);
}

}  // namespace

double boosted_energy(int k, const ModeSlice& m, const std::vector<GammaPoint>& gamma) {
  if (k < 1) throw std::invalid_argument("boosted energy index starts at 1");
  if (k > kJetOrder) {
    throw WindowError(fmt::format("E_{} needs derivatives of order {}, jets stop at {}", k, k, kJetOrder));
  }
  using L = WordOperator::Letter;
  const auto words = generator_words(k - 1, {L::T, L::X, L::Z, L::Lap}, m.lambda);
  return stacked_energy(m, gamma, make_stack(words));
}

// ---------------------------------------------------------------------------

double identity_flux(const ModeSlice& m, const std::vector<double>& forcing, const std::vector<GammaPoint>& gamma) {
  const auto& sj = jets_of(m);
  check_gamma(sj, gamma);
  const auto& sl = sj.slice;
  if (!forcing.empty() && static_cast<int>(forcing.size()) != sl.size()) {
    throw std::invalid_argument("forcing must have one value per node");
  }
  const int n = sl.n;
  std::vector<double> f(sl.size(), 0.0);
  for (int k = 0; k < sl.size(); ++k) {
    const auto j = first_jet(sj.jet[k]);
    double val = forcing.empty() ? 0.0 : 2.0 * forcing[k] * j.ut;
    if (!gamma.empty()) {
      const auto& g = gamma[k];
      const double r = sl.r[k];
      const double b_over_r = r > 0.0 ? g.b / r : 0.0;
      const double e_over_r = r > 0.0 ? g.e / r : 0.0;
      const double div_t = g.a_t + g.b_r + (n - 1) * b_over_r;
      const double div_r = g.b_t + g.c_r + g.e_r + (n - 1) * e_over_r;
      val += 2.0 * (div_t * j.ut + div_r * j.ur) * j.ut;
      val -= g.a_t * j.ut * j.ut + 2.0 * g.b_t * j.ut * j.ur + (g.c_t + g.e_t) * j.ur * j.ur;
    }
    f[k] = val * sl.s / sl.t[k];
  }
  return m.internal_norm2 * m.weight * weighted_sum(sl, f);
}

IdentityResidual energy_identity_residual(const std::vector<double>& s, const std::vector<double>& energy,
                                          const std::vector<double>& flux) {
  const std::size_t N = s.size();
  if (N < 3 || energy.size() != N || flux.size() != N) {
    throw std::invalid_argument("identity needs at least 3 matching samples");
  }
  const double h = s[1] - s[0];
  for (std::size_t i = 1; i < N; ++i) {
    if (std::abs(s[i] - s[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(h))) {
      throw std::invalid_argument("identity needs a uniform s grid");
    }
  }
  IdentityResidual res;
  res.s = s;
  res.energy = energy;
  res.flux = flux;
  res.residual.assign(N, 0.0);
  double emax = 0.0;
  for (double e : energy) emax = std::max(emax, std::abs(e));
  // Cumulative Simpson; odd offsets close with a 3/8 panel.
  std::vector<double> cum(N, 0.0);
  for (std::size_t j = 2; j < N; j += 2) cum[j] = cum[j - 2] + h / 3.0 * (flux[j - 2] + 4.0 * flux[j - 1] + flux[j]);
  for (std::size_t j = 1; j < N; j += 2) {
    if (j == 1) {
      cum[j] = 0.5 * h * (flux[0] + flux[1]);
    } else {
      cum[j] = cum[j - 3] + 3.0 * h / 8.0 * (flux[j - 3] + 3.0 * flux[j - 2] + 3.0 * flux[j - 1] + flux[j]);
    }
  }
  for (std::size_t j = 1; j < N; ++j) {
    res.residual[j] = emax > 0.0 ? std::abs(energy[0] - energy[j] - cum[j]) / emax : 0.0;
    if (j >= 2) res.max_residual = std::max(res.max_residual, res.residual[j]);
  }
  return res;
}

// ---------------------------------------------------------------------------

EquivalenceResult equivalence_check(const ModeSlice& m, const std::vector<GammaPoint>& gamma) {
  const auto& sl = jets_of(m).slice;
  EquivalenceResult r;
  r.e0 = hyperboloidal_energy(m);
  r.egamma = gamma.empty() ? r.e0 : hyperboloidal_energy(m, gamma);
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    r.sup_t_gamma = std::max(r.sup_t_gamma, sl.t[k] * gamma_euclidean_norm(sl.n, gamma[k]));
  }
  r.ratio = r.egamma > 0.0 ? r.e0 / r.egamma : (r.e0 == 0.0 && r.egamma == 0.0 ? 1.0 : kNaN);
  r.small = r.sup_t_gamma <= kEquivalenceEpsilon;
  r.within_bounds = r.egamma > 0.0 && r.ratio >= 0.5 && r.ratio <= 2.0;
  return r;
}

std::vector<GammaPoint> scaled_gamma(const HyperboloidSlice& slice, const GammaPoint& p, double delta) {
  const double norm = gamma_euclidean_norm(slice.n, p);
  if (!(norm > 0.0)) throw std::invalid_argument("gamma pattern must be nonzero");
  std::vector<GammaPoint> g(slice.size());
  for (int k = 0; k < slice.size(); ++k) {
    const double t = slice.t[k];
    const double f = delta / (t * norm);
    const double ft = -f / t;
    g[k].a = f * p.a;
    g[k].b = f * p.b;
    g[k].c = f * p.c;
    g[k].e = f * p.e;
    g[k].a_t = ft * p.a;
    g[k].b_t = ft * p.b;
    g[k].c_t = ft * p.c;
    g[k].e_t = ft * p.e;
  }
  return g;
}

EquivalenceScan equivalence_scan(const ModeSlice& m, const GammaPoint& pattern, const std::vector<double>& deltas) {
  const auto& sl = jets_of(m).slice;
  EquivalenceScan scan;
  auto at = [&](double d) { return equivalence_check(m, scaled_gamma(sl, pattern, d)); };
  double prev_delta = 0.0;
  int direction = 0;
  for (double d : deltas) {
    const auto r = at(d);
    scan.delta.push_back(d);
    scan.results.push_back(r);
    if (r.small) scan.delta_small_limit = d;
    if (r.small && !r.within_bounds) scan.exited_while_small = true;
    if (scan.results.size() >= 2 && r.egamma > 0.0) {
      const double step = r.ratio - scan.results[scan.results.size() - 2].ratio;
      const int sgn = (step > 0) - (step < 0);
      if (sgn != 0) {
        if (direction != 0 && sgn != direction) scan.monotone = false;
        direction = sgn;
      }
    }
    if (!r.within_bounds) {
      double lo = prev_delta, hi = d;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (at(mid).within_bounds ? lo : hi) = mid;
      }
      scan.delta_star = hi;
      break;
    }
    prev_delta = d;
  }
  return scan;
}

// ---------------------------------------------------------------------------

double cutoff_chi(double alpha) {
  if (alpha <= 1.0) return 1.0;
  if (alpha >= 2.0) return 0.0;
  const double x = alpha - 1.0;
  return 1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
}

const EstimateEntry& EstimateRow::entry(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw std::out_of_range("no estimate entry " + name);
}

namespace {

EstimateEntry make_entry(std::string name, double lhs, double rhs) {
  EstimateEntry e;
  e.name = std::move(name);
  e.lhs = lhs;
  e.rhs = rhs;
  if (lhs == 0.0 && rhs == 0.0) {
    e.skipped = true;
    e.constant = kNaN;
  } else {
    e.constant = rhs > 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity();
  }
  return e;
}

EstimateEntry skipped_entry(std::string name) {
  EstimateEntry e;
  e.name = std::move(name);
  e.skipped = true;
  e.constant = kNaN;
  return e;
}

}  // namespace

EstimateRow estimate_suite(const ModeSlice& m, const SobolevParams& params, const EstimateOptions& opt) {
  if (opt.order < 0 || opt.order > 2) throw std::invalid_argument("commutation order must be 0, 1 or 2");
  const auto& sj = jets_of(m);
  const auto& sl = sj.slice;
  const int K = sl.size();
  const int n = sl.n;
  const double scale = m.internal_norm2 * m.weight;
  EstimateRow row;
  row.s = sl.s;

  double umax = 0.0;
  for (int k = 0; k < K; ++k) umax = std::max(umax, std::abs(sj.jet[k][0]));
  const std::vector<std::string> names{"hardy", "sobolev_interior", "sobolev_s", "sobolev_t", "sobolev_chi",
                                       "l2_derivative"};
  if (umax == 0.0) {
    for (const auto& nm : names) row.entries.push_back(skipped_entry(nm));
    return row;
  }

  // Support classification.
  const double thresh = opt.support_tol * umax;
  std::vector<int> tail_nodes;
  for (int k = 0; k < K; ++k) {
    if (sl.r[k] >= sl.t[k] - 1.0 && std::abs(sj.jet[k][0]) > thresh) tail_nodes.push_back(k);
  }
  using L = WordOperator::Letter;
  if (!tail_nodes.empty()) {
    if (!opt.allow_prescribed_tail) {
      throw SupportClassificationError(fmt::format(
          "u is nonzero at {} nodes with |x| >= t - 1 on s = {} and no prescribed tail was declared",
          tail_nodes.size(), sl.s));
    }
    // Decay check: log-log slope of |u| on the tail.
    std::vector<double> lr, lu;
    for (int k : tail_nodes) {
      if (sl.r[k] <= 0.0) continue;
      lr.push_back(std::log(sl.r[k]));
      lu.push_back(std::log(std::abs(sj.jet[k][0])));
    }
    double slope = 0.0;
    if (lr.size() >= 2 && lr.back() - lr.front() > 0.05) {
      const double mx = std::accumulate(lr.begin(), lr.end(), 0.0) / lr.size();
      const double my = std::accumulate(lu.begin(), lu.end(), 0.0) / lu.size();
      double sxx = 0.0, sxy = 0.0;
      for (std::size_t i = 0; i < lr.size(); ++i) {
        sxx += (lr[i] - mx) * (lr[i] - mx);
        sxy += (lr[i] - mx) * (lu[i] - my);
      }
      slope = sxy / sxx;
    }
    if (slope > -(n - 1) / 2.0 + 0.25) {
      throw SupportClassificationError(fmt::format(
          "tail on s = {} decays like |x|^{:.3f}, slower than the prescribed |x|^-{}", sl.s, slope, (n - 1) / 2.0));
    }
    row.tail = true;
    const auto words = generator_words(std::max(0, opt.order - 1), {L::T, L::X}, m.lambda);
    for (const auto& w : words) {
      const int len = w.order();
      double c = 0.0;
      for (int k : tail_nodes) {
        if (sl.r[k] <= 0.0) continue;
        const auto p = w.mu_polynomial(sj.jet[k], sl.t[k], sl.r[k]);
        for (int i = 0; i <= 20; ++i) {
          const double mu = -1.0 + 0.1 * i;
          double v = 0.0;
          for (std::size_t e = p.size(); e-- > 0;) v = v * mu + p[e];
          c = std::max(c, std::pow(sl.r[k], (n - 1) / 2.0 + len) * std::abs(v));
        }
      }
      row.tail_constant += c * c;
    }
  }

  const auto zwords = make_stack(generator_words(opt.order, {L::T, L::X, L::Z}, m.lambda));
  std::vector<double> hardy_l(K, 0.0), hardy_r(K, 0.0), sob_interior(K, 0.0), sob_cone(K, 0.0), sob_chi(K, 0.0);
  double sup_t = 0.0, sup_s = 0.0, sup_tb = 0.0;
  const double beta = params.beta;
  const double t_max = 0.5 * (sl.s * sl.s + 1.0);
  for (int k = 0; k < K; ++k) {
    const double t = sl.t[k], r = sl.r[k];
    const auto j = first_jet(sj.jet[k]);
    const double yu = j.ur + (r / t) * j.ut;
    hardy_l[k] = r > 0.0 ? j.u * j.u / (r * r) : 0.0;
    hardy_r[k] = yu * yu;
    sup_t = std::max(sup_t, std::pow(t, n) * j.u * j.u);
    sup_s = std::max(sup_s, std::pow(sl.s, 4.0 * beta) * j.u * j.u);
    sup_tb = std::max(sup_tb, std::pow(t, 2.0 * beta) * j.u * j.u);
    const bool inside = r <= t - 1.0;
    const double chi = cutoff_chi(r / t_max);
    if (r <= 0.0) continue;
    for (std::size_t w = 0; w < zwords.op.size(); ++w) {
      const auto zu = zwords.op[w].mu_polynomial(sj.jet[k], t, r);
      const auto zt = zwords.op_t[w].mu_polynomial(sj.jet[k], t, r);
      const auto zr = zwords.op_r[w].mu_polynomial(sj.jet[k], t, r);
      const auto zm = zwords.op_mu[w].mu_polynomial(sj.jet[k], t, r);
      const double y2 = y_squared_mean(n, t, r, zt, zr, zm);
      sob_interior[k] += sphere_mean(n, poly_mul(zu, zu));
      if (inside) sob_cone[k] += y2;
      sob_chi[k] += chi * chi * y2;
    }
  }
  const double hl = std::sqrt(scale * weighted_sum(sl, hardy_l));
  const double hr = std::sqrt(scale * weighted_sum(sl, hardy_r));
  row.entries.push_back(make_entry("hardy", hl, hr));
  if (row.tail) {
    row.entries.push_back(skipped_entry("sobolev_interior"));
  } else {
    row.entries.push_back(make_entry("sobolev_interior", scale * sup_t, scale * weighted_sum(sl, sob_interior)));
  }
  const double rhs_cone = scale * (weighted_sum(sl, sob_cone) + row.tail_constant);
  row.entries.push_back(make_entry("sobolev_s", scale * sup_s, rhs_cone));
  row.entries.push_back(make_entry("sobolev_t", scale * sup_tb, rhs_cone));
  row.entries.push_back(
      make_entry("sobolev_chi", scale * sup_s, scale * (weighted_sum(sl, sob_chi) + row.tail_constant)));

  // L^2 bound: sum_{|I| + |J| <= order} ||t^-1 Z^I nabla^J u|| against E_{order+1}^{1/2}.
  double l2 = 0.0;
  for (int jlen = 0; jlen <= opt.order; ++jlen) {
    const auto words = generator_words(opt.order - jlen, {L::T, L::X, L::Z}, m.lambda);
    const double internal = std::pow(std::abs(m.lambda), jlen);
    for (const auto& w : words) {
      std::vector<double> f(K, 0.0);
      for (int k = 0; k < K; ++k) {
        if (sl.r[k] <= 0.0) continue;
        const auto z = w.mu_polynomial(sj.jet[k], sl.t[k], sl.r[k]);
        f[k] = sphere_mean(n, poly_mul(z, z)) / (sl.t[k] * sl.t[k]);
      }
      l2 += std::sqrt(scale * internal * weighted_sum(sl, f));
    }
  }
  const double eb = boosted_energy(opt.order + 1, m);
  row.entries.push_back(make_entry("l2_derivative", l2, std::sqrt(std::max(eb, 0.0))));
  return row;
}

// ---------------------------------------------------------------------------

namespace {

std::pair<double, double> ols(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

}  // namespace

DecayFit decay_fit(const std::vector<double>& x, const std::vector<double>& y, std::uint64_t seed, int resamples) {
  if (x.size() != y.size()) throw DecayFitError("abscissa and samples differ in length");
  if (x.size() < 10) throw DecayFitError(fmt::format("decay fit needs at least 10 samples, got {}", x.size()));
  double xmin = std::numeric_limits<double>::infinity(), xmax = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw DecayFitError(fmt::format("sample {} is not positive (x = {}, y = {})", i, x[i], y[i]));
    }
    xmin = std::min(xmin, x[i]);
    xmax = std::max(xmax, x[i]);
  }
  if (xmax / xmin < 4.0) {
    throw DecayFitError(fmt::format("insufficient span: abscissa covers a factor {:.3g} < 4", xmax / xmin));
  }
  std::vector<double> lx(x.size()), ly(y.size());
  std::transform(x.begin(), x.end(), lx.begin(), [](double v) { return std::log(v); });
  std::transform(y.begin(), y.end(), ly.begin(), [](double v) { return std::log(v); });
  const auto [slope, icpt] = ols(lx, ly);
  std::vector<double> fitted(lx.size()), resid(lx.size());
  for (std::size_t i = 0; i < lx.size(); ++i) {
    fitted[i] = icpt + slope * lx[i];
    resid[i] = ly[i] - fitted[i];
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, resid.size() - 1);
  std::vector<double> slopes;
  slopes.reserve(resamples);
  std::vector<double> yb(lx.size());
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < lx.size(); ++i) yb[i] = fitted[i] + resid[pick(rng)];
    slopes.push_back(ols(lx, yb).first);
  }
  std::sort(slopes.begin(), slopes.end());
  DecayFit f;
  f.exponent = slope;
  f.intercept = icpt;
  f.samples = static_cast<int>(x.size());
  if (!slopes.empty()) {
    const auto lo = static_cast<std::size_t>(std::floor(0.025 * (slopes.size() - 1)));
    const auto hi = static_cast<std::size_t>(std::ceil(0.975 * (slopes.size() - 1)));
    f.ci_low = slopes[lo];
    f.ci_high = slopes[hi];
  } else {
    f.ci_low = f.ci_high = slope;
  }
  return f;
}

std::pair<std::vector<double>, std::vector<double>> envelope_peaks(const std::vector<double>& x,
                                                                   const std::vector<double>& y) {
  std::vector<double> px, py;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    const double a = std::abs(y[i - 1]), b = std::abs(y[i]), c = std::abs(y[i + 1]);
    if (b > a && b >= c) {
      px.push_back(x[i]);
      py.push_back(b);
    }
  }
  return {px, py};
}

// ---------------------------------------------------------------------------

void EnergyReport::add_beta_reference() {
  reference_lines.emplace_back("beta", (n - 2) / 4.0);
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

void write_report_json(std::ostream& out, const EnergyReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["title"] = r.title;
  j["n"] = r.n;
  j["d"] = r.d;
  j["meta"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.meta) j["meta"][k] = v;
  j["reference_lines"] = nlohmann::ordered_json::array();
  for (const auto& [k, v] : r.reference_lines) j["reference_lines"].push_back({{"name", k}, {"value", v}});
  j["tables"] = nlohmann::ordered_json::array();
  for (const auto& t : r.tables) {
    nlohmann::ordered_json jt;
    jt["name"] = t.name;
    jt["columns"] = t.columns;
    jt["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
      nlohmann::ordered_json jr = nlohmann::ordered_json::array();
      for (double v : row) jr.push_back(number_or_null(v));
      jt["rows"].push_back(std::move(jr));
    }
    j["tables"].push_back(std::move(jt));
  }
  j["fits"] = nlohmann::ordered_json::array();
  for (const auto& f : r.fits) {
    j["fits"].push_back({{"name", f.name},
                         {"exponent", number_or_null(f.fit.exponent)},
                         {"ci_low", number_or_null(f.fit.ci_low)},
                         {"ci_high", number_or_null(f.fit.ci_high)},
                         {"samples", f.fit.samples},
                         {"reference", number_or_null(f.reference)}});
  }
  j["notes"] = r.notes;
  out << j.dump(2) << '\n';
}

void write_table_csv(std::ostream& out, const ReportTable& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "");
      if (std::isfinite(row[i])) {
        out << fmt::format("{:.17g}", row[i]);
      } else {
        out << "nan";
      }
    }
    out << '\n';
  }
}

}  // namespace kkstab
