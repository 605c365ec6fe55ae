#include "kkstab/schwarzschild.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/numeric/odeint.hpp>
#include <fmt/format.h>

#include "kkstab/evolve.hpp"

namespace kkstab {

namespace {

using Wide = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<150>,
                                           boost::multiprecision::et_off>;

template <class T>
T ipow(T x, int k) {
  if (k < 0) return T(1) / ipow(x, -k);
  T r(1);
  while (k > 0) {
    if (k & 1) r *= x;
    x *= x;
    k >>= 1;
  }
  return r;
}

template <class T>
std::vector<T> series_coefficients(int n, HarmonicVariant variant, int order) {
  const int m = n - 2;
  std::vector<T> a(order + 1, T(0));
  a[0] = T(1);
  if (variant == HarmonicVariant::Literal) {
    a[1] = T(-1) / T(2);
    return a;
  }
  for (int k = 1; k <= order; ++k) {
    const T b_prev = a[k - 1] * T(1 - m * (k - 1));
    a[k] = b_prev * T(n - 1 - m * k) / (T(m * k) * T(m * k - m - 2));
  }
  return a;
}

/// r(rbar), r'(rbar), r''(rbar) for the truncated series.
template <class T>
void series_radius(const std::vector<T>& a, int m, T c_s, T rbar, T& r, T& r1, T& r2) {
  const T z = c_s * ipow(rbar, -m);
  T zk(1), s0(0), s1(0), s2(0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const T mk(m * static_cast<int>(k));
    s0 += a[k] * zk;
    s1 += a[k] * (T(1) - mk) * zk;
    s2 += a[k] * (T(1) - mk) * (-mk) * zk;
    zk *= z;
  }
  r = rbar * s0;
  r1 = s1;
  r2 = s2 / rbar;
}

template <class T>
T invert_radius(const std::vector<T>& a, int m, T c_s, T r, T eps) {
  using std::abs;
  T rbar = r, rr, r1, r2;
  for (int it = 0; it < 200; ++it) {
    series_radius(a, m, c_s, rbar, rr, r1, r2);
    if (!(r1 > T(0))) throw HorizonError("harmonic chart degenerates (dr/drbar <= 0)");
    const T step = (rr - r) / r1;
    rbar -= step;
    if (abs(step) <= eps * abs(rbar)) return rbar;
  }
  throw HorizonError(fmt::format("harmonic chart inversion did not converge at r = {}", static_cast<double>(r)));
}

template <class T>
struct RadialJet {
  T F, Fp, P, Pp, Q, Qp;
};

/// g, g^{-1} and d g of -F dt^2 + P (delta - w w) + Q w w on (t, x^1..x^n).
template <class T>
void radial_arrays(int n, const std::vector<T>& x, const RadialJet<T>& j, std::vector<T>& g, std::vector<T>& ginv,
                   std::vector<T>& dg) {
  using std::sqrt;
  const int D = n + 1;
  T rho2(0);
  for (int i = 1; i <= n; ++i) rho2 += x[i] * x[i];
  const T rho = sqrt(rho2);
  std::vector<T> w(D, T(0));
  if (rho > T(0)) {
    for (int i = 1; i <= n; ++i) w[i] = x[i] / rho;
  } else if (j.P != j.Q || j.Pp != T(0) || j.Qp != T(0)) {
    throw std::invalid_argument("radial metric evaluated at the origin");
  }
  g.assign(D * D, T(0));
  ginv.assign(D * D, T(0));
  dg.assign(D * D * D, T(0));
  g[0] = -j.F;
  ginv[0] = T(-1) / j.F;
  const T diff = j.Q - j.P;
  const T dQP = j.Qp - j.Pp;
  for (int a = 1; a <= n; ++a) {
    for (int b = a; b <= n; ++b) {
      const T delta = a == b ? T(1) : T(0);
      const T ww = w[a] * w[b];
      g[a * D + b] = g[b * D + a] = j.P * delta + diff * ww;
      ginv[a * D + b] = ginv[b * D + a] = (delta - ww) / j.P + ww / j.Q;
    }
  }
  for (int c = 1; c <= n; ++c) {
    dg[(c * D + 0) * D + 0] = -j.Fp * w[c];
    if (rho == T(0)) continue;
    for (int a = 1; a <= n; ++a) {
      const T dwa = ((c == a ? T(1) : T(0)) - w[c] * w[a]) / rho;
      for (int b = a; b <= n; ++b) {
        const T dwb = ((c == b ? T(1) : T(0)) - w[c] * w[b]) / rho;
        const T delta = a == b ? T(1) : T(0);
        dg[(c * D + a) * D + b] = dg[(c * D + b) * D + a] =
            j.Pp * w[c] * delta + dQP * w[c] * w[a] * w[b] + diff * (dwa * w[b] + w[a] * dwb);
      }
    }
  }
}

template <class T>
std::vector<T> christoffels(int D, const std::vector<T>& ginv, const std::vector<T>& dg) {
  auto d = [&](int c, int a, int b) -> const T& { return dg[(c * D + a) * D + b]; };
  std::vector<T> lower(D * D * D);  // Gamma_{d b c}
  for (int dd = 0; dd < D; ++dd)
    for (int b = 0; b < D; ++b)
      for (int c = b; c < D; ++c)
        lower[(dd * D + b) * D + c] = lower[(dd * D + c) * D + b] = (d(b, dd, c) + d(c, dd, b) - d(dd, b, c)) / T(2);
  std::vector<T> gam(D * D * D, T(0));
  for (int a = 0; a < D; ++a)
    for (int dd = 0; dd < D; ++dd) {
      const T gi = ginv[a * D + dd];
      if (gi == T(0)) continue;
      for (int bc = 0; bc < D * D; ++bc) gam[a * D * D + bc] += gi * lower[dd * D * D + bc];
    }
  return gam;
}

template <class T>
std::vector<T> contract_gauge(int D, const std::vector<T>& ginv, const std::vector<T>& gam,
                              const std::vector<T>* ref) {
  std::vector<T> V(D, T(0));
  for (int c = 0; c < D; ++c)
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        T diff = gam[(c * D + a) * D + b];
        if (ref) diff -= (*ref)[(c * D + a) * D + b];
        V[c] += ginv[a * D + b] * diff;
      }
  return V;
}

/// Radial profile of the harmonic-chart metric at harmonic radius r.
template <class T>
RadialJet<T> harmonic_jet(int n, T c_s, const std::vector<T>& a, T r, T eps, double guard) {
  const int m = n - 2;
  const T R = invert_radius(a, m, c_s, r, eps);
  if (!(R > T(guard))) {
    throw HorizonError(fmt::format("harmonic radius {} maps inside the horizon guard (rbar = {})",
                                   static_cast<double>(r), static_cast<double>(R)));
  }
  T rr, r1, r2;
  series_radius(a, m, c_s, R, rr, r1, r2);
  const T Rp = T(1) / r1;
  const T Rpp = -r2 / (r1 * r1 * r1);
  RadialJet<T> j;
  j.F = T(1) - c_s * ipow(R, -m);
  j.Fp = T(m) * c_s * ipow(R, -m - 1) * Rp;
  j.P = R * R / (r * r);
  j.Pp = T(2) * R * Rp / (r * r) - T(2) * R * R / (r * r * r);
  j.Q = Rp * Rp / j.F;
  j.Qp = T(2) * Rp * Rpp / j.F - Rp * Rp * j.Fp / (j.F * j.F);
  return j;
}

std::vector<double> unit_inverse(int dim, const std::vector<double>& g) {
  Eigen::Map<const Eigen::MatrixXd> G(g.data(), dim, dim);
  Eigen::MatrixXd inv = G.partialPivLu().inverse();
  std::vector<double> out(dim * dim);
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) out[a * dim + b] = 0.5 * (inv(a, b) + inv(b, a));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void SchwarzschildParams::validate() const {
  if (n < 5) throw std::invalid_argument(fmt::format("Schwarzschild dimension n = {} must be >= 5", n));
  if (!(c_s >= 0.0) || !std::isfinite(c_s)) throw std::invalid_argument("C_S must be finite and >= 0");
  if (torus_dim < 0) throw std::invalid_argument("torus dimension must be >= 0");
  if (!(torus_length > 0.0)) throw std::invalid_argument("torus length must be positive");
}

double SchwarzschildParams::horizon_radius() const { return c_s > 0.0 ? std::pow(c_s, 1.0 / (n - 2)) : 0.0; }
double SchwarzschildParams::guard_radius() const { return 1.01 * horizon_radius(); }
double SchwarzschildParams::f(double rbar) const { return 1.0 - c_s * ipow(rbar, -(n - 2)); }
double SchwarzschildParams::f_prime(double rbar) const { return (n - 2) * c_s * ipow(rbar, -(n - 1)); }

std::string to_string(Chart c) {
  switch (c) {
    case Chart::SchwarzschildSpherical: return "schwarzschild-spherical";
    case Chart::SchwarzschildCartesian: return "schwarzschild-cartesian";
    case Chart::Harmonic: return "harmonic";
    case Chart::Generic: break;
  }
  return "generic";
}

MetricAtPoint metric_from_derivatives(Chart chart, int dim, std::vector<double> g, std::vector<double> dg) {
  if (static_cast<int>(g.size()) != dim * dim || static_cast<int>(dg.size()) != dim * dim * dim)
    throw std::invalid_argument("metric array sizes do not match the dimension");
  MetricAtPoint m;
  m.chart = chart;
  m.dim = dim;
  m.ginv = unit_inverse(dim, g);
  m.gamma = christoffels(dim, m.ginv, dg);
  m.g = std::move(g);
  m.dg = std::move(dg);
  return m;
}

static void check_exterior(const SchwarzschildParams& p, double rbar) {
  if (p.c_s > 0.0 && !(rbar > p.guard_radius())) {
    throw HorizonError(fmt::format("rbar = {} is inside the horizon guard 1.01 * C_S^(1/(n-2)) = {}", rbar,
                                   p.guard_radius()));
  }
}

MetricAtPoint schwarzschild_metric(const SchwarzschildParams& p, const std::vector<double>& coords, Chart chart) {
  p.validate();
  const int n = p.n;
  const int D = n + 1;
  if (static_cast<int>(coords.size()) != D)
    throw std::invalid_argument(fmt::format("expected {} coordinates, got {}", D, coords.size()));
  if (chart == Chart::SchwarzschildCartesian) {
    double rho2 = 0.0;
    for (int i = 1; i <= n; ++i) rho2 += coords[i] * coords[i];
    const double rbar = std::sqrt(rho2);
    check_exterior(p, rbar);
    const double f = p.f(rbar), fp = p.f_prime(rbar);
    return radial_cartesian_metric(n, coords, {f, fp, 1.0, 0.0, 1.0 / f, -fp / (f * f)}, chart);
  }
  if (chart != Chart::SchwarzschildSpherical)
    throw std::invalid_argument("schwarzschild_metric supports the Schwarzschild charts only");
  const double rbar = coords[1];
  if (!(rbar > 0.0)) throw std::invalid_argument("spherical chart needs rbar > 0");
  check_exterior(p, rbar);
  const double f = p.f(rbar), fp = p.f_prime(rbar);
  std::vector<double> g(D * D, 0.0), dg(D * D * D, 0.0);
  auto G = [&](int a, int b) -> double& { return g[a * D + b]; };
  auto dG = [&](int c, int a, int b) -> double& { return dg[(c * D + a) * D + b]; };
  G(0, 0) = -f;
  G(1, 1) = 1.0 / f;
  dG(1, 0, 0) = -fp;
  dG(1, 1, 1) = -fp / (f * f);
  // Round metric on S^{n-1}: d theta_1^2 + sin^2 theta_1 d theta_2^2 + ...
  for (int k = 2; k < D; ++k) {
    double prod = 1.0;
    for (int j = 2; j < k; ++j) prod *= std::sin(coords[j]) * std::sin(coords[j]);
    G(k, k) = rbar * rbar * prod;
    dG(1, k, k) = 2.0 * rbar * prod;
    for (int j = 2; j < k; ++j) dG(j, k, k) = 2.0 * G(k, k) * std::cos(coords[j]) / std::sin(coords[j]);
  }
  return metric_from_derivatives(chart, D, std::move(g), std::move(dg));
}

MetricAtPoint radial_cartesian_metric(int n, const std::vector<double>& x, const RadialProfile& prof, Chart chart) {
  if (static_cast<int>(x.size()) != n + 1)
    throw std::invalid_argument(fmt::format("expected {} coordinates, got {}", n + 1, x.size()));
  MetricAtPoint m;
  m.chart = chart;
  m.dim = n + 1;
  radial_arrays<double>(n, x, {prof.F, prof.Fp, prof.P, prof.Pp, prof.Q, prof.Qp}, m.g, m.ginv, m.dg);
  m.gamma = christoffels(m.dim, m.ginv, m.dg);
  return m;
}

// ---------------------------------------------------------------------------

HarmonicChart::HarmonicChart(SchwarzschildParams p, HarmonicVariant variant, int order)
    : p_(p), variant_(variant) {
  p_.validate();
  if (order < 1) throw TruncationOrderError("harmonic series order must be >= 1");
  if (order > kMaxHarmonicOrder)
    throw TruncationOrderError(
        fmt::format("harmonic series order {} exceeds the implemented maximum {}", order, kMaxHarmonicOrder));
  if (variant == HarmonicVariant::Literal && order > 1)
    throw TruncationOrderError("the literal variant is defined at leading order only");
  a_ = series_coefficients<double>(p_.n, variant, order);
}

double HarmonicChart::radius(double rbar) const {
  double r, r1, r2;
  series_radius(a_, p_.n - 2, p_.c_s, rbar, r, r1, r2);
  return r;
}

double HarmonicChart::radius_d1(double rbar) const {
  double r, r1, r2;
  series_radius(a_, p_.n - 2, p_.c_s, rbar, r, r1, r2);
  return r1;
}

double HarmonicChart::radius_d2(double rbar) const {
  double r, r1, r2;
  series_radius(a_, p_.n - 2, p_.c_s, rbar, r, r1, r2);
  return r2;
}

double HarmonicChart::schwarzschild_radius(double r) const {
  if (p_.c_s == 0.0) return r;
  const double rbar = invert_radius(a_, p_.n - 2, p_.c_s, r, 1e-15);
  check_exterior(p_, rbar);
  return rbar;
}

double to_harmonic_chart(const HarmonicChart& chart, double rbar) {
  check_exterior(chart.params(), rbar);
  return chart.radius(rbar);
}

MetricAtPoint harmonic_metric(const HarmonicChart& chart, const std::vector<double>& x) {
  const auto& p = chart.params();
  if (static_cast<int>(x.size()) != p.n + 1)
    throw std::invalid_argument(fmt::format("expected {} coordinates, got {}", p.n + 1, x.size()));
  double r2 = 0.0;
  for (int i = 1; i <= p.n; ++i) r2 += x[i] * x[i];
  const double r = std::sqrt(r2);
  MetricAtPoint m;
  m.chart = Chart::Harmonic;
  m.dim = p.n + 1;
  if (p.c_s == 0.0) {
    radial_arrays<double>(p.n, x, {1, 0, 1, 0, 1, 0}, m.g, m.ginv, m.dg);
  } else {
    const auto j = harmonic_jet<double>(p.n, p.c_s, chart.coefficients(), r, 1e-15, p.guard_radius());
    radial_arrays<double>(p.n, x, j, m.g, m.ginv, m.dg);
  }
  m.gamma = christoffels(m.dim, m.ginv, m.dg);
  return m;
}

double harmonic_deviation(const HarmonicChart& chart, double r) {
  const auto& p = chart.params();
  if (p.c_s == 0.0) return 0.0;
  if (!(r > 0.0)) throw std::invalid_argument("harmonic_deviation needs r > 0");
  // On the x^1 axis g - eta is diagonal: 1 - F, Q - 1 and (n - 1) copies of P - 1.
  // Wide arithmetic keeps the differences exact far below double resolution.
  const auto a = series_coefficients<Wide>(p.n, chart.variant(), chart.order());
  const auto j = harmonic_jet<Wide>(p.n, Wide(p.c_s), a, Wide(r), std::numeric_limits<Wide>::epsilon() * 16,
                                    p.guard_radius());
  const Wide one(1);
  const Wide s = (one - j.F) * (one - j.F) + (j.Q - one) * (j.Q - one) + Wide(p.n - 1) * (j.P - one) * (j.P - one);
  return static_cast<double>(sqrt(s));
}

// ---------------------------------------------------------------------------

std::vector<double> wave_gauge_residual(const MetricAtPoint& g, const MetricAtPoint* reference) {
  if (reference && reference->dim != g.dim) throw std::invalid_argument("reference metric dimension mismatch");
  return contract_gauge(g.dim, g.ginv, g.gamma, reference ? &reference->gamma : nullptr);
}

std::vector<double> harmonic_wave_gauge_residual(const HarmonicChart& chart, const std::vector<double>& x) {
  const auto& p = chart.params();
  const int D = p.n + 1;
  if (static_cast<int>(x.size()) != D)
    throw std::invalid_argument(fmt::format("expected {} coordinates, got {}", D, x.size()));
  if (p.c_s == 0.0) return std::vector<double>(D, 0.0);
  std::vector<Wide> xw(x.begin(), x.end());
  Wide r2(0);
  for (int i = 1; i <= p.n; ++i) r2 += xw[i] * xw[i];
  const auto a = series_coefficients<Wide>(p.n, chart.variant(), chart.order());
  const Wide eps = std::numeric_limits<Wide>::epsilon() * 16;
  const auto j = harmonic_jet<Wide>(p.n, Wide(p.c_s), a, sqrt(r2), eps, p.guard_radius());
  std::vector<Wide> g, ginv, dg;
  radial_arrays<Wide>(p.n, xw, j, g, ginv, dg);
  const auto gam = christoffels(D, ginv, dg);
  const auto V = contract_gauge<Wide>(D, ginv, gam, nullptr);
  std::vector<double> out(D);
  for (int c = 0; c < D; ++c) out[c] = static_cast<double>(V[c]);
  return out;
}

double tensor_norm(const std::vector<double>& t) {
  double s = 0.0;
  for (double x : t) s += x * x;
  return std::sqrt(s);
}

std::vector<double> numeric_ricci(const MetricField& metric, const std::vector<double>& x, double delta) {
  const auto m0 = metric(x);
  const int D = m0.dim;
  if (static_cast<int>(x.size()) != D) throw std::invalid_argument("point and metric dimension differ");
  std::vector<std::vector<double>> dgam(D);
  for (int e = 0; e < D; ++e) {
    auto xp = x, xm = x;
    xp[e] += delta;
    xm[e] -= delta;
    const auto gp = metric(xp).gamma;
    const auto gm = metric(xm).gamma;
    dgam[e].resize(gp.size());
    for (std::size_t i = 0; i < gp.size(); ++i) dgam[e][i] = (gp[i] - gm[i]) / (2.0 * delta);
  }
  auto G = [&](int a, int b, int c) { return m0.gamma[(a * D + b) * D + c]; };
  std::vector<double> ric(D * D, 0.0);
  for (int b = 0; b < D; ++b)
    for (int d = 0; d < D; ++d) {
      double s = 0.0;
      for (int a = 0; a < D; ++a) {
        s += dgam[a][(a * D + b) * D + d] - dgam[d][(a * D + a) * D + b];
        for (int e = 0; e < D; ++e) s += G(a, a, e) * G(e, b, d) - G(a, d, e) * G(e, a, b);
      }
      ric[b * D + d] = s;
    }
  return ric;
}

double scalar_curvature(const SpatialMetric& metric, const std::vector<double>& x, double delta) {
  const int D = static_cast<int>(x.size());
  const auto g0 = metric(x);
  if (static_cast<int>(g0.size()) != D * D) throw std::invalid_argument("spatial metric size mismatch");
  auto at = [&](int i, double si, int j, double sj) {
    auto y = x;
    y[i] += si * delta;
    if (j >= 0) y[j] += sj * delta;
    return metric(y);
  };
  const int DD = D * D;
  std::vector<double> dg(D * DD), ddg(D * D * DD);  // dg[c][ab], ddg[c][e][ab]
  std::vector<std::vector<double>> plus(D), minus(D);
  for (int c = 0; c < D; ++c) {
    plus[c] = at(c, 1, -1, 0);
    minus[c] = at(c, -1, -1, 0);
    for (int ab = 0; ab < DD; ++ab) {
      dg[c * DD + ab] = (plus[c][ab] - minus[c][ab]) / (2.0 * delta);
      ddg[(c * D + c) * DD + ab] = (plus[c][ab] - 2.0 * g0[ab] + minus[c][ab]) / (delta * delta);
    }
  }
  for (int c = 0; c < D; ++c)
    for (int e = c + 1; e < D; ++e) {
      const auto pp = at(c, 1, e, 1), pm = at(c, 1, e, -1), mp = at(c, -1, e, 1), mm = at(c, -1, e, -1);
      for (int ab = 0; ab < DD; ++ab)
        ddg[(c * D + e) * DD + ab] = ddg[(e * D + c) * DD + ab] =
            (pp[ab] - pm[ab] - mp[ab] + mm[ab]) / (4.0 * delta * delta);
    }
  const auto ginv = unit_inverse(D, g0);
  const auto gam = christoffels(D, ginv, dg);
  // d_e g^{ad} = -g^{ap} d_e g_pq g^{qd}
  std::vector<double> dginv(D * DD, 0.0);
  for (int e = 0; e < D; ++e)
    for (int a = 0; a < D; ++a)
      for (int d = 0; d < D; ++d) {
        double s = 0.0;
        for (int p = 0; p < D; ++p)
          for (int q = 0; q < D; ++q) s += ginv[a * D + p] * dg[e * DD + p * D + q] * ginv[q * D + d];
        dginv[e * DD + a * D + d] = -s;
      }
  // d_e Gamma^a_bc
  std::vector<double> dgam(D * D * DD, 0.0);
  for (int e = 0; e < D; ++e)
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b)
        for (int c = 0; c < D; ++c) {
          double s = 0.0;
          for (int d = 0; d < D; ++d) {
            const double S = dg[b * DD + d * D + c] + dg[c * DD + d * D + b] - dg[d * DD + b * D + c];
            const double dS = ddg[(e * D + b) * DD + d * D + c] + ddg[(e * D + c) * DD + d * D + b] -
                              ddg[(e * D + d) * DD + b * D + c];
            s += dginv[e * DD + a * D + d] * S + ginv[a * D + d] * dS;
          }
          dgam[((e * D + a) * D + b) * D + c] = 0.5 * s;
        }
  auto G = [&](int a, int b, int c) { return gam[(a * D + b) * D + c]; };
  auto dG = [&](int e, int a, int b, int c) { return dgam[((e * D + a) * D + b) * D + c]; };
  double R = 0.0;
  for (int b = 0; b < D; ++b)
    for (int d = 0; d < D; ++d) {
      const double gi = ginv[b * D + d];
      if (gi == 0.0) continue;
      double ric = 0.0;
      for (int a = 0; a < D; ++a) {
        ric += dG(a, a, b, d) - dG(d, a, a, b);
        for (int e = 0; e < D; ++e) ric += G(a, a, e) * G(e, b, d) - G(a, d, e) * G(e, a, b);
      }
      R += gi * ric;
    }
  return R;
}

SpatialMetric schwarzschild_slice_metric(const SchwarzschildParams& p) {
  p.validate();
  return [p](const std::vector<double>& x) {
    const int D = p.n + p.torus_dim;
    if (static_cast<int>(x.size()) != D)
      throw std::invalid_argument(fmt::format("expected {} coordinates, got {}", D, x.size()));
    double rho2 = 0.0;
    for (int i = 0; i < p.n; ++i) rho2 += x[i] * x[i];
    const double rbar = std::sqrt(rho2);
    check_exterior(p, rbar);
    const double extra = 1.0 / p.f(rbar) - 1.0;
    std::vector<double> g(D * D, 0.0);
    for (int a = 0; a < D; ++a) g[a * D + a] = 1.0;
    for (int a = 0; a < p.n; ++a)
      for (int b = 0; b < p.n; ++b) g[a * D + b] += extra * x[a] * x[b] / rho2;
    return g;
  };
}

ConstraintResidual constraint_residual(const SpatialMetric& metric, const std::vector<std::vector<double>>& points,
                                       double delta) {
  ConstraintResidual res;
  for (const auto& x : points) res.hamiltonian = std::max(res.hamiltonian, std::abs(scalar_curvature(metric, x, delta)));
  // Time-symmetric data: kappa = 0, so D_j kappa^j_i - D_i tr kappa vanishes identically.
  res.momentum = 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Geodesics
// ---------------------------------------------------------------------------

namespace {

struct ProductMetric {
  const HarmonicChart& chart;
  int n, D;

  MetricAtPoint spacetime(const std::vector<double>& x) const {
    return harmonic_metric(chart, std::vector<double>(x.begin(), x.begin() + n + 1));
  }

  double norm(const MetricAtPoint& m, const std::vector<double>& v) const {
    double s = 0.0;
    for (int a = 0; a <= n; ++a)
      for (int b = 0; b <= n; ++b) s += m.metric(a, b) * v[a] * v[b];
    for (int a = n + 1; a < D; ++a) s += v[a] * v[a];
    return s;
  }

  GeodesicSample sample(double lambda, const std::vector<double>& x, const std::vector<double>& v,
                        std::vector<double>* ang) const {
    const auto m = spacetime(x);
    GeodesicSample s;
    s.lambda = lambda;
    s.t = x[0];
    double r2 = 0.0, xv = 0.0;
    for (int i = 1; i <= n; ++i) {
      r2 += x[i] * x[i];
      xv += x[i] * v[i];
    }
    s.r = std::sqrt(r2);
    s.drdt = xv / (s.r * v[0]);
    s.norm = norm(m, v);
    s.energy = -m.metric(0, 0) * v[0];
    std::vector<double> low(n + 1, 0.0);
    for (int i = 1; i <= n; ++i)
      for (int j = 1; j <= n; ++j) low[i] += m.metric(i, j) * v[j];
    ang->clear();
    double l2 = 0.0;
    for (int i = 1; i <= n; ++i)
      for (int j = i + 1; j <= n; ++j) {
        const double L = x[i] * low[j] - x[j] * low[i];
        ang->push_back(L);
        l2 += L * L;
      }
    s.angular_momentum = std::sqrt(l2);
    for (int a = n + 1; a < D; ++a) s.torus_momentum.push_back(v[a]);
    return s;
  }
};

}  // namespace

GeodesicResult integrate_geodesic(const HarmonicChart& chart, const GeodesicState& init, const GeodesicOptions& opt) {
  namespace ode = boost::numeric::odeint;
  const auto& p = chart.params();
  const ProductMetric pm{chart, p.n, 1 + p.n + p.torus_dim};
  const int D = pm.D;
  if (static_cast<int>(init.x.size()) != D || static_cast<int>(init.v.size()) != D)
    throw std::invalid_argument(fmt::format("geodesic state needs {} coordinates and velocities", D));
  if (!(opt.lambda_end > init.lambda)) throw std::invalid_argument("lambda_end must exceed the initial parameter");
  if (!(init.v[0] > 0.0)) throw std::invalid_argument("initial velocity must be future directed (dt/dlambda > 0)");

  const auto m0 = pm.spacetime(init.x);
  const double norm0 = pm.norm(m0, init.v);
  double v2 = 0.0;
  for (double c : init.v) v2 += c * c;
  if (norm0 > 1e-10 * v2) throw std::invalid_argument(fmt::format("initial velocity is spacelike (g(v,v) = {})", norm0));
  double r0 = 0.0;
  for (int i = 1; i <= p.n; ++i) r0 += init.x[i] * init.x[i];
  r0 = std::sqrt(r0);
  if (!opt.exterior_probe && r0 > init.x[0] - 2.0)
    throw std::invalid_argument(
        fmt::format("launch point |x| = {} lies outside |x| <= t - 2; flag it as an exterior probe", r0));

  using State = std::vector<double>;
  auto rhs = [&](const State& y, State& dy, double) {
    const std::vector<double> x(y.begin(), y.begin() + D);
    const auto m = pm.spacetime(x);
    const int S = p.n + 1;
    for (int a = 0; a < D; ++a) dy[a] = y[D + a];
    for (int a = 0; a < D; ++a) dy[D + a] = 0.0;
    for (int a = 0; a < S; ++a) {
      double acc = 0.0;
      for (int b = 0; b < S; ++b) {
        const double vb = y[D + b];
        if (vb == 0.0) continue;
        for (int c = 0; c < S; ++c) acc += m.gamma[(a * S + b) * S + c] * vb * y[D + c];
      }
      dy[D + a] = -acc;
    }
  };

  State y(2 * D);
  std::copy(init.x.begin(), init.x.end(), y.begin());
  std::copy(init.v.begin(), init.v.end(), y.begin() + D);
  auto stepper = ode::make_controlled(opt.abs_tol, opt.rel_tol, ode::runge_kutta_dopri5<State>());

  GeodesicResult res;
  std::vector<double> ang0, ang;
  const auto s0 = pm.sample(init.lambda, init.x, init.v, &ang0);
  res.samples.push_back(s0);
  double lmax = 0.0;
  for (double L : ang0) lmax = std::max(lmax, std::abs(L));
  const double ang_scale = std::max(lmax, std::abs(s0.energy) * std::max(r0, 1.0));
  double pscale = std::abs(s0.energy);
  for (double q : s0.torus_momentum) pscale = std::max(pscale, std::abs(q));

  double lambda = init.lambda;
  double dl = opt.initial_step;
  double t_prev = init.x[0];
  int rejected = 0;
  const int stride = std::max(1, opt.sample_stride);
  while (lambda < opt.lambda_end) {
    dl = std::min(dl, opt.lambda_end - lambda);
    ode::controlled_step_result outcome;
    try {
      outcome = stepper.try_step(rhs, y, lambda, dl);
    } catch (const HorizonError& e) {
      throw HorizonError(fmt::format("geodesic captured near lambda = {}: {}", lambda, e.what()));
    }
    if (outcome == ode::fail) {
      if (++rejected > 200 || dl < 1e-14 * std::max(1.0, std::abs(lambda)))
        throw GeodesicError(fmt::format("step size underflow at lambda = {}", lambda));
      continue;
    }
    rejected = 0;
    ++res.steps;
    if (!(y[0] > t_prev)) res.t_monotone = false;
    t_prev = y[0];
    const std::vector<double> x(y.begin(), y.begin() + D), v(y.begin() + D, y.end());
    double r = 0.0;
    for (int i = 1; i <= p.n; ++i) r += x[i] * x[i];
    r = std::sqrt(r);
    const bool stop = opt.stop_radius > 0.0 && r >= opt.stop_radius;
    const bool last = stop || lambda >= opt.lambda_end;
    const auto s = pm.sample(lambda, x, v, &ang);
    res.norm_drift_rate =
        std::max(res.norm_drift_rate, std::abs(s.norm - s0.norm) / std::max(lambda - init.lambda, 1.0));
    res.energy_drift = std::max(res.energy_drift, std::abs(s.energy - s0.energy) / std::abs(s0.energy));
    for (std::size_t k = 0; k < ang.size(); ++k)
      res.angular_drift = std::max(res.angular_drift, std::abs(ang[k] - ang0[k]) / ang_scale);
    for (std::size_t k = 0; k < s.torus_momentum.size(); ++k)
      res.torus_drift = std::max(res.torus_drift, std::abs(s.torus_momentum[k] - s0.torus_momentum[k]) / pscale);
    if (last || res.steps % stride == 0) res.samples.push_back(s);
    if (last) break;
  }
  res.final_state.lambda = lambda;
  res.final_state.x.assign(y.begin(), y.begin() + D);
  res.final_state.v.assign(y.begin() + D, y.end());
  res.asymptotic_drdt = res.samples.back().drdt;
  return res;
}

std::vector<GeodesicResult> integrate_geodesics(const HarmonicChart& chart, const std::vector<GeodesicState>& inits,
                                                const GeodesicOptions& opt, int workers) {
  std::vector<GeodesicResult> out(inits.size());
  parallel_for(static_cast<int>(inits.size()), workers,
               [&](int i) { out[i] = integrate_geodesic(chart, inits[i], opt); });
  return out;
}

GeodesicState radial_null_state(const HarmonicChart& chart, double r0, double t0) {
  const auto& p = chart.params();
  GeodesicState s;
  s.x.assign(1 + p.n + p.torus_dim, 0.0);
  s.v.assign(s.x.size(), 0.0);
  s.x[0] = t0;
  s.x[1] = r0;
  const auto m = harmonic_metric(chart, std::vector<double>(s.x.begin(), s.x.begin() + p.n + 1));
  const double F = -m.metric(0, 0);
  s.v[0] = 1.0 / F;  // unit energy
  s.v[1] = std::sqrt(F * s.v[0] * s.v[0] / m.metric(1, 1));
  return s;
}

GeodesicState circular_orbit_state(const HarmonicChart& chart, double rbar0, double t0, double* period_lambda) {
  const auto& p = chart.params();
  if (p.c_s <= 0.0) throw std::invalid_argument("circular orbits need C_S > 0");
  check_exterior(p, rbar0);
  // d phi / dt for a circular geodesic: Omega^2 = f'(rbar) / (2 rbar).
  const double omega = std::sqrt(p.f_prime(rbar0) / (2.0 * rbar0));
  const double f = p.f(rbar0);
  const double denom = f - rbar0 * rbar0 * omega * omega;
  if (!(denom > 0.0)) throw std::invalid_argument("no timelike circular orbit at this radius");
  const double ut = 1.0 / std::sqrt(denom);
  const double r0 = chart.radius(rbar0);
  GeodesicState s;
  s.x.assign(1 + p.n + p.torus_dim, 0.0);
  s.v.assign(s.x.size(), 0.0);
  s.x[0] = t0;
  s.x[1] = r0;
  s.v[0] = ut;
  s.v[2] = r0 * omega * ut;
  if (period_lambda) *period_lambda = 2.0 * M_PI / omega / ut;
  return s;
}

void write_geodesic_csv(std::ostream& out, const HarmonicChart& chart, const GeodesicResult& result) {
  const auto& p = chart.params();
  out << fmt::format("# kkstab geodesic n={} c_s={:.17g} torus_dim={} torus_length={:.17g} variant={} order={}\n",
                     p.n, p.c_s, p.torus_dim, p.torus_length,
                     chart.variant() == HarmonicVariant::Harmonic ? "harmonic" : "literal", chart.order());
  out << fmt::format("# t_monotone={} asymptotic_drdt={:.17g} norm_drift_rate={:.6e} energy_drift={:.6e} "
                     "angular_drift={:.6e}\n",
                     result.t_monotone ? "true" : "false", result.asymptotic_drdt, result.norm_drift_rate,
                     result.energy_drift, result.angular_drift);
  out << "lambda,t,r,drdt,norm,energy,angular_momentum";
  for (int a = 0; a < p.torus_dim; ++a) out << ",p_y" << a + 1;
  out << '\n';
  for (const auto& s : result.samples) {
    out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}", s.lambda, s.t, s.r, s.drdt, s.norm,
                       s.energy, s.angular_momentum);
    for (double q : s.torus_momentum) out << fmt::format(",{:.17g}", q);
    out << '\n';
  }
}

}  // namespace kkstab
