#pragma once

// Higher-dimensional Schwarzschild exterior: closed-form metric, a harmonic
// chart built from a Frobenius series of the radial harmonic condition, the
// wave-gauge residual, finite-difference curvature, time-symmetric constraint
// residuals and geodesics of the product with a flat torus.

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace kkstab {

class HorizonError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class TruncationOrderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GeodesicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SchwarzschildParams {
  int n = 9;           ///< spatial dimension of the non-compact factor
  double c_s = 0.0;    ///< mass parameter, >= 0
  int torus_dim = 1;   ///< flat internal torus T^d
  double torus_length = 1.0;

  void validate() const;
  /// C_S^{1/(n-2)}.
  double horizon_radius() const;
  /// 1.01 * horizon radius; metric evaluation below this throws HorizonError.
  double guard_radius() const;
  /// 1 - C_S / rbar^{n-2}.
  double f(double rbar) const;
  double f_prime(double rbar) const;
};

enum class Chart { SchwarzschildSpherical, SchwarzschildCartesian, Harmonic, Generic };
std::string to_string(Chart c);

/// Metric components in some chart with first derivatives and Christoffels.
/// Flat arrays: g[a*D+b], dg[(c*D+a)*D+b] = d_c g_ab, gamma[(a*D+b)*D+c] = Gamma^a_bc.
struct MetricAtPoint {
  Chart chart = Chart::Generic;
  int dim = 0;
  std::vector<double> g, ginv, dg, gamma;

  double metric(int a, int b) const { return g[a * dim + b]; }
  double inverse(int a, int b) const { return ginv[a * dim + b]; }
  double christoffel(int a, int b, int c) const { return gamma[(a * dim + b) * dim + c]; }
};

/// Completes a metric from g and d g (inverse via LU, Christoffels).
MetricAtPoint metric_from_derivatives(Chart chart, int dim, std::vector<double> g, std::vector<double> dg);

/// Schwarzschild metric. Spherical chart: coords (t, rbar, theta_1..theta_{n-1});
/// Cartesian chart: coords (t, xbar^1..xbar^n) with rbar = |xbar|.
/// Throws HorizonError for rbar <= 1.01 C_S^{1/(n-2)}.
MetricAtPoint schwarzschild_metric(const SchwarzschildParams& p, const std::vector<double>& coords,
                                   Chart chart = Chart::SchwarzschildSpherical);

/// Static radial profile of g = -F dt^2 + P (delta - w w) + Q w w at |x| = rho.
struct RadialProfile {
  double F = 1, Fp = 0, P = 1, Pp = 0, Q = 1, Qp = 0;
};

/// Cartesian-chart metric (t, x^1..x^n) of a static spherically symmetric profile.
MetricAtPoint radial_cartesian_metric(int n, const std::vector<double>& x, const RadialProfile& prof,
                                      Chart chart = Chart::Generic);

// ---------------------------------------------------------------------------
// Harmonic chart
// ---------------------------------------------------------------------------

/// Coefficient choice for the first correction r = rbar (1 + a_1 z + ...),
/// z = C_S rbar^{2-n}. Harmonic: a_1 = -1/(2(n-2)), solving the harmonic
/// condition. Literal: a_1 = -1/2 at leading order only.
enum class HarmonicVariant { Harmonic, Literal };

inline constexpr int kMaxHarmonicOrder = 8;

class HarmonicChart {
 public:
  /// order >= 1 terms of the series. Throws TruncationOrderError when the
  /// order exceeds kMaxHarmonicOrder, or exceeds 1 for the Literal variant.
  HarmonicChart(SchwarzschildParams p, HarmonicVariant variant = HarmonicVariant::Harmonic, int order = 1);

  const SchwarzschildParams& params() const noexcept { return p_; }
  HarmonicVariant variant() const noexcept { return variant_; }
  int order() const noexcept { return static_cast<int>(a_.size()) - 1; }
  const std::vector<double>& coefficients() const noexcept { return a_; }

  /// r(rbar) and its first two derivatives.
  double radius(double rbar) const;
  double radius_d1(double rbar) const;
  double radius_d2(double rbar) const;
  /// Inverse map rbar(r). Throws HorizonError inside the guard radius.
  double schwarzschild_radius(double r) const;

 private:
  SchwarzschildParams p_;
  HarmonicVariant variant_;
  std::vector<double> a_;
};

/// rbar -> r at the chart's truncation.
double to_harmonic_chart(const HarmonicChart& chart, double rbar);

/// Metric in harmonic Cartesian coordinates x = (t, x^1..x^n).
MetricAtPoint harmonic_metric(const HarmonicChart& chart, const std::vector<double>& x);

/// Euclidean norm of g - eta over all components, for the harmonic metric.
double harmonic_deviation(const HarmonicChart& chart, double r);

// ---------------------------------------------------------------------------
// Gauge and curvature
// ---------------------------------------------------------------------------

/// V^c = g^{ab} (Gamma^c_ab[g] - Gamma^c_ab[ref]); a null reference means
/// Minkowski in Cartesian form (vanishing Christoffels).
std::vector<double> wave_gauge_residual(const MetricAtPoint& g, const MetricAtPoint* reference = nullptr);

/// Wave-gauge residual of the harmonic metric against Cartesian Minkowski,
/// evaluated in 150-digit arithmetic so that residuals far below the size of
/// the Christoffel symbols are resolved.
std::vector<double> harmonic_wave_gauge_residual(const HarmonicChart& chart, const std::vector<double>& x);

using MetricField = std::function<MetricAtPoint(const std::vector<double>&)>;

/// Ricci tensor from central differences of the Christoffel symbols.
std::vector<double> numeric_ricci(const MetricField& metric, const std::vector<double>& x, double delta);

/// Frobenius norm of a flat dim x dim tensor.
double tensor_norm(const std::vector<double>& t);

/// Spatial Riemannian metric as a function of position: returns dim*dim entries.
using SpatialMetric = std::function<std::vector<double>(const std::vector<double>&)>;

/// Scalar curvature from central differences of the metric (second order in delta).
double scalar_curvature(const SpatialMetric& metric, const std::vector<double>& x, double delta);

/// The t = const Schwarzschild slice (Cartesian chart) times the flat torus,
/// on coordinates (xbar^1..xbar^n, y^1..y^d).
SpatialMetric schwarzschild_slice_metric(const SchwarzschildParams& p);

struct ConstraintResidual {
  double hamiltonian = 0.0;  ///< max |R[gamma]| over the sample points
  double momentum = 0.0;     ///< identically zero for time-symmetric data
};

/// Time-symmetric (kappa = 0) constraint residuals at the given points.
ConstraintResidual constraint_residual(const SpatialMetric& metric, const std::vector<std::vector<double>>& points,
                                       double delta);

// ---------------------------------------------------------------------------
// Geodesics
// ---------------------------------------------------------------------------

/// Point of the product spacetime: x = (t, x^1..x^n, y^1..y^d) in the
/// harmonic chart, v = d x / d lambda.
struct GeodesicState {
  double lambda = 0.0;
  std::vector<double> x;
  std::vector<double> v;
};

struct GeodesicOptions {
  double lambda_end = 100.0;
  double abs_tol = 1e-13;
  double rel_tol = 1e-13;
  double initial_step = 1e-3;
  double stop_radius = 0.0;   ///< stop once |x| >= stop_radius (0 = never)
  int sample_stride = 1;      ///< keep every k-th accepted step
  bool exterior_probe = false;  ///< allow launch points with |x| > t - 2
};

struct GeodesicSample {
  double lambda = 0.0, t = 0.0, r = 0.0, drdt = 0.0, norm = 0.0;
  double energy = 0.0;            ///< -g(v, d_t)
  double angular_momentum = 0.0;  ///< sqrt(sum_{i<j} L_ij^2)
  std::vector<double> torus_momentum;
};

struct GeodesicResult {
  std::vector<GeodesicSample> samples;
  GeodesicState final_state;
  bool t_monotone = true;
  double asymptotic_drdt = 0.0;
  double norm_drift_rate = 0.0;   ///< max |g(v,v) - g0| / max(lambda - lambda0, 1)
  double energy_drift = 0.0;      ///< max relative change of the energy
  double angular_drift = 0.0;     ///< max change of any L_ij relative to max(|L|, |E|)
  double torus_drift = 0.0;
  long long steps = 0;
};

/// Adaptive Dormand-Prince integration. Throws HorizonError on capture,
/// GeodesicError on step failure, std::invalid_argument for non-causal or
/// past-directed data or (without exterior_probe) a launch point with |x| > t - 2.
GeodesicResult integrate_geodesic(const HarmonicChart& chart, const GeodesicState& init,
                                  const GeodesicOptions& opt);

/// Independent integrations on a bounded pool of workers.
std::vector<GeodesicResult> integrate_geodesics(const HarmonicChart& chart, const std::vector<GeodesicState>& inits,
                                                const GeodesicOptions& opt, int workers);

/// Outgoing radial null ray at harmonic radius r0 and time t0, unit energy.
GeodesicState radial_null_state(const HarmonicChart& chart, double r0, double t0);

/// Timelike circular orbit in the x^1-x^2 plane at Schwarzschild radius rbar0,
/// parametrized by proper time. period_lambda receives one orbital period.
GeodesicState circular_orbit_state(const HarmonicChart& chart, double rbar0, double t0, double* period_lambda);

void write_geodesic_csv(std::ostream& out, const HarmonicChart& chart, const GeodesicResult& result);

}  // namespace kkstab
