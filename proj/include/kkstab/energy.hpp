#pragma once

/// @file energy.hpp
/// @brief Hyperboloidal energies of radial mode fields, the stress tensor, the
/// energy identity, energy equivalence under a perturbation gamma, the
/// Hardy/Sobolev/L^2 estimate suite, decay fits and report serialization.
///
/// Fields are radial profiles evaluated on the x^1 axis. A perturbation
/// gamma^{ab} of the inverse metric is described by four radial functions:
///   gamma^{00} = a,  gamma^{0i} = b w_i,  gamma^{ij} = c delta_ij + e w_i w_j,
/// with w = x/|x|. The equation of motion is
///   (eta + gamma)^{ab} d_a d_b u - lambda u = F,   eta = diag(-1, 1, ..., 1).

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kkstab/evolve.hpp"

namespace kkstab {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct SobolevParams {
  int n = 9;
  int d = 1;
  int d_tilde = 0;   ///< smallest even integer > d/2
  int nu_tilde = 0;  ///< smallest integer > n/2 + d_tilde
  double beta = 0.0; ///< (n - 2)/4
  int N = 0;         ///< smallest even integer > (n + d + 8)/2
  bool integrable() const noexcept { return beta > 1.5; }
};

SobolevParams sobolev_params(int n, int d);

/// Energy-equivalence smallness threshold on sup t |gamma|_E.
inline constexpr double kEquivalenceEpsilon = 0.06;

// ---------------------------------------------------------------------------
// Perturbation and stress tensor
// ---------------------------------------------------------------------------

/// Radial description of gamma at one point with first derivatives.
struct GammaPoint {
  double a = 0, b = 0, c = 0, e = 0;
  double a_t = 0, b_t = 0, c_t = 0, e_t = 0;
  double a_r = 0, b_r = 0, c_r = 0, e_r = 0;
};

/// |gamma|_E at a point of the axis.
double gamma_euclidean_norm(int n, const GammaPoint& g);

/// Full (n+1) x (n+1) matrix gamma^{ab} at the axis point x = r e_1.
std::vector<double> gamma_matrix(int n, const GammaPoint& g);

/// T^mu_nu = (eta + gamma)^{mu a} d_a u d_nu u
///           - 1/2 ((eta + gamma)^{ab} d_a u d_b u + lambda u^2) delta^mu_nu,
/// for Cartesian gradient du (length n+1) and a (possibly empty) gamma matrix.
/// Row-major (n+1) x (n+1), index [mu * (n+1) + nu].
std::vector<double> stress_tensor(int n, const std::vector<double>& gamma, const std::vector<double>& du,
                                  double lambda, double u);

/// -2 T^mu_0 n_mu at (t, x) with n_0 = 1, n_i = -x_i/t.
double stress_energy_density(int n, const std::vector<double>& T, double t, const std::vector<double>& x);

/// Hyperboloidal energy integrand written directly:
/// (s/t)^2 u_t^2 + (Y u)^2 + lambda u^2 - 2 gamma^{ab} d_b u u_t n_a + gamma^{ab} d_a u d_b u.
double energy_density(int n, double s, double t, double r, double lambda, double u, double u_t, double u_r,
                      const GammaPoint* gamma = nullptr);

/// Divergence d_mu(T^mu_nu (d_t)^nu) of a linear (gamma = 0) solution,
/// evaluated by centred differences on an interior slice of a window.
/// Returns one value per interior radial node (zero at the axis and edge).
std::vector<double> stress_divergence(const ModeField& f, int slice);

// ---------------------------------------------------------------------------
// Energies
// ---------------------------------------------------------------------------

/// Mode data entering an energy: recorded jets plus the internal weights.
struct ModeSlice {
  const SliceJets* jets = nullptr;
  double lambda = 0.0;
  double internal_norm2 = 1.0;  ///< L^2(K) norm^2 of the internal factor
  double weight = 1.0;          ///< component multiplicity in |.|_E
};

/// E[gamma; u; s] of one mode (gamma may be empty for E[0]).
double hyperboloidal_energy(const ModeSlice& m, const std::vector<GammaPoint>& gamma = {});

/// Sum over modes.
double hyperboloidal_energy(const std::vector<ModeSlice>& modes, const std::vector<GammaPoint>& gamma = {});

/// Laurent polynomial in (t, r, mu): coefficient of t^p r^q mu^m, where
/// mu = x^1 / |x| and q may be negative.
using AxialPoly = std::map<std::array<int, 3>, double>;

/// Differential operator sum_{a,b} c_{ab}(t, r, mu) d_t^a d_r^b acting on a
/// radial field, built from words in d_t, d_1, Z_01 and the internal
/// Laplacian. These letters preserve symmetry about the x^1 axis, so every
/// word maps a radial field to a function of (t, r, mu).
class WordOperator {
 public:
  enum class Letter { T, X, Z, Lap };
  static WordOperator identity();
  /// letter o (*this); Lap multiplies by -lambda.
  WordOperator after(Letter letter, double lambda) const;
  /// d/dr and d/dmu at fixed (t, mu) and (t, r).
  WordOperator partial_r() const;
  WordOperator partial_mu() const;
  int order() const;
  /// Coefficients in mu of the image of the jet at (t, r), r > 0. Throws
  /// WindowError if the order exceeds the recorded jet order.
  std::vector<double> mu_polynomial(const Jet& jet, double t, double r) const;
  const std::map<std::pair<int, int>, AxialPoly>& terms() const { return terms_; }

 private:
  void prune();
  std::map<std::pair<int, int>, AxialPoly> terms_;
};

/// All words of length <= k over the letters.
std::vector<WordOperator> generator_words(int k, const std::vector<WordOperator::Letter>& letters, double lambda);

/// Mean of mu^j over the unit sphere S^{n-1}.
double sphere_moment(int n, int j);

/// Boosted energy E_k(s) = sum_{|I| <= k-1} E[gamma; Gamma^I u; s] over words in
/// {d_t, d_1, Z_01, Lap_K}, each integrated over the whole hyperboloid.
/// Throws WindowError for k > kJetOrder.
double boosted_energy(int k, const ModeSlice& m, const std::vector<GammaPoint>& gamma = {});

// ---------------------------------------------------------------------------
// Energy identity
// ---------------------------------------------------------------------------

/// Flux integrand of the energy identity on one slice:
/// int_{Sigma_s} [2 F u_t + 2 (d_a gamma^{ab}) d_b u u_t - (d_t gamma^{ab}) d_a u d_b u] (s/t) dx,
/// so that E(s1) = E(s2) + int_{s1}^{s2} flux ds.
double identity_flux(const ModeSlice& m, const std::vector<double>& forcing, const std::vector<GammaPoint>& gamma);

struct IdentityResidual {
  std::vector<double> s;
  std::vector<double> energy;
  std::vector<double> flux;
  std::vector<double> residual;  ///< |E(s0) - E(s_j) - int_{s0}^{s_j} flux| / max E
  double max_residual = 0.0;
};

/// Accumulates the identity on a uniform s grid (composite Simpson on pairs,
/// residual reported at even offsets from s0).
IdentityResidual energy_identity_residual(const std::vector<double>& s, const std::vector<double>& energy,
                                          const std::vector<double>& flux);

// ---------------------------------------------------------------------------
// Equivalence
// ---------------------------------------------------------------------------

struct EquivalenceResult {
  double e0 = 0.0;
  double egamma = 0.0;
  double ratio = 1.0;           ///< E[0] / E[gamma]
  double sup_t_gamma = 0.0;     ///< sup over the slice of t |gamma|_E
  bool small = true;            ///< sup_t_gamma <= kEquivalenceEpsilon
  bool within_bounds = true;    ///< ratio in [1/2, 2]
  bool conclusive() const noexcept { return small; }
};

EquivalenceResult equivalence_check(const ModeSlice& m, const std::vector<GammaPoint>& gamma);

/// gamma = delta / t * P / |P|_E for a fixed constant radial pattern P, so that
/// sup t |gamma|_E = delta.
std::vector<GammaPoint> scaled_gamma(const HyperboloidSlice& slice, const GammaPoint& pattern, double delta);

struct EquivalenceScan {
  std::vector<double> delta;
  std::vector<EquivalenceResult> results;
  double delta_star = -1.0;          ///< smallest delta with ratio outside [1/2, 2] (bisected), -1 if none
  double delta_small_limit = -1.0;   ///< largest scanned delta with the smallness flag set
  bool monotone = true;
  bool exited_while_small = false;
};

EquivalenceScan equivalence_scan(const ModeSlice& m, const GammaPoint& pattern, const std::vector<double>& deltas);

// ---------------------------------------------------------------------------
// Estimate suite
// ---------------------------------------------------------------------------

class SupportClassificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Smooth cutoff: 1 for alpha < 1, 0 for alpha > 2, quintic C^2 blend between.
double cutoff_chi(double alpha);

struct EstimateEntry {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 0.0;  ///< lhs / rhs
  bool skipped = false;   ///< 0/0
};

struct EstimateOptions {
  int order = 2;                   ///< commutation order, at most 2
  bool allow_prescribed_tail = false;
  double support_tol = 1e-8;       ///< relative level counted as nonzero
};

struct EstimateRow {
  double s = 0.0;
  bool tail = false;               ///< prescribed-tail path used
  double tail_constant = 0.0;      ///< sum_I C_I^2 measured on |x| >= t - 1
  std::vector<EstimateEntry> entries;  ///< hardy, sobolev_interior, sobolev_s, sobolev_t, l2_derivative
  const EstimateEntry& entry(const std::string& name) const;
};

/// Evaluates the inequalities on one slice for a single mode.
/// Throws SupportClassificationError if u is not supported in |x| < t - 1 and
/// no prescribed tail is allowed (or the tail does not decay).
EstimateRow estimate_suite(const ModeSlice& m, const SobolevParams& params, const EstimateOptions& opt = {});

// ---------------------------------------------------------------------------
// Decay fits
// ---------------------------------------------------------------------------

class DecayFitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DecayFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int samples = 0;
};

/// Least-squares slope of log y against log x with a residual-bootstrap 95%
/// interval (200 resamples). Requires >= 10 samples spanning a factor >= 4.
DecayFit decay_fit(const std::vector<double>& x, const std::vector<double>& y, std::uint64_t seed = 1,
                   int resamples = 200);

/// Local maxima of |y| (strict, interior), for envelope fits of oscillating series.
std::pair<std::vector<double>, std::vector<double>> envelope_peaks(const std::vector<double>& x,
                                                                   const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline constexpr const char* kReportSchema = "kkstab-report v1";

struct ReportTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ReportFit {
  std::string name;
  DecayFit fit;
  double reference = 0.0;  ///< comparison exponent
};

struct EnergyReport {
  std::string title;
  int n = 0;
  int d = 0;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, double>> reference_lines;
  std::vector<ReportTable> tables;
  std::vector<ReportFit> fits;
  std::vector<std::string> notes;

  /// Adds the beta = (n-2)/4 reference line.
  void add_beta_reference();
};

void write_report_json(std::ostream& out, const EnergyReport& r);
void write_table_csv(std::ostream& out, const ReportTable& t);

}  // namespace kkstab
