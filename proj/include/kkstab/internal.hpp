#pragma once

// Spectral model of the compact internal factor: the operator
// L = -Lap - 2 Riem o acting on symmetric 2-tensors, its eigenvalues, the
// linear-stability certificate and the elliptic norm comparison on tori.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace kkstab {

/// Flat torus R^d / (L_1 Z x ... x L_d Z). Riemann vanishes, so L acts as -Lap
/// on each of the d(d+1)/2 independent tensor components.
struct FlatTorus {
  int d = 1;
  std::vector<double> periods;

  FlatTorus() = default;
  FlatTorus(int d, std::vector<double> periods);
  /// Cube torus with all periods equal.
  static FlatTorus cube(int d, double period);

  int tensor_components() const noexcept { return d * (d + 1) / 2; }
  double volume() const;
  /// Laplace eigenvalue sum_j (2 pi k_j / L_j)^2.
  double eigenvalue(const std::vector<int>& k) const;
};

struct SpectralMode {
  double lambda = 0.0;
  int multiplicity = 1;
  std::string label;
};

/// Eigenvalue list of L supplied directly, e.g. from a data file. Modes are
/// kept sorted by eigenvalue.
struct SpectralData {
  int d = 1;
  std::vector<SpectralMode> modes;

  SpectralData() = default;
  SpectralData(int d, std::vector<SpectralMode> modes);
};

using InternalModel = std::variant<FlatTorus, SpectralData>;

int internal_dimension(const InternalModel& model);

struct SpectrumEntry {
  double lambda = 0.0;
  int multiplicity = 1;
  /// Wavevector such as "k=(1,-2)" for torus modes, or the file label.
  std::string label;
};

struct ModeSpectrum {
  std::vector<SpectrumEntry> entries;
  double cutoff = 0.0;
  /// Set when the zero mode is the only retained eigenvalue.
  bool only_zero_mode = false;

  double lambda_min() const;
  int total_multiplicity() const;
  /// Entries with equal eigenvalue (to relative 1e-12) merged, labels dropped.
  std::vector<SpectrumEntry> grouped() const;
  bool contains(double lambda, double tol = 1e-10) const;
};

class SpectrumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse failure in a spectrum file; the message carries "<source>:<line>: ".
class SpectrumParseError : public SpectrumError {
 public:
  SpectrumParseError(const std::string& source, int line, const std::string& what);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Eigenvalues of L up to @p cutoff. Torus entries are one per wavevector with
/// multiplicity d(d+1)/2, sorted by (lambda, label).
/// Throws std::invalid_argument for cutoff <= 0 and SpectrumError when nothing
/// survives the cutoff.
ModeSpectrum lichnerowicz_spectrum(const InternalModel& model, double cutoff);

inline constexpr double kSpectralTolerance = 1e-10;

struct StabilityResult {
  bool stable = true;
  double lambda_min = 0.0;
};

StabilityResult is_linearly_stable(const InternalModel& model);

/// Eigenvalue list of a product K1 x K2 built from all pairwise sums, with
/// multiplicities multiplied, truncated at @p cutoff.
SpectralData product_spectrum(const ModeSpectrum& a, int d_a, const ModeSpectrum& b, int d_b,
                              double cutoff);

/// Reads the `internal-spectrum v1 d=<d>` text format.
SpectralData parse_spectral_data(std::istream& in, const std::string& source = "<stream>");
SpectralData load_spectral_data(const std::string& path);
void write_spectral_data(std::ostream& out, const SpectralData& data);

// ---------------------------------------------------------------------------
// Band-limited tensor fields on a flat torus
// ---------------------------------------------------------------------------

/// Canonical wavevectors of the real Fourier basis with max |k_j| <= band:
/// the zero vector first, then one representative of each pair {k, -k}
/// (first nonzero entry positive).
std::vector<std::vector<int>> half_space_wavevectors(int d, int band);

/// Real orthonormal basis on the torus: 1/sqrt(V), sqrt(2/V) cos(2 pi k.x/L),
/// sqrt(2/V) sin(2 pi k.x/L).
double torus_basis_cos(const FlatTorus& torus, const std::vector<int>& k,
                       const std::vector<double>& x);
double torus_basis_sin(const FlatTorus& torus, const std::vector<int>& k,
                       const std::vector<double>& x);

struct TorusModeCoefficients {
  std::vector<int> k;
  std::vector<double> cos_part;  ///< one entry per tensor component
  std::vector<double> sin_part;  ///< zero for k = 0
};

struct TorusTensorField {
  FlatTorus torus;
  std::vector<TorusModeCoefficients> modes;

  int components() const noexcept { return torus.tensor_components(); }
  double max_eigenvalue() const;
  /// sum of squared coefficients
  double coefficient_norm2() const;
  /// Point value of tensor component c.
  double value(int c, const std::vector<double>& x) const;
};

/// Random field with Gaussian coefficients on all wavevectors with
/// max |k_j| <= band.
TorusTensorField random_torus_field(const FlatTorus& torus, int band, std::uint64_t seed);

/// L^2(K) norm squared by the periodic trapezoid rule on points^d nodes.
double grid_l2_norm2(const TorusTensorField& u, int points);

struct EllipticNorms {
  double h_norm = 0.0;    ///< ||u||_{H^{2 ell}}, sum_{j <= 2 ell} ||grad^j u||^2
  double lap_norm = 0.0;  ///< ||Lap^ell u||_{L^2}
  double l2_norm = 0.0;
};

/// Norms recovered from grid samples by discrete Fourier projection.
/// Throws SpectrumError if the field carries energy above @p cutoff or if the
/// grid cannot resolve it.
EllipticNorms elliptic_norms(const TorusTensorField& u, int ell, int points, double cutoff);

struct EllipticCheck {
  int ell = 0;
  int points = 0;
  /// Measured constant: c1 = c2 = sqrt(max_draws ||u||_H^2 / (||Lap^ell u||^2 + ||u||^2)).
  double constant = 0.0;
  /// Worst ||u||_H / (c1 ||Lap^ell u|| + c2 ||u||) over the draws; <= 1 when
  /// the sandwich holds.
  double max_upper_ratio = 0.0;
  std::vector<EllipticNorms> samples;
};

EllipticCheck elliptic_equivalence_check(const FlatTorus& torus, int ell, int draws, int band,
                                         int points, double cutoff, std::uint64_t seed);

}  // namespace kkstab
