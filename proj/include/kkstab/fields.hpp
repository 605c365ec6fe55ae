#pragma once

/// @file fields.hpp
/// @brief Mode-expanded symmetric 2-tensor fields on R^{1+n} x K: radial mode
/// histories, pointwise and integral norms, decomposition of tiny product grids
/// into internal Fourier modes, and interpolation onto hyperboloids.

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kkstab/geometry.hpp"
#include "kkstab/internal.hpp"

namespace kkstab {

/// Raised when a requested time lies outside the stored slices.
class WindowError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Raised when a product-grid field has content the internal grid cannot
/// represent.
class AliasingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ComponentClass { Minkowski, Mixed, Internal };

/// Index pair (mu, nu) of a symmetric tensor on R^{1+n} x K^d; indices
/// 0..n are Minkowski, n+1..n+d internal.
struct TensorComponent {
  int mu = 0;
  int nu = 0;

  ComponentClass classify(int n) const;
  /// Multiplicity in the contraction with g_E: 1 on the diagonal, 2 off it.
  double euclidean_weight() const noexcept { return mu == nu ? 1.0 : 2.0; }
  std::string label() const;
};

/// All (n+d+1)(n+d+2)/2 independent components, mu <= nu.
std::vector<TensorComponent> all_components(int n, int d);

/// |h|_E = (sum_{mu,nu} h_{mu nu}^2)^{1/2} in Cartesian coordinates, where
/// g_E = eta + 2 dt^2 is the identity.
double euclidean_norm(const std::vector<TensorComponent>& comps, const std::vector<double>& values);

/// Norm of the internal block only, measured with the flat internal metric.
double internal_block_norm(const std::vector<TensorComponent>& comps, const std::vector<double>& values,
                           int n);

/// A scalar mode u^lambda(t, r) stored on consecutive uniform time slices.
/// Holds a window of the evolution, or a full history for small runs.
struct ModeField {
  int n = 3;
  double lambda = 0.0;
  std::string label;
  /// ||basis function||^2_{L^2(K)} of the internal factor this mode multiplies.
  double internal_norm2 = 1.0;
  RadialGrid grid{1.0, 1.0};
  double dt = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> u;
  std::vector<std::vector<double>> v;  ///< d_t u, may be empty
  double support_radius = 0.0;

  int slices() const noexcept { return static_cast<int>(u.size()); }
  /// Converts to the generator window type (shares no storage).
  FieldWindow window() const;
};

/// Internal basis function attached to a torus mode.
struct TorusBasisTag {
  std::vector<int> k;
  bool sine = false;
};

/// Sum of modes on a common lattice, each tagged with its internal eigenvalue.
struct ProductTensorField {
  InternalModel model = FlatTorus::cube(1, 1.0);
  std::vector<ModeField> modes;
  /// Torus basis labels, parallel to modes (empty for spectral-data models).
  std::vector<TorusBasisTag> basis;

  /// Throws SpectrumError if a mode eigenvalue is absent from the model
  /// spectrum below @p cutoff.
  void validate(double cutoff) const;
};

// ---------------------------------------------------------------------------
// Tiny full product grid (oracle path, torus with d <= 2)
// ---------------------------------------------------------------------------

/// Values h(r_k, theta) on a tensor-product lattice with @p points uniform
/// nodes per torus direction; values[k][m] with m the flattened torus index
/// (last direction fastest).
struct TinyProductGrid {
  FlatTorus torus;
  int points = 8;
  std::vector<double> r;
  std::vector<std::vector<double>> values;

  int torus_nodes() const;
  std::vector<double> torus_point(int m) const;
};

/// Internal basis in amplitude normalization: 1, cos(2 pi k.x/L), sin(2 pi k.x/L).
double amplitude_basis(const FlatTorus& torus, const TorusBasisTag& tag, const std::vector<double>& x);
/// ||amplitude basis||^2 in L^2(K): V for k = 0, V/2 otherwise.
double amplitude_basis_norm2(const FlatTorus& torus, const TorusBasisTag& tag);

/// Projects every radial node onto the torus Fourier modes resolvable on the
/// grid. Each output mode holds one slice at time @p t. Coefficients of
/// negligible modes (below @p drop_below times the largest) are omitted.
/// Throws AliasingError if the Nyquist column carries content.
ProductTensorField mode_decompose(const TinyProductGrid& h, const RadialGrid& grid, int n, double t,
                                  double drop_below = 1e-14);

/// Evaluates a mode expansion back on the product lattice, slice @p slice.
TinyProductGrid mode_reconstruct(const ProductTensorField& f, int points, int slice = 0);

// ---------------------------------------------------------------------------
// Hyperboloid sampling and norms
// ---------------------------------------------------------------------------

struct HyperboloidProfile {
  std::vector<double> u;
  std::vector<double> dt_u;
  std::vector<double> y_u;  ///< Y_1 u = d_r u + (r/t) d_t u on the x^1 axis
};

/// Interpolates u, d_t u and Y_1 u from stored slices to t_k = sqrt(s^2 + r_k^2).
/// Radial derivatives are taken on each slice, then interpolated.
/// @p order is 1 (linear) or 3 (cubic Lagrange on four slices).
/// Requires v; throws WindowError if a node time is outside the stored window.
HyperboloidProfile sample_on_hyperboloid(const ModeField& u, const HyperboloidSlice& slice, int order = 3);

/// Lagrange interpolation weights for the stencil around @p tau; returns the
/// first slice index and fills @p w with order+1 weights.
int interpolation_stencil(const std::vector<double>& times, double dt, double tau, int order,
                          std::vector<double>& w);

/// sum_j lambda^j for j <= ell, times |c|^2 times the basis norm, square root.
double internal_sobolev_norm(double lambda, double coeff, double basis_norm2, int ell);

/// H^ell(K) norm of a mode expansion at one spacetime point.
double internal_sobolev_norm(const ProductTensorField& f, int slice, int node, int ell);

/// ||u||^2_{L^2(Sigma_s x K)} = sum_modes basis_norm2 * int_{Sigma_s} |u^lambda|^2 dx.
double l2_sigma_k_norm2(const ProductTensorField& f, const HyperboloidSlice& slice, int order = 3);

// ---------------------------------------------------------------------------
// Snapshot files
// ---------------------------------------------------------------------------

inline constexpr const char* kFieldMagic = "kkstab-field v1";

void write_snapshot(std::ostream& out, const ModeField& f);
ModeField read_snapshot(std::istream& in);

}  // namespace kkstab
