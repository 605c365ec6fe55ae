#pragma once

/// @file geometry.hpp
/// @brief Minkowski coordinates, hyperboloidal slicing and the Lorentz
/// generators acting on radially symmetric gridded fields.
///
/// Radial fields u(t, r) are evaluated on the positive x^1 axis, i.e. at
/// x = r e_1. On that axis every generator has an exact radial expression:
///   X_1 -> d_r,   Z_{01} -> t d_r + r d_t,   Y_1 -> d_r + (r/t) d_t,
/// while X_i, Z_{0i}, Y_i (i > 1) and all rotations Z_{ij} vanish.

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kkstab {

/// Raised when a point or slice lies outside the domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a finite-difference stencil leaves the stored data.
class StencilError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Spatial dimension of the Minkowski factor.
class MinkowskiDim {
 public:
  explicit MinkowskiDim(int n);
  int value() const noexcept { return n_; }
  /// True when n >= 9, the range covered by the nonlinear stability result.
  bool in_main_theorem_range() const noexcept { return n_ >= 9; }

 private:
  int n_;
};

/// Emits a warning on stderr when @p n is below the main-theorem range.
/// Returns true if a warning was written.
bool warn_if_below_main_range(MinkowskiDim n, std::string_view operation);

struct CartesianPoint {
  double t = 0.0;
  std::vector<double> x;
};

struct HyperboloidalPoint {
  double s = 0.0;
  std::vector<double> y;
};

double euclidean_norm(std::span<const double> x);

/// (t, x) -> (s, y) with s = sqrt(t^2 - |x|^2), y = x. Requires t > |x|.
HyperboloidalPoint to_hyperboloidal(const CartesianPoint& p);
/// Inverse: t = sqrt(s^2 + |y|^2).
CartesianPoint from_hyperboloidal(const HyperboloidalPoint& p);

/// Time at which the hyperboloid of parameter s meets the cone |x| = t - 1.
double t_max_on_slice(double s);

/// Area of the unit sphere S^{n-1} in R^n.
double unit_sphere_area(int n);

/// Uniform radial lattice r_k = k dr, k = 0..size-1.
class RadialGrid {
 public:
  RadialGrid(double dr, double r_max);
  double dr() const noexcept { return dr_; }
  int size() const noexcept { return size_; }
  double r(int k) const noexcept { return dr_ * k; }
  double r_max() const noexcept { return dr_ * (size_ - 1); }

 private:
  double dr_;
  int size_;
};

/// Radially reduced hyperboloid Sigma_s with flat quadrature weights.
///
/// Nodes are the radial lattice points r_k <= r_cut; t_k = sqrt(s^2 + r_k^2).
/// weight_k integrates f(r) d^n x by the trapezoid rule with the factor
/// |S^{n-1}| r^{n-1}. The normal co-vector is n_0 = 1, n_r = -r/t.
struct HyperboloidSlice {
  int n = 0;
  double s = 0.0;
  double dr = 0.0;
  std::vector<double> r;
  std::vector<double> t;
  std::vector<double> weight;

  int size() const noexcept { return static_cast<int>(r.size()); }
  double normal_radial(int k) const noexcept { return -r[k] / t[k]; }
  /// Largest t among the nodes.
  double t_last() const noexcept { return t.empty() ? s : t.back(); }
};

/// Builds Sigma_s over the lattice nodes with r_k <= r_cut.
HyperboloidSlice make_slice(int n, double s, const RadialGrid& grid,
                            double r_cut);

/// Slice truncated at the cone |x| = t - margin: r_cut = (s^2 - margin^2) /
/// (2 margin).
HyperboloidSlice make_slice_inside_cone(int n, double s, const RadialGrid& grid,
                                        double margin = 1.0);

/// Quadrature of a nodal integrand over a slice.
double integrate(const HyperboloidSlice& slice, std::span<const double> values);

/// Checks 2t - 1 <= s^2 <= t^2 on every node with r <= t - 1.
/// Returns the number of violating nodes.
int count_t_bound_violations(const HyperboloidSlice& slice);

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

enum class GeneratorKind {
  Translation,     ///< X_i, i = 0..n (X_0 = T)
  Lorentz,         ///< Z_{ij}, 0 <= i < j <= n
  Hyperboloidal,   ///< Y_i, i = 1..n
  InternalLaplacian
};

struct Generator {
  GeneratorKind kind = GeneratorKind::Translation;
  int i = 0;
  int j = 0;

  static Generator translation(int i) { return {GeneratorKind::Translation, i, 0}; }
  static Generator lorentz(int i, int j) { return {GeneratorKind::Lorentz, i, j}; }
  static Generator hyperboloidal(int i) { return {GeneratorKind::Hyperboloidal, i, 0}; }
  static Generator internal_laplacian() { return {GeneratorKind::InternalLaplacian, 0, 0}; }

  std::string name() const;
  /// True if the generator acts as zero on radial data on the x^1 axis.
  bool annihilates_radial() const noexcept;
};

/// Field values on a window of consecutive uniform time slices.
///
/// u[j][k] = u(times[j], r_k). If v is non-empty it holds d_t u on the same
/// slices and time derivatives are taken from it; otherwise from u.
struct FieldWindow {
  RadialGrid grid{1.0, 1.0};
  double dt = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> u;
  std::vector<std::vector<double>> v;
  /// Eigenvalue of the internal operator carried by the field.
  double lambda = 0.0;
  /// Parity under r -> -r used for the extension across the axis; X_1, Z_01
  /// and Y_1 map even data to odd data.
  bool odd = false;

  int slices() const noexcept { return static_cast<int>(u.size()); }
};

/// Samples an analytic radial function onto a window.
FieldWindow sample_window(const RadialGrid& grid, double t0, double dt,
                          int slices, double (*f)(double t, double r),
                          double lambda = 0.0);

/// Generic callable variant of sample_window.
template <class F>
FieldWindow sample_window_fn(const RadialGrid& grid, double t0, double dt,
                             int slices, F&& f, double lambda = 0.0) {
  FieldWindow w;
  w.grid = grid;
  w.dt = dt;
  w.lambda = lambda;
  for (int j = 0; j < slices; ++j) {
    const double t = t0 + j * dt;
    w.times.push_back(t);
    std::vector<double> row(grid.size());
    for (int k = 0; k < grid.size(); ++k) row[k] = f(t, grid.r(k));
    w.u.push_back(std::move(row));
  }
  return w;
}

/// Point of a window: slice index and radial node.
struct WindowPoint {
  int slice = 0;
  int node = 0;
};

/// First-order generator applied by centred second-order differences.
/// Rotations and off-axis generators return exactly 0.
/// Throws StencilError if the time stencil leaves the window.
double apply_generator(const Generator& gen, const FieldWindow& w,
                       WindowPoint p);

/// Applies a generator to all interior slices of a window; the result has two
/// fewer slices (one fewer on each side) and no v.
FieldWindow apply_on_window(const Generator& gen, const FieldWindow& w);

/// Result of one commutator test [A, B] u = (expected combination) u.
struct CommutatorDefect {
  std::string pair;
  double max_defect = 0.0;
};

/// Checks the brackets of the radially meaningful subalgebra
/// {T, X_1, Z_01, internal Laplacian} on sampled test fields.
std::vector<CommutatorDefect> generator_closure_check(
    const std::vector<FieldWindow>& samples);

}  // namespace kkstab
