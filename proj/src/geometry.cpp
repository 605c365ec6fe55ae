#include "kkstab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

#include <fmt/format.h>

namespace kkstab {

MinkowskiDim::MinkowskiDim(int n) : n_(n) {
  if (n < 1) throw DomainError(fmt::format("Minkowski dimension must be >= 1, got {}", n));
}

bool warn_if_below_main_range(MinkowskiDim n, std::string_view operation) {
  if (n.in_main_theorem_range()) return false;
  std::cerr << fmt::format("warning: {} with n = {} is below the n >= 9 range of the "
                           "nonlinear stability result\n",
                           operation, n.value());
  return true;
}

double euclidean_norm(std::span<const double> x) {
  double acc = 0.0;
  for (double xi : x) acc += xi * xi;
  return std::sqrt(acc);
}

HyperboloidalPoint to_hyperboloidal(const CartesianPoint& p) {
  const double rx = euclidean_norm(p.x);
  if (!(p.t > rx)) {
    throw DomainError(fmt::format("point (t={}, |x|={}) is not inside the future light cone", p.t, rx));
  }
  // (t - r)(t + r) avoids cancellation near the cone.
  return {std::sqrt((p.t - rx) * (p.t + rx)), p.x};
}

CartesianPoint from_hyperboloidal(const HyperboloidalPoint& p) {
  if (!(p.s > 0.0)) throw DomainError("hyperboloidal time s must be positive");
  const double ry = euclidean_norm(p.y);
  return {std::hypot(p.s, ry), p.y};
}

double t_max_on_slice(double s) {
  if (s < 1.0) throw DomainError(fmt::format("t_max_on_slice requires s >= 1, got {}", s));
  return 0.5 * (s * s + 1.0);
}

double unit_sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

RadialGrid::RadialGrid(double dr, double r_max) : dr_(dr) {
  if (!(dr > 0.0) || !(r_max >= dr)) throw DomainError("radial grid needs 0 < dr <= r_max");
  size_ = static_cast<int>(std::floor(r_max / dr + 1e-9)) + 1;
}

HyperboloidSlice make_slice(int n, double s, const RadialGrid& grid, double r_cut) {
  if (!(s > 0.0)) throw DomainError("slice parameter s must be positive");
  HyperboloidSlice out;
  out.n = n;
  out.s = s;
  out.dr = grid.dr();
  const double area = unit_sphere_area(n);
  const int last = std::min(grid.size() - 1, static_cast<int>(std::floor(r_cut / grid.dr() + 1e-12)));
  for (int k = 0; k <= last; ++k) {
    const double r = grid.r(k);
    out.r.push_back(r);
    out.t.push_back(std::hypot(s, r));
    const double end_factor = (k == 0 || k == last) ? 0.5 : 1.0;
    out.weight.push_back(end_factor * grid.dr() * area * std::pow(r, n - 1));
  }
  return out;
}

HyperboloidSlice make_slice_inside_cone(int n, double s, const RadialGrid& grid, double margin) {
  if (!(s > margin)) throw DomainError("slice must satisfy s > cone margin");
  return make_slice(n, s, grid, (s * s - margin * margin) / (2.0 * margin));
}

double integrate(const HyperboloidSlice& slice, std::span<const double> values) {
  if (static_cast<int>(values.size()) != slice.size()) {
    throw std::invalid_argument("integrand size does not match slice");
  }
  double acc = 0.0;
  for (int k = 0; k < slice.size(); ++k) acc += slice.weight[k] * values[k];
  return acc;
}

int count_t_bound_violations(const HyperboloidSlice& slice) {
  const double s2 = slice.s * slice.s;
  int bad = 0;
  for (int k = 0; k < slice.size(); ++k) {
    const double t = slice.t[k];
    if (slice.r[k] > t - 1.0) continue;
    const double tol = 1e-12 * t * t;
    if (2.0 * t - 1.0 > s2 + tol || s2 > t * t + tol) ++bad;
  }
  return bad;
}

// ---------------------------------------------------------------------------

std::string Generator::name() const {
  switch (kind) {
    case GeneratorKind::Translation:
      return i == 0 ? "T" : fmt::format("X_{}", i);
    case GeneratorKind::Lorentz:
      return fmt::format("Z_{}{}", i, j);
    case GeneratorKind::Hyperboloidal:
      return fmt::format("Y_{}", i);
    case GeneratorKind::InternalLaplacian:
      return "Lap_K";
  }
  return "?";
}

bool Generator::annihilates_radial() const noexcept {
  switch (kind) {
    case GeneratorKind::Translation:
      return i > 1;
    case GeneratorKind::Lorentz:
      return !(i == 0 && j == 1);
    case GeneratorKind::Hyperboloidal:
      return i != 1;
    case GeneratorKind::InternalLaplacian:
      return false;
  }
  return false;
}

FieldWindow sample_window(const RadialGrid& grid, double t0, double dt, int slices,
                          double (*f)(double, double), double lambda) {
  return sample_window_fn(grid, t0, dt, slices, f, lambda);
}

namespace {

// Parity extension across r = 0, zero beyond the outer edge.
double at(const std::vector<double>& row, int k, bool odd) {
  if (k < 0) return odd ? -row[-k] : row[-k];
  if (k >= static_cast<int>(row.size())) return 0.0;
  return row[k];
}

double d_r(const std::vector<double>& row, int k, double dr, bool odd) {
  return (at(row, k + 1, odd) - at(row, k - 1, odd)) / (2.0 * dr);
}

double d_t(const FieldWindow& w, WindowPoint p) {
  if (!w.v.empty()) return w.v[p.slice][p.node];
  if (p.slice < 1 || p.slice + 1 >= w.slices()) {
    throw StencilError(fmt::format("time stencil at slice {} leaves window of {} slices", p.slice, w.slices()));
  }
  return (w.u[p.slice + 1][p.node] - w.u[p.slice - 1][p.node]) / (2.0 * w.dt);
}

}  // namespace

double apply_generator(const Generator& gen, const FieldWindow& w, WindowPoint p) {
  if (p.slice < 0 || p.slice >= w.slices() || p.node < 0 || p.node >= w.grid.size()) {
    throw StencilError(fmt::format("point ({}, {}) outside window", p.slice, p.node));
  }
  if (gen.annihilates_radial()) return 0.0;
  const auto& row = w.u[p.slice];
  const double t = w.times[p.slice];
  const double r = w.grid.r(p.node);
  switch (gen.kind) {
    case GeneratorKind::Translation:
      return gen.i == 0 ? d_t(w, p) : d_r(row, p.node, w.grid.dr(), w.odd);
    case GeneratorKind::Lorentz:
      return t * d_r(row, p.node, w.grid.dr(), w.odd) + r * d_t(w, p);
    case GeneratorKind::Hyperboloidal:
      return d_r(row, p.node, w.grid.dr(), w.odd) + (r / t) * d_t(w, p);
    case GeneratorKind::InternalLaplacian:
      return -w.lambda * row[p.node];
  }
  return 0.0;
}

FieldWindow apply_on_window(const Generator& gen, const FieldWindow& w) {
  if (w.slices() < 3) throw StencilError("apply_on_window needs at least 3 slices");
  FieldWindow out;
  out.grid = w.grid;
  out.dt = w.dt;
  out.lambda = w.lambda;
  const bool flips = !gen.annihilates_radial() && gen.kind != GeneratorKind::InternalLaplacian &&
                     !(gen.kind == GeneratorKind::Translation && gen.i == 0);
  out.odd = flips ? !w.odd : w.odd;
  for (int j = 1; j + 1 < w.slices(); ++j) {
    out.times.push_back(w.times[j]);
    std::vector<double> row(w.grid.size());
    for (int k = 0; k < w.grid.size(); ++k) row[k] = apply_generator(gen, w, {j, k});
    out.u.push_back(std::move(row));
  }
  return out;
}

namespace {

FieldWindow strip_v(FieldWindow w) {
  w.v.clear();
  return w;
}

// Max over interior points of |lhs - rhs|, where lhs has been reduced by two
// nested applications and rhs by a single application.
double max_difference(const FieldWindow& twice, const FieldWindow& once) {
  double worst = 0.0;
  const int nodes = twice.grid.size() - 3;
  for (int j = 0; j < twice.slices(); ++j) {
    for (int k = 0; k < nodes; ++k) {
      worst = std::max(worst, std::abs(twice.u[j][k] - once.u[j + 1][k]));
    }
  }
  return worst;
}

FieldWindow combine(const FieldWindow& a, const FieldWindow& b, double sign) {
  FieldWindow out = a;
  for (int j = 0; j < a.slices(); ++j)
    for (int k = 0; k < a.grid.size(); ++k) out.u[j][k] = a.u[j][k] + sign * b.u[j][k];
  return out;
}

}  // namespace

std::vector<CommutatorDefect> generator_closure_check(const std::vector<FieldWindow>& samples) {
  const Generator T = Generator::translation(0);
  const Generator X = Generator::translation(1);
  const Generator Z = Generator::lorentz(0, 1);
  const Generator L = Generator::internal_laplacian();
  struct Case {
    std::string name;
    Generator a, b;
    const Generator* expected;  // nullptr => 0
    double sign;
  };
  const std::vector<Case> cases = {
      {"[T,X_1]", T, X, nullptr, 0.0},
      {"[Z_01,T]", Z, T, &X, -1.0},
      {"[X_1,Z_01]", X, Z, &T, 1.0},
      {"[Z_01,Lap_K]", Z, L, nullptr, 0.0},
      {"[T,Lap_K]", T, L, nullptr, 0.0},
  };

  std::vector<CommutatorDefect> out;
  for (const auto& c : cases) {
    CommutatorDefect d{c.name, 0.0};
    for (const auto& raw : samples) {
      const FieldWindow w = strip_v(raw);
      if (w.slices() < 5) throw StencilError("closure check needs at least 5 slices");
      const FieldWindow ab = apply_on_window(c.a, apply_on_window(c.b, w));
      const FieldWindow ba = apply_on_window(c.b, apply_on_window(c.a, w));
      const FieldWindow bracket = combine(ab, ba, -1.0);
      FieldWindow rhs = apply_on_window(T, w);  // shape donor
      if (c.expected) {
        rhs = apply_on_window(*c.expected, w);
        for (auto& row : rhs.u)
          for (double& x : row) x *= c.sign;
      } else {
        for (auto& row : rhs.u) std::fill(row.begin(), row.end(), 0.0);
      }
      d.max_defect = std::max(d.max_defect, max_difference(bracket, rhs));
    }
    out.push_back(d);
  }
  return out;
}

}  // namespace kkstab
