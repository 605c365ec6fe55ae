#pragma once

// Reference solver for the linear wave equation on R^3 x S^1 that works on the
// full product lattice instead of per-mode radial problems. Used to validate
// mode assembly.

#include <functional>
#include <vector>

#include "kkstab/fields.hpp"

namespace kkstab {

struct FullGridConfig {
  double dr = 1.0 / 128.0;
  double dt = 1.0 / 1024.0;
  double r_max = 24.0;
  int torus_points = 8;    ///< even
  double period = 1.0;
  double causal_margin = 1.0;
};

/// h(r, theta) for radially symmetric data on R^3 times a circle.
using ProductProfile = std::function<double(double r, double theta)>;

/// Solves (-d_t^2 + Lap_{R^3} + d_theta^2) h = 0 through w = r h, which obeys
/// the 1+1 wave equation in r with w odd about r = 0. Radial derivatives are
/// sixth-order centred differences, theta derivatives use the spectral
/// differentiation matrix on the lattice, time stepping is RK4.
class FullGridWave3 {
 public:
  FullGridWave3(const FullGridConfig& cfg, double t_start, const ProductProfile& h0, const ProductProfile& h1,
                double support);

  /// Advances to @p t with whole steps; throws std::invalid_argument if t is
  /// not a whole number of steps ahead.
  void advance_to(double t);
  double time() const noexcept { return t_; }

  /// Current h on the lattice (values[k][m], r_k = k dr, theta_m = m L / N).
  TinyProductGrid snapshot() const;

 private:
  void rhs(const std::vector<double>& w, const std::vector<double>& v, std::vector<double>& dw,
           std::vector<double>& dv, int kmax) const;
  int active_nodes() const;

  FullGridConfig cfg_;
  int K_ = 0, N_ = 0;
  double t_ = 0.0, t0_ = 0.0, support_ = 0.0;
  std::vector<double> d2theta_;  // N x N
  std::vector<double> w_, v_;    // w[k * N + m]
};

}  // namespace kkstab
