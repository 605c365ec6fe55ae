#pragma once

// Quasilinear toy system: three radial components (h_tt, h_tr, h_rr) coupled
// through the inverse metric (eta + eps h)^{-1} and the quadratic Q term, plus
// monitors for the commuted source terms.

#include <array>
#include <vector>

#include "kkstab/energy.hpp"
#include "kkstab/evolve.hpp"
#include "kkstab/geometry.hpp"

namespace kkstab {

enum ToyComponent { kTT = 0, kTR = 1, kRR = 2 };
inline constexpr int kToyComponents = 3;

using Sym2 = std::array<double, 3>;  // (tt, tr, rr) of a symmetric 2x2 matrix

/// Exact inverse of eta + eps h in the (t, r) plane, eta = diag(-1, 1).
Sym2 toy_inverse_metric(const Sym2& h, double eps);
/// Inverse-metric perturbation to second order: H = -eta h eta + eps eta h eta h eta,
/// so that (eta + eps h)^{-1} = eta + eps H + O(eps^3).
Sym2 toy_inverse_perturbation(const Sym2& h, double eps);

/// gamma = eps H(h) in the radial (a, b, c, e) form with first derivatives,
/// from h and its derivatives dh[0] = d_t h, dh[1] = d_r h.
GammaPoint toy_gamma_point(const Sym2& h, const std::array<Sym2, 2>& dh, double eps);

/// Q_{mu nu}[g](dg, dg) in D dimensions. ginv is row-major D x D and
/// dg[(c * D + a) * D + b] = d_c g_{ab}. Returns Q row-major D x D.
std::vector<double> nonlinear_q(int D, const std::vector<double>& ginv, const std::vector<double>& dg);

/// Q for the toy: g = eta + eps h with derivative data dh[c] (c = 0: d_t, 1: d_r),
/// evaluated with the exact inverse metric and d g replaced by d h.
Sym2 toy_q(const Sym2& h, const std::array<Sym2, 2>& dh, double eps);

/// Largest |dr/dt| of the characteristics of (eta + eps H)^{ab} d_a d_b.
double toy_characteristic_speed(const Sym2& h, double eps);

struct ToyMonitorRow {
  double t = 0.0;
  double sup_norm = 0.0;
  double cfl = 0.0;  ///< c_max dt / dr
};

struct ToyRunResult {
  bool completed = false;
  double blowup_time = -1.0;
  double t_final = 0.0;
  double initial_sup = 0.0;
  double max_cfl = 0.0;
  std::vector<ToyMonitorRow> monitor;
  std::array<std::vector<double>, kToyComponents> u, v;
};

/// Evolves the toy from cfg.t_start to cfg.t_end. Requires a flat-torus model
/// and cfg.nonlinearity == QuasilinearToy. Each component has its own list of
/// observers. Blow-up (sup beyond 10x the initial sup) stops the run and is
/// reported; a CFL violation against the perturbed speed throws.
ToyRunResult evolve_quasilinear_toy(const EvolutionConfig& cfg, const std::array<InitialData, kToyComponents>& init,
                                    const std::array<std::vector<SliceObserver*>, kToyComponents>& observers = {});

// ---------------------------------------------------------------------------
// Commuted sources
// ---------------------------------------------------------------------------

/// Source monitors on the centre slice of a window, one entry per radial node.
struct SourceTerms {
  int first_node = 0;  ///< nodes below this are left at zero (axis stencils)
  std::array<std::vector<double>, kToyComponents> f1;  ///< Z^I Q
  std::array<std::vector<double>, kToyComponents> f2;  ///< internal curvature coupling
  std::array<std::vector<double>, kToyComponents> f3;  ///< [Z^I, H d d] h
  std::array<std::vector<double>, kToyComponents> g;   ///< (d_a gamma^{ab}) d_b Z^I h
  /// max over nodes of |G| / (|dH|_E |d Z^I h|_E), gamma = eps H.
  double g_constant = 0.0;
};

/// Applies the generator word @p word (length <= 2, radial generators only)
/// to the toy windows (centre slices aligned) and evaluates the sources.
/// Throws WindowError if the windows are too short for the word.
SourceTerms commuted_sources(const std::array<FieldWindow, kToyComponents>& h, const std::vector<Generator>& word,
                             int n, double eps);

/// Minimum number of slices commuted_sources needs for a word of length @p order.
int commuted_sources_depth(int order);

}  // namespace kkstab
