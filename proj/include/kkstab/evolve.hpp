#pragma once

/// @file evolve.hpp
/// @brief Radial Klein-Gordon evolution by the method of lines, slice
/// observers (history, monitor, hyperboloid jet recorder) and the assembled
/// linear product evolution.

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "kkstab/fields.hpp"
#include "kkstab/geometry.hpp"
#include "kkstab/internal.hpp"

namespace kkstab {

class EvolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Nonlinearity { Linear, QuasilinearToy };

/// Radial profile pair (u, d_t u) at t_start, supported in r <= support.
struct InitialData {
  std::function<double(double)> u0;
  std::function<double(double)> v0;
  double support = 2.0;
};

/// amplitude * (1 - (r/radius)^2)^6 for r < radius, zero outside; v0 = 0.
InitialData bump_data(double amplitude = 1.0, double radius = 2.0);
/// Same profile with d_t u set to its negative radial derivative, which
/// launches a predominantly outgoing pulse.
InitialData outgoing_bump_data(double amplitude = 1.0, double radius = 2.0);

struct EvolutionConfig {
  int n = 9;
  InternalModel model = FlatTorus::cube(1, 1.0);
  double dr = 1.0 / 64.0;
  double dt = 0.4 / 64.0;
  double r_max = 200.0;
  double t_start = 4.0;
  double t_end = 20.0;
  /// Earliest time the history must reach; below t_start the data are evolved
  /// backwards first.
  double t_begin = 4.0;
  Nonlinearity nonlinearity = Nonlinearity::Linear;
  double epsilon = 0.0;
  double epsilon_max = 1e-2;
  /// Nodes further than this beyond the causal support bound are held at 0.
  double causal_margin = 4.0;
  /// Steps between support checks and monitor rows.
  int check_stride = 100;

  RadialGrid grid() const { return RadialGrid(dr, r_max); }
  /// Throws EvolutionError when a field is out of range.
  void validate(double initial_support) const;
};

/// Per-step observer of one scalar field.
class SliceObserver {
 public:
  virtual ~SliceObserver() = default;
  /// @p u and @p v cover the full lattice; entries past @p active are zero.
  virtual void on_slice(double t, const std::vector<double>& u, const std::vector<double>& v, int active) = 0;
  virtual void on_finish() {}
};

/// Finite-volume radial Laplacian on a uniform lattice with exact shell volumes.
/// (L u)_0 reduces to 2n (u_1 - u_0) / dr^2, the regular limit n u''(0).
class RadialLaplacian {
 public:
  RadialLaplacian(int n, const RadialGrid& grid);
  /// out[k] = (L u)[k] for k < count; u beyond the lattice is zero.
  void apply(const double* u, double* out, int count) const;
  double dr() const noexcept { return dr_; }
  int size() const noexcept { return static_cast<int>(inv_volume_.size()); }
  /// Shell volume of cell k divided by |S^{n-1}|.
  double volume(int k) const noexcept { return 1.0 / inv_volume_[k]; }
  /// Face area factor r_{k+1/2}^{n-1}.
  double face(int k) const noexcept { return face_[k]; }

 private:
  double dr_;
  std::vector<double> face_;        // r_{k+1/2}^{n-1} / dr
  std::vector<double> inv_volume_;  // 1 / V_k
};

/// Row written to the monitor CSV.
struct MonitorRow {
  double t = 0.0;
  double sup_norm = 0.0;
  double support_radius = 0.0;
  double cfl_margin = 0.0;
  double flat_energy = 0.0;
};

/// Classical RK4 evolution of d_t^2 u = L u - lambda u (+ optional source).
class RadialKG {
 public:
  RadialKG(int n, double lambda, const RadialGrid& grid, double dt);

  void set_state(double t, std::vector<double> u, std::vector<double> v, double support);
  void initialize(double t, const InitialData& data);
  /// Optional forcing term: acceleration += source(t, r).
  void set_source(std::function<double(double, double)> source) { source_ = std::move(source); }
  void set_causal_margin(double m) noexcept { margin_ = m; }
  /// Reverses the time direction of subsequent steps.
  void set_backward(bool b) noexcept { backward_ = b; }

  void step();
  double time() const noexcept { return t_; }
  const std::vector<double>& u() const noexcept { return u_; }
  const std::vector<double>& v() const noexcept { return v_; }
  int active() const noexcept { return active_; }
  double dt() const noexcept { return dt_; }
  double lambda() const noexcept { return lambda_; }
  const RadialLaplacian& laplacian() const noexcept { return lap_; }
  const RadialGrid& grid() const noexcept { return grid_; }

  /// Discrete conserved energy sum V(v^2 + lambda u^2) + sum face (du)^2 / dr,
  /// times |S^{n-1}| / 2.
  double flat_energy() const;
  double sup_norm() const;
  /// Largest r with |u| or |v| above rel_tol times their maxima.
  double measured_support(double rel_tol = 1e-6) const;
  /// Causal bound R0 + |t - t0| used to size the active region.
  double causal_support() const noexcept { return support0_ + std::abs(t_ - t_support0_); }

 private:
  void rhs(const std::vector<double>& u, const std::vector<double>& v, double t, std::vector<double>& du,
           std::vector<double>& dv, int count) const;
  void update_active();

  int n_;
  double lambda_;
  RadialGrid grid_;
  RadialLaplacian lap_;
  double dt_;
  double t_ = 0.0;
  double support0_ = 0.0;
  double t_support0_ = 0.0;
  double margin_ = 4.0;
  bool backward_ = false;
  int active_ = 0;
  std::vector<double> u_, v_;
  std::vector<double> ku_[4], kv_[4], tu_, tv_;
  std::function<double(double, double)> source_;
};

struct RunSummary {
  double t_final = 0.0;
  long long steps = 0;
  std::vector<MonitorRow> monitor;
  std::vector<double> u, v;
};

/// Evolves one mode from cfg.t_start (after a backward leg to cfg.t_begin when
/// t_begin < t_start) up to cfg.t_end, calling observers on every slice of the
/// forward leg. Throws EvolutionError on NaN or support escape.
RunSummary evolve_kg_radial(double lambda, const InitialData& init, const EvolutionConfig& cfg,
                            const std::vector<SliceObserver*>& observers = {});

/// Stores every @p stride-th slice into a ModeField (for short runs).
class HistoryRecorder : public SliceObserver {
 public:
  HistoryRecorder(int n, double lambda, const RadialGrid& grid, double dt, int stride = 1,
                  double t_from = -1e300, double t_to = 1e300);
  void on_slice(double t, const std::vector<double>& u, const std::vector<double>& v, int active) override;
  const ModeField& field() const noexcept { return field_; }
  ModeField& field() noexcept { return field_; }

 private:
  ModeField field_;
  int stride_;
  long long count_ = 0;
  double t_from_, t_to_;
};

/// Samples values at fixed radii over time.
class ProbeRecorder : public SliceObserver {
 public:
  ProbeRecorder(const RadialGrid& grid, std::vector<double> radii, int stride = 1);
  void on_slice(double t, const std::vector<double>& u, const std::vector<double>& v, int active) override;
  std::vector<double> times;
  std::vector<std::vector<double>> values;  ///< values[probe][sample]

 private:
  std::vector<int> nodes_;
  int stride_;
  long long count_ = 0;
};

/// Samples u along the outgoing ray t - r = q. Once t >= t_from, every
/// stride-th slice contributes the value at the node nearest r = t - q.
class RetardedProbeRecorder : public SliceObserver {
 public:
  RetardedProbeRecorder(const RadialGrid& grid, double q, int stride = 1, double t_from = -1e300);
  void on_slice(double t, const std::vector<double>& u, const std::vector<double>& v, int active) override;
  std::vector<double> times;
  std::vector<double> radii;
  std::vector<double> values;

 private:
  RadialGrid grid_;
  double q_, t_from_;
  int stride_;
  long long count_ = 0;
};

/// Tracks sup_r |u| over time.
class SupNormRecorder : public SliceObserver {
 public:
  explicit SupNormRecorder(int stride = 1) : stride_(stride) {}
  void on_slice(double t, const std::vector<double>& u, const std::vector<double>& v, int active) override;
  std::vector<double> times;
  std::vector<double> sup;

 private:
  int stride_;
  long long count_ = 0;
};

// ---------------------------------------------------------------------------
// Hyperboloid jets
// ---------------------------------------------------------------------------

/// Highest total derivative order recorded on hyperboloids.
inline constexpr int kJetOrder = 4;
/// Number of (a, b) with a + b <= kJetOrder.
inline constexpr int kJetSize = (kJetOrder + 1) * (kJetOrder + 2) / 2;
/// Position of d_t^a d_r^b in a jet array.
constexpr int jet_index(int a, int b) {
  const int m = a + b;
  return m * (m + 1) / 2 + a;
}
using Jet = std::array<double, kJetSize>;

/// Derivatives d_t^a d_r^b u (a + b <= 4) at the nodes of one hyperboloid.
struct SliceJets {
  HyperboloidSlice slice;
  std::vector<Jet> jet;
  int filled = 0;  ///< nodes recorded so far (nodes are filled in order of t)
  bool complete() const noexcept { return filled == slice.size(); }
};

/// Streams the evolution and records jets on a set of hyperboloids.
///
/// Each slice is cut at r <= R0 + |t - t_start| + 0.5, past which the field is
/// identically zero. Radial derivatives are fourth-order centred differences
/// (even extension at r = 0), time derivatives are centred differences of d_t u,
/// and values are moved to t = sqrt(s^2 + r^2) by cubic Lagrange interpolation.
class HyperboloidRecorder : public SliceObserver {
 public:
  HyperboloidRecorder(int n, const RadialGrid& grid, double dt, std::vector<double> s_values, double support0,
                      double t_start);
  void on_slice(double t, const std::vector<double>& u, const std::vector<double>& v, int active) override;
  void on_finish() override;

  const std::vector<SliceJets>& slices() const noexcept { return slices_; }
  /// Throws WindowError if slice @p i was not fully covered by the run.
  const SliceJets& slice(int i) const;
  int count() const noexcept { return static_cast<int>(slices_.size()); }
  double first_time() const noexcept { return t_first_; }

 private:
  void process(int newest);
  int ring(int j) const noexcept { return ((j % kWindow) + kWindow) % kWindow; }

  static constexpr int kWindow = 9;
  RadialGrid grid_;
  double dt_;
  std::vector<SliceJets> slices_;
  std::vector<std::vector<double>> ring_u_, ring_v_;
  std::vector<double> ring_t_;
  long long received_ = 0;
  double t_first_ = 0.0;
};

/// Feeds an analytic field f(t, r), with d_t f given by ft, to a fresh
/// recorder on slices starting at t = min(s) - 1/2 until every hyperboloid is
/// complete. Throws WindowError if that needs more than a few steps past the
/// last slice time.
std::unique_ptr<HyperboloidRecorder> record_analytic_field(int n, const RadialGrid& grid, double dt,
                                                           std::vector<double> s_values,
                                                           const std::function<double(double, double)>& f,
                                                           const std::function<double(double, double)>& ft,
                                                           double support0, double t_start);

/// Slice cut used by the recorder: r_cut(s) for data supported in r <= R0 at t0.
double recorder_cut_radius(double s, double support0, double t_start, double r_max);

// ---------------------------------------------------------------------------
// Linear product evolution
// ---------------------------------------------------------------------------

struct ModeInit {
  double lambda = 0.0;
  std::string label;
  double internal_norm2 = 1.0;
  InitialData data;
};

/// Creates the observers of one mode; the returned objects stay owned by the
/// caller-visible ModeRun.
using ObserverFactory = std::function<std::vector<std::unique_ptr<SliceObserver>>(const ModeInit&)>;

struct ModeRun {
  ModeInit init;
  RunSummary summary;
  std::vector<std::unique_ptr<SliceObserver>> observers;
};

/// Runs independent per-mode evolutions on a bounded worker pool.
/// Throws SpectrumError if a mode eigenvalue is absent from the model spectrum.
std::vector<ModeRun> evolve_linearized_product(const EvolutionConfig& cfg, const std::vector<ModeInit>& modes,
                                               const ObserverFactory& factory, int workers = 1);

/// Calls body(i) for i < count on up to @p workers threads.
void parallel_for(int count, int workers, const std::function<void(int)>& body);

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

void write_manifest(std::ostream& out, const EvolutionConfig& cfg, const std::vector<ModeInit>& modes);
void write_monitor_csv(std::ostream& out, const std::vector<MonitorRow>& rows);

}  // namespace kkstab
