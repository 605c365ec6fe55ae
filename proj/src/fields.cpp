#include "kkstab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace kkstab {

ComponentClass TensorComponent::classify(int n) const {
  const bool a = mu <= n, b = nu <= n;
  if (a && b) return ComponentClass::Minkowski;
  if (!a && !b) return ComponentClass::Internal;
  return ComponentClass::Mixed;
}

std::string TensorComponent::label() const { return fmt::format("{}{}", mu, nu); }

std::vector<TensorComponent> all_components(int n, int d) {
  std::vector<TensorComponent> out;
  const int total = n + d + 1;
  for (int a = 0; a < total; ++a)
    for (int b = a; b < total; ++b) out.push_back({a, b});
  return out;
}

double euclidean_norm(const std::vector<TensorComponent>& comps, const std::vector<double>& values) {
  if (comps.size() != values.size()) throw std::invalid_argument("component/value size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < comps.size(); ++i) acc += comps[i].euclidean_weight() * values[i] * values[i];
  return std::sqrt(acc);
}

double internal_block_norm(const std::vector<TensorComponent>& comps, const std::vector<double>& values, int n) {
  if (comps.size() != values.size()) throw std::invalid_argument("component/value size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < comps.size(); ++i)
    if (comps[i].classify(n) == ComponentClass::Internal) acc += comps[i].euclidean_weight() * values[i] * values[i];
  return std::sqrt(acc);
}

FieldWindow ModeField::window() const {
  FieldWindow w;
  w.grid = grid;
  w.dt = dt;
  w.times = times;
  w.u = u;
  w.v = v;
  w.lambda = lambda;
  return w;
}

void ProductTensorField::validate(double cutoff) const {
  const auto spec = lichnerowicz_spectrum(model, cutoff);
  for (const auto& m : modes) {
    if (!spec.contains(m.lambda)) {
      throw SpectrumError(fmt::format("mode '{}' has lambda {} not in the internal spectrum", m.label, m.lambda));
    }
  }
}

// ---------------------------------------------------------------------------

int TinyProductGrid::torus_nodes() const {
  int total = 1;
  for (int j = 0; j < torus.d; ++j) total *= points;
  return total;
}

std::vector<double> TinyProductGrid::torus_point(int m) const {
  std::vector<double> x(torus.d);
  for (int j = torus.d - 1; j >= 0; --j) {
    x[j] = torus.periods[j] * (m % points) / points;
    m /= points;
  }
  return x;
}

double amplitude_basis(const FlatTorus& torus, const TorusBasisTag& tag, const std::vector<double>& x) {
  double p = 0.0;
  for (int j = 0; j < torus.d; ++j) p += 2.0 * std::numbers::pi * tag.k[j] * x[j] / torus.periods[j];
  return tag.sine ? std::sin(p) : std::cos(p);
}

double amplitude_basis_norm2(const FlatTorus& torus, const TorusBasisTag& tag) {
  const bool zero = std::all_of(tag.k.begin(), tag.k.end(), [](int v) { return v == 0; });
  return zero ? torus.volume() : 0.5 * torus.volume();
}

namespace {

std::string tag_label(const TorusBasisTag& tag) {
  std::string s = "k=(";
  for (std::size_t j = 0; j < tag.k.size(); ++j) s += fmt::format("{}{}", j ? "," : "", tag.k[j]);
  return s + (tag.sine ? ")s" : ")c");
}

}  // namespace

ProductTensorField mode_decompose(const TinyProductGrid& h, const RadialGrid& grid, int n, double t,
                                  double drop_below) {
  if (h.torus.d > 2) throw std::invalid_argument("tiny product grids support d <= 2");
  if (static_cast<int>(h.values.size()) != static_cast<int>(h.r.size()) || static_cast<int>(h.r.size()) != grid.size())
    throw std::invalid_argument("product grid radial size does not match the lattice");
  const int M = h.torus_nodes();
  std::vector<std::vector<double>> nodes(M);
  for (int m = 0; m < M; ++m) nodes[m] = h.torus_point(m);
  const double w = h.torus.volume() / M;

  std::vector<TorusBasisTag> tags;
  for (const auto& k : half_space_wavevectors(h.torus.d, (h.points - 1) / 2)) {
    tags.push_back({k, false});
    if (std::any_of(k.begin(), k.end(), [](int v) { return v != 0; })) tags.push_back({k, true});
  }

  std::vector<std::vector<double>> coef(tags.size(), std::vector<double>(grid.size(), 0.0));
  double biggest = 0.0;
  for (std::size_t a = 0; a < tags.size(); ++a) {
    std::vector<double> phi(M);
    for (int m = 0; m < M; ++m) phi[m] = amplitude_basis(h.torus, tags[a], nodes[m]);
    const double inv = 1.0 / amplitude_basis_norm2(h.torus, tags[a]);
    for (int k = 0; k < grid.size(); ++k) {
      double acc = 0.0;
      for (int m = 0; m < M; ++m) acc += h.values[k][m] * phi[m];
      coef[a][k] = acc * w * inv;
      biggest = std::max(biggest, std::abs(coef[a][k]));
    }
  }

  ProductTensorField out;
  out.model = h.torus;
  for (std::size_t a = 0; a < tags.size(); ++a) {
    const double peak = *std::max_element(coef[a].begin(), coef[a].end(),
                                          [](double x, double y) { return std::abs(x) < std::abs(y); });
    if (std::abs(peak) <= drop_below * biggest || peak == 0.0) continue;
    ModeField f;
    f.n = n;
    f.lambda = h.torus.eigenvalue(tags[a].k);
    f.label = tag_label(tags[a]);
    f.internal_norm2 = amplitude_basis_norm2(h.torus, tags[a]);
    f.grid = grid;
    f.times = {t};
    f.u = {coef[a]};
    out.modes.push_back(std::move(f));
    out.basis.push_back(tags[a]);
  }

  // Content the resolvable modes do not reproduce sits in the Nyquist column.
  double resid = 0.0, scale = 0.0;
  const TinyProductGrid back = mode_reconstruct(out, h.points);
  for (int k = 0; k < grid.size(); ++k)
    for (int m = 0; m < M; ++m) {
      const double rebuilt = back.values.empty() ? 0.0 : back.values[k][m];
      resid = std::max(resid, std::abs(rebuilt - h.values[k][m]));
      scale = std::max(scale, std::abs(h.values[k][m]));
    }
  if (scale > 0.0 && resid > 1e-10 * scale) {
    throw AliasingError(fmt::format("field has content at or above the internal Nyquist limit "
                                    "(unresolved residual {:.3e} of {:.3e})",
                                    resid, scale));
  }
  return out;
}

TinyProductGrid mode_reconstruct(const ProductTensorField& f, int points, int slice) {
  const auto* torus = std::get_if<FlatTorus>(&f.model);
  if (!torus) throw std::invalid_argument("reconstruction needs a flat-torus model");
  if (f.basis.size() != f.modes.size()) throw std::invalid_argument("torus basis tags missing");
  TinyProductGrid out;
  out.torus = *torus;
  out.points = points;
  const int M = out.torus_nodes();
  if (f.modes.empty()) return out;
  const RadialGrid& grid = f.modes.front().grid;
  for (int k = 0; k < grid.size(); ++k) out.r.push_back(grid.r(k));
  out.values.assign(grid.size(), std::vector<double>(M, 0.0));
  for (std::size_t a = 0; a < f.modes.size(); ++a) {
    std::vector<double> phi(M);
    for (int m = 0; m < M; ++m) phi[m] = amplitude_basis(*torus, f.basis[a], out.torus_point(m));
    const auto& row = f.modes[a].u.at(slice);
    for (int k = 0; k < grid.size(); ++k)
      for (int m = 0; m < M; ++m) out.values[k][m] += row[k] * phi[m];
  }
  return out;
}

// ---------------------------------------------------------------------------

int interpolation_stencil(const std::vector<double>& times, double dt, double tau, int order,
                          std::vector<double>& w) {
  if (order != 1 && order != 3) throw std::invalid_argument("interpolation order must be 1 or 3");
  const int N = static_cast<int>(times.size());
  if (N < order + 1) throw WindowError("not enough stored slices for interpolation");
  const double t0 = times.front();
  const double slack = 1e-9 * dt;
  if (tau < t0 - slack || tau > times.back() + slack) {
    throw WindowError(fmt::format("time {} outside stored window [{}, {}]", tau, t0, times.back()));
  }
  int j0 = static_cast<int>(std::floor((tau - t0) / dt));
  const int start = std::clamp(order == 3 ? j0 - 1 : j0, 0, N - order - 1);
  w.assign(order + 1, 1.0);
  for (int i = 0; i <= order; ++i) {
    const double ti = t0 + (start + i) * dt;
    for (int j = 0; j <= order; ++j) {
      if (j == i) continue;
      const double tj = t0 + (start + j) * dt;
      w[i] *= (tau - tj) / (ti - tj);
    }
  }
  return start;
}

namespace {

double radial_derivative(const std::vector<double>& row, int k, double dr) {
  const int last = static_cast<int>(row.size()) - 1;
  if (k == 0) return 0.0;
  const double right = k < last ? row[k + 1] : 0.0;
  return (right - row[k - 1]) / (2.0 * dr);
}

}  // namespace

HyperboloidProfile sample_on_hyperboloid(const ModeField& f, const HyperboloidSlice& slice, int order) {
  if (f.v.size() != f.u.size()) throw std::invalid_argument("hyperboloid sampling needs d_t u on every slice");
  if (slice.size() > f.grid.size()) throw WindowError("slice extends past the radial lattice");
  HyperboloidProfile out;
  out.u.resize(slice.size());
  out.dt_u.resize(slice.size());
  out.y_u.resize(slice.size());
  std::vector<double> w;
  const double dr = f.grid.dr();
  for (int k = 0; k < slice.size(); ++k) {
    const double tau = slice.t[k];
    const double r = slice.r[k];
    const int start = interpolation_stencil(f.times, f.dt, tau, order, w);
    double u = 0.0, v = 0.0, y = 0.0;
    for (int i = 0; i <= order; ++i) {
      const int j = start + i;
      const double vj = f.v[j][k];
      u += w[i] * f.u[j][k];
      v += w[i] * vj;
      y += w[i] * (radial_derivative(f.u[j], k, dr) + (r / f.times[j]) * vj);
    }
    out.u[k] = u;
    out.dt_u[k] = v;
    out.y_u[k] = y;
  }
  return out;
}

double internal_sobolev_norm(double lambda, double coeff, double basis_norm2, int ell) {
  if (ell < 0) throw std::invalid_argument("Sobolev order must be nonnegative");
  double weight = 0.0;
  for (int j = 0; j <= ell; ++j) weight += std::pow(lambda, j);
  return std::sqrt(weight * basis_norm2) * std::abs(coeff);
}

double internal_sobolev_norm(const ProductTensorField& f, int slice, int node, int ell) {
  double acc = 0.0;
  for (const auto& m : f.modes) {
    const double x = internal_sobolev_norm(m.lambda, m.u.at(slice).at(node), m.internal_norm2, ell);
    acc += x * x;
  }
  return std::sqrt(acc);
}

double l2_sigma_k_norm2(const ProductTensorField& f, const HyperboloidSlice& slice, int order) {
  double acc = 0.0;
  for (const auto& m : f.modes) {
    const auto prof = sample_on_hyperboloid(m, slice, order);
    std::vector<double> sq(prof.u.size());
    for (std::size_t k = 0; k < sq.size(); ++k) sq[k] = prof.u[k] * prof.u[k];
    acc += m.internal_norm2 * integrate(slice, sq);
  }
  return acc;
}

// ---------------------------------------------------------------------------

void write_snapshot(std::ostream& out, const ModeField& f) {
  out << kFieldMagic << '\n';
  out << fmt::format("n {}\nlambda {:.17g}\nlabel {}\ninternal_norm2 {:.17g}\n", f.n, f.lambda,
                     f.label.empty() ? "-" : f.label, f.internal_norm2);
  out << fmt::format("dt {:.17g}\ndr {:.17g}\nnodes {}\n", f.dt, f.grid.dr(), f.grid.size());
  const double t0 = f.times.empty() ? 0.0 : f.times.front();
  const double t1 = f.times.empty() ? 0.0 : f.times.back();
  out << fmt::format("t_range {:.17g} {:.17g}\nslices {}\nhas_v {}\nsupport {:.17g}\ntimes", t0, t1, f.slices(),
                     f.v.empty() ? 0 : 1, f.support_radius);
  for (double t : f.times) out << fmt::format(" {:.17g}", t);
  out << "\ndata\n";
  auto dump = [&](const std::vector<std::vector<double>>& rows) {
    for (const auto& row : rows) {
      for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << fmt::format("{:.17g}", row[k]);
      out << '\n';
    }
  };
  dump(f.u);
  if (!f.v.empty()) dump(f.v);
}

namespace {

template <class T>
T read_key(std::istream& in, const char* key) {
  std::string k;
  T value{};
  if (!(in >> k) || k != key || !(in >> value)) {
    throw std::runtime_error(fmt::format("snapshot: expected key '{}'", key));
  }
  return value;
}

}  // namespace

ModeField read_snapshot(std::istream& in) {
  std::string magic;
  std::getline(in, magic);
  if (magic != kFieldMagic) throw std::runtime_error(fmt::format("snapshot: bad magic '{}'", magic));
  ModeField f;
  f.n = read_key<int>(in, "n");
  f.lambda = read_key<double>(in, "lambda");
  f.label = read_key<std::string>(in, "label");
  if (f.label == "-") f.label.clear();
  f.internal_norm2 = read_key<double>(in, "internal_norm2");
  f.dt = read_key<double>(in, "dt");
  const double dr = read_key<double>(in, "dr");
  const int nodes = read_key<int>(in, "nodes");
  std::string key;
  double t0 = 0.0, t1 = 0.0;
  if (!(in >> key) || key != "t_range" || !(in >> t0 >> t1)) throw std::runtime_error("snapshot: expected t_range");
  const int slices = read_key<int>(in, "slices");
  const int has_v = read_key<int>(in, "has_v");
  f.support_radius = read_key<double>(in, "support");
  if (nodes < 2 || slices < 0) throw std::runtime_error("snapshot: bad dimensions");
  if (!(in >> key) || key != "times") throw std::runtime_error("snapshot: expected times");
  f.times.resize(slices);
  for (double& t : f.times)
    if (!(in >> t)) throw std::runtime_error("snapshot: truncated times");
  if (!(in >> key) || key != "data") throw std::runtime_error("snapshot: expected data");
  f.grid = RadialGrid(dr, dr * (nodes - 1));
  if (f.grid.size() != nodes) throw std::runtime_error("snapshot: node count does not match dr");
  auto load = [&](std::vector<std::vector<double>>& rows) {
    rows.assign(slices, std::vector<double>(nodes));
    for (auto& row : rows)
      for (double& x : row)
        if (!(in >> x)) throw std::runtime_error("snapshot: truncated payload");
  };
  load(f.u);
  if (has_v) load(f.v);
  return f;
}

}  // namespace kkstab
