#include "kkstab/internal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

namespace kkstab {

FlatTorus::FlatTorus(int d_, std::vector<double> periods_) : d(d_), periods(std::move(periods_)) {
  if (d < 1) throw std::invalid_argument("torus dimension must be positive");
  if (static_cast<int>(periods.size()) != d) throw std::invalid_argument("torus needs one period per dimension");
  for (double L : periods)
    if (!(L > 0.0) || !std::isfinite(L)) throw std::invalid_argument("torus periods must be positive");
}

FlatTorus FlatTorus::cube(int d, double period) { return FlatTorus(d, std::vector<double>(d, period)); }

double FlatTorus::volume() const {
  double v = 1.0;
  for (double L : periods) v *= L;
  return v;
}

double FlatTorus::eigenvalue(const std::vector<int>& k) const {
  double lam = 0.0;
  for (int j = 0; j < d; ++j) {
    const double w = 2.0 * std::numbers::pi * k[j] / periods[j];
    lam += w * w;
  }
  return lam;
}

SpectralData::SpectralData(int d_, std::vector<SpectralMode> modes_) : d(d_), modes(std::move(modes_)) {
  if (d < 1) throw SpectrumError("spectral data needs d >= 1");
  for (const auto& m : modes) {
    if (!std::isfinite(m.lambda)) throw SpectrumError("eigenvalue is not finite");
    if (m.multiplicity < 1) throw SpectrumError("multiplicity must be positive");
  }
  std::stable_sort(modes.begin(), modes.end(),
                   [](const SpectralMode& a, const SpectralMode& b) { return a.lambda < b.lambda; });
}

int internal_dimension(const InternalModel& model) {
  return std::visit([](const auto& m) { return m.d; }, model);
}

double ModeSpectrum::lambda_min() const {
  if (entries.empty()) throw SpectrumError("empty spectrum has no minimum");
  return entries.front().lambda;
}

int ModeSpectrum::total_multiplicity() const {
  int total = 0;
  for (const auto& e : entries) total += e.multiplicity;
  return total;
}

std::vector<SpectrumEntry> ModeSpectrum::grouped() const {
  std::vector<SpectrumEntry> out;
  for (const auto& e : entries) {
    if (!out.empty() && std::abs(out.back().lambda - e.lambda) <= 1e-12 * std::max(1.0, std::abs(e.lambda))) {
      out.back().multiplicity += e.multiplicity;
    } else {
      out.push_back({e.lambda, e.multiplicity, {}});
    }
  }
  return out;
}

bool ModeSpectrum::contains(double lambda, double tol) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const SpectrumEntry& e) { return std::abs(e.lambda - lambda) <= tol * std::max(1.0, std::abs(lambda)); });
}

SpectrumParseError::SpectrumParseError(const std::string& source, int line, const std::string& what)
    : SpectrumError(fmt::format("{}:{}: {}", source, line, what)), line_(line) {}

namespace {

std::string wavevector_label(const std::vector<int>& k) {
  std::string s = "k=(";
  for (std::size_t j = 0; j < k.size(); ++j) s += fmt::format("{}{}", j ? "," : "", k[j]);
  return s + ")";
}

void enumerate_torus(const FlatTorus& torus, double cutoff, std::vector<int>& k, int axis,
                     double partial, std::vector<SpectrumEntry>& out) {
  if (axis == torus.d) {
    out.push_back({torus.eigenvalue(k), torus.tensor_components(), wavevector_label(k)});
    return;
  }
  const double unit = 2.0 * std::numbers::pi / torus.periods[axis];
  const int kmax = static_cast<int>(std::floor(std::sqrt(std::max(0.0, cutoff - partial)) / unit + 1e-9));
  for (int kj = -kmax; kj <= kmax; ++kj) {
    const double next = partial + (unit * kj) * (unit * kj);
    if (next > cutoff * (1.0 + 1e-14)) continue;
    k[axis] = kj;
    enumerate_torus(torus, cutoff, k, axis + 1, next, out);
  }
}

}  // namespace

ModeSpectrum lichnerowicz_spectrum(const InternalModel& model, double cutoff) {
  if (!(cutoff > 0.0)) throw std::invalid_argument("spectral cutoff must be positive");
  ModeSpectrum spec;
  spec.cutoff = cutoff;
  if (const auto* torus = std::get_if<FlatTorus>(&model)) {
    std::vector<int> k(torus->d, 0);
    enumerate_torus(*torus, cutoff, k, 0, 0.0, spec.entries);
    std::sort(spec.entries.begin(), spec.entries.end(), [](const SpectrumEntry& a, const SpectrumEntry& b) {
      return a.lambda != b.lambda ? a.lambda < b.lambda : a.label < b.label;
    });
  } else {
    for (const auto& m : std::get<SpectralData>(model).modes)
      if (m.lambda <= cutoff) spec.entries.push_back({m.lambda, m.multiplicity, m.label});
  }
  if (spec.entries.empty()) {
    throw SpectrumError(fmt::format("no eigenvalue below cutoff {}", cutoff));
  }
  spec.only_zero_mode = std::all_of(spec.entries.begin(), spec.entries.end(),
                                    [](const SpectrumEntry& e) { return std::abs(e.lambda) <= kSpectralTolerance; });
  return spec;
}

StabilityResult is_linearly_stable(const InternalModel& model) {
  if (std::holds_alternative<FlatTorus>(model)) return {true, 0.0};
  const auto& data = std::get<SpectralData>(model);
  if (data.modes.empty()) throw SpectrumError("spectral data has no modes");
  const double lmin = data.modes.front().lambda;
  return {lmin >= -kSpectralTolerance, lmin};
}

SpectralData product_spectrum(const ModeSpectrum& a, int d_a, const ModeSpectrum& b, int d_b, double cutoff) {
  std::vector<SpectralMode> modes;
  for (const auto& x : a.entries)
    for (const auto& y : b.entries) {
      const double lam = x.lambda + y.lambda;
      if (lam <= cutoff) modes.push_back({lam, x.multiplicity * y.multiplicity, x.label + "+" + y.label});
    }
  return SpectralData(d_a + d_b, std::move(modes));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& tok, double& out) {
  std::size_t used = 0;
  try {
    out = std::stod(tok, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == tok.size() && std::isfinite(out);
}

bool parse_int(const std::string& tok, long long& out) {
  std::size_t used = 0;
  try {
    out = std::stoll(tok, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == tok.size();
}

}  // namespace

SpectralData parse_spectral_data(std::istream& in, const std::string& source) {
  std::string raw;
  int line_no = 0;
  int d = -1;
  std::vector<SpectralMode> modes;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (d < 0) {
      long long dv = 0;
      if (tok.size() != 3 || tok[0] != "internal-spectrum" || tok[1] != "v1" || tok[2].rfind("d=", 0) != 0 ||
          !parse_int(tok[2].substr(2), dv) || dv < 1) {
        throw SpectrumParseError(source, line_no, "expected header 'internal-spectrum v1 d=<d>'");
      }
      d = static_cast<int>(dv);
      continue;
    }
    if (tok.size() < 2) throw SpectrumParseError(source, line_no, "expected 'lambda multiplicity [label]'");
    SpectralMode m;
    if (!parse_double(tok[0], m.lambda)) throw SpectrumParseError(source, line_no, fmt::format("bad eigenvalue '{}'", tok[0]));
    long long mult = 0;
    if (!parse_int(tok[1], mult) || mult < 1 || mult > 1'000'000'000)
      throw SpectrumParseError(source, line_no, fmt::format("bad multiplicity '{}'", tok[1]));
    m.multiplicity = static_cast<int>(mult);
    if (tok.size() > 3) throw SpectrumParseError(source, line_no, "label must be a single token");
    if (tok.size() == 3) m.label = tok[2];
    modes.push_back(std::move(m));
  }
  if (d < 0) throw SpectrumParseError(source, line_no, "missing header line");
  if (modes.empty()) throw SpectrumParseError(source, line_no, "no spectral records");
  return SpectralData(d, std::move(modes));
}

SpectralData load_spectral_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpectrumError(fmt::format("cannot open spectrum file '{}'", path));
  return parse_spectral_data(in, path);
}

void write_spectral_data(std::ostream& out, const SpectralData& data) {
  out << fmt::format("internal-spectrum v1 d={}\n", data.d);
  for (const auto& m : data.modes) {
    out << fmt::format("{:.17g} {}", m.lambda, m.multiplicity);
    if (!m.label.empty()) out << ' ' << m.label;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

std::vector<std::vector<int>> half_space_wavevectors(int d, int band) {
  std::vector<std::vector<int>> out;
  std::vector<int> k(d, -band);
  const int side = 2 * band + 1;
  int total = 1;
  for (int j = 0; j < d; ++j) total *= side;
  out.push_back(std::vector<int>(d, 0));
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    for (int j = d - 1; j >= 0; --j) {
      k[j] = rem % side - band;
      rem /= side;
    }
    const auto first = std::find_if(k.begin(), k.end(), [](int v) { return v != 0; });
    if (first != k.end() && *first > 0) out.push_back(k);
  }
  return out;
}

namespace {

double phase(const FlatTorus& torus, const std::vector<int>& k, const std::vector<double>& x) {
  double p = 0.0;
  for (int j = 0; j < torus.d; ++j) p += 2.0 * std::numbers::pi * k[j] * x[j] / torus.periods[j];
  return p;
}

bool is_zero(const std::vector<int>& k) {
  return std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
}

}  // namespace

double torus_basis_cos(const FlatTorus& torus, const std::vector<int>& k, const std::vector<double>& x) {
  if (is_zero(k)) return 1.0 / std::sqrt(torus.volume());
  return std::sqrt(2.0 / torus.volume()) * std::cos(phase(torus, k, x));
}

double torus_basis_sin(const FlatTorus& torus, const std::vector<int>& k, const std::vector<double>& x) {
  if (is_zero(k)) return 0.0;
  return std::sqrt(2.0 / torus.volume()) * std::sin(phase(torus, k, x));
}

double TorusTensorField::max_eigenvalue() const {
  double m = 0.0;
  for (const auto& mode : modes) m = std::max(m, torus.eigenvalue(mode.k));
  return m;
}

double TorusTensorField::coefficient_norm2() const {
  double acc = 0.0;
  for (const auto& mode : modes) {
    for (double c : mode.cos_part) acc += c * c;
    for (double c : mode.sin_part) acc += c * c;
  }
  return acc;
}

double TorusTensorField::value(int c, const std::vector<double>& x) const {
  double acc = 0.0;
  for (const auto& mode : modes) {
    acc += mode.cos_part[c] * torus_basis_cos(torus, mode.k, x);
    if (!mode.sin_part.empty()) acc += mode.sin_part[c] * torus_basis_sin(torus, mode.k, x);
  }
  return acc;
}

TorusTensorField random_torus_field(const FlatTorus& torus, int band, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  TorusTensorField u;
  u.torus = torus;
  const int comps = torus.tensor_components();
  for (auto& k : half_space_wavevectors(torus.d, band)) {
    TorusModeCoefficients m;
    m.k = k;
    m.cos_part.resize(comps);
    m.sin_part.assign(comps, 0.0);
    const bool zero = is_zero(k);
    for (int c = 0; c < comps; ++c) {
      m.cos_part[c] = N(rng);
      if (!zero) m.sin_part[c] = N(rng);
    }
    u.modes.push_back(std::move(m));
  }
  return u;
}

namespace {

// Visits every node of the uniform points^d lattice on the torus.
template <class F>
void for_each_node(const FlatTorus& torus, int points, F&& f) {
  int total = 1;
  for (int j = 0; j < torus.d; ++j) total *= points;
  std::vector<double> x(torus.d);
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    for (int j = torus.d - 1; j >= 0; --j) {
      x[j] = torus.periods[j] * (rem % points) / points;
      rem /= points;
    }
    f(x);
  }
}

double node_weight(const FlatTorus& torus, int points) {
  return torus.volume() / std::pow(static_cast<double>(points), torus.d);
}

}  // namespace

double grid_l2_norm2(const TorusTensorField& u, int points) {
  double acc = 0.0;
  for_each_node(u.torus, points, [&](const std::vector<double>& x) {
    for (int c = 0; c < u.components(); ++c) {
      const double v = u.value(c, x);
      acc += v * v;
    }
  });
  return acc * node_weight(u.torus, points);
}

EllipticNorms elliptic_norms(const TorusTensorField& u, int ell, int points, double cutoff) {
  if (ell < 1 || ell > 4) throw std::invalid_argument("elliptic check supports 1 <= ell <= 4");
  int band = 0;
  for (const auto& m : u.modes)
    for (int kj : m.k) band = std::max(band, std::abs(kj));
  if (2 * band >= points) {
    throw SpectrumError(fmt::format("grid of {} points cannot resolve wavenumber {}", points, band));
  }
  // Sample the field, then project on every resolvable basis function.
  std::vector<std::vector<double>> nodes;
  std::vector<std::vector<double>> samples;
  for_each_node(u.torus, points, [&](const std::vector<double>& x) {
    nodes.push_back(x);
    std::vector<double> vals(u.components());
    for (int c = 0; c < u.components(); ++c) vals[c] = u.value(c, x);
    samples.push_back(std::move(vals));
  });
  const double w = node_weight(u.torus, points);
  const double total = u.coefficient_norm2();
  EllipticNorms out;
  double h2 = 0.0, lap2 = 0.0, l22 = 0.0;
  for (const auto& k : half_space_wavevectors(u.torus.d, (points - 1) / 2)) {
    const double lam = u.torus.eigenvalue(k);
    double energy = 0.0;
    for (int c = 0; c < u.components(); ++c) {
      double a = 0.0, b = 0.0;
      for (std::size_t p = 0; p < nodes.size(); ++p) {
        a += samples[p][c] * torus_basis_cos(u.torus, k, nodes[p]);
        b += samples[p][c] * torus_basis_sin(u.torus, k, nodes[p]);
      }
      energy += (a * a + b * b) * w * w;
    }
    // Projections at the level of sampling round-off are not field content.
    if (energy <= 1e-28 * total) continue;
    if (lam > cutoff && energy > 1e-20 * std::max(1.0, total)) {
      throw SpectrumError(fmt::format("field has energy {:.3e} at lambda {:.6g} above cutoff {}", energy, lam, cutoff));
    }
    double weight = 0.0;
    for (int j = 0; j <= 2 * ell; ++j) weight += std::pow(lam, j);
    h2 += weight * energy;
    lap2 += std::pow(lam, 2 * ell) * energy;
    l22 += energy;
  }
  out.h_norm = std::sqrt(h2);
  out.lap_norm = std::sqrt(lap2);
  out.l2_norm = std::sqrt(l22);
  return out;
}

EllipticCheck elliptic_equivalence_check(const FlatTorus& torus, int ell, int draws, int band, int points,
                                         double cutoff, std::uint64_t seed) {
  EllipticCheck out;
  out.ell = ell;
  out.points = points;
  std::mt19937_64 seeder(seed);
  double worst = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto u = random_torus_field(torus, band, seeder());
    auto norms = elliptic_norms(u, ell, points, cutoff);
    const double denom = norms.lap_norm * norms.lap_norm + norms.l2_norm * norms.l2_norm;
    if (denom > 0.0) worst = std::max(worst, norms.h_norm * norms.h_norm / denom);
    out.samples.push_back(norms);
  }
  out.constant = std::sqrt(worst);
  for (const auto& s : out.samples) {
    const double rhs = out.constant * (s.lap_norm + s.l2_norm);
    if (rhs > 0.0) out.max_upper_ratio = std::max(out.max_upper_ratio, s.h_norm / rhs);
  }
  return out;
}

}  // namespace kkstab
