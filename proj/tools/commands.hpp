#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace kkstab::app {

/// Thrown for invalid option combinations detected after parsing (exit 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string output = "kkstab-out";
  int workers = 1;
  std::uint64_t seed = 1;
};

struct ModelOptions {
  int torus_dim = 1;
  std::vector<double> periods{1.0};
  std::string spectrum_file;
};

struct SpectrumOptions {
  ModelOptions model;
  double cutoff = 100.0;
};

struct EvolveOptions {
  ModelOptions model;
  int n = 9;
  std::vector<double> lambdas{0.0};
  double t_start = 4.0;
  double t_end = 100.0;
  double dr = 1.0 / 64;
  double cfl = 0.4;
  double r_max = 0.0;  ///< 0 selects t_end + radius + 8
  double amplitude = 1.0;
  double radius = 2.0;
  double history_every = 10.0;
  double fit_from = 20.0;
  std::string nonlinearity = "linear";
  double epsilon = 0.0;
  double epsilon_max = 1e-2;
};

struct EnergyOptions {
  ModelOptions model;
  int n = 9;
  double lambda = 0.0;
  double s_min = 5.0;
  double s_max = 20.0;
  double s_step = 0.5;
  double dr = 1.0 / 64;
  double cfl = 0.4;
  double amplitude = 1.0;
  double radius = 2.0;
  int boost_order = 2;
  bool estimates = true;
};

struct SchwarzschildOptions {
  int n = 9;
  double c_s = 0.1;
  std::string variant = "harmonic";
  int order = 2;
  double r_min = 20.0;
  double r_max = 200.0;
  int points = 16;
};

struct GeodesicCliOptions {
  int n = 9;
  double c_s = 0.05;
  int order = 2;
  std::vector<double> r0{10.0};
  double t0 = 12.0;
  double stop_radius = 1e3;
  double lambda_end = 1e6;
  bool perturbed = false;
};

struct VerifyOptions {
  std::string suite = "trivial";
  std::vector<std::string> only;
};

/// Output directory holding every artifact of one run.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root);
  /// Writes @p name through @p body; the file is replaced atomically.
  void write(const std::string& name, const std::function<void(std::ostream&)>& body) const;
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
};

// Each runner writes its artifacts and returns the process exit code.
int run_spectrum(const GlobalOptions& g, const SpectrumOptions& o, const OutputDir& out);
int run_evolve(const GlobalOptions& g, const EvolveOptions& o, const OutputDir& out);
int run_energy(const GlobalOptions& g, const EnergyOptions& o, const OutputDir& out);
int run_schwarzschild(const GlobalOptions& g, const SchwarzschildOptions& o, const OutputDir& out);
int run_geodesic(const GlobalOptions& g, const GeodesicCliOptions& o, const OutputDir& out);
int run_verify(const GlobalOptions& g, const VerifyOptions& o, const OutputDir& out, std::ostream& log);

}  // namespace kkstab::app
