#include <algorithm>
#include <cctype>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "commands.hpp"
#include "kkstab/internal.hpp"
#include "kkstab/schwarzschild.hpp"

#ifndef KKSTAB_VERSION
#define KKSTAB_VERSION "unknown"
#endif

namespace {

using namespace kkstab::app;

constexpr int kExitUsage = 2;

std::string env_name(const std::string& key) {
  std::string out = "KKSTAB_";
  for (char c : key) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

/// Adds --key bound to @p value, readable from the config file and from KKSTAB_KEY.
template <class T>
CLI::Option* option(CLI::App* app, const std::string& key, T& value, const std::string& help) {
  return app->add_option("--" + key, value, help)->envname(env_name(key))->capture_default_str();
}

CLI::Option* flag(CLI::App* app, const std::string& key, bool& value, const std::string& help) {
  return app->add_flag("--" + key, value, help)->envname(env_name(key));
}

void model_options(CLI::App* app, ModelOptions& m) {
  option(app, "torus-dim", m.torus_dim, "dimension d of the internal flat torus");
  option(app, "period", m.periods, "torus periods (one value is used for every direction)");
  option(app, "spectrum-file", m.spectrum_file, "internal-spectrum v1 file replacing the torus")
      ->check(CLI::Validator(
          [](std::string& path) { return path.empty() ? std::string() : CLI::ExistingFile(path); }, "FILE"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kkstab: numerical laboratory for Kaluza-Klein product spacetime stability", "kkstab"};
  app.set_version_flag("--version", std::string("kkstab ") + KKSTAB_VERSION);
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.set_config("--config", "", "INI configuration; [section] names match subcommands");
  app.require_subcommand(1);

  GlobalOptions global;
  std::string output;
  option(&app, "output", output, "output directory (default kkstab-out/<subcommand>)");
  option(&app, "workers", global.workers, "size of the worker pool")->check(CLI::Range(1, 1024));
  option(&app, "seed", global.seed, "seed for every randomized step");

  SpectrumOptions spectrum;
  auto* sp = app.add_subcommand("spectrum", "eigenvalues of the internal operator and linear stability");
  model_options(sp, spectrum.model);
  option(sp, "cutoff", spectrum.cutoff, "largest eigenvalue kept");

  EvolveOptions evolve;
  auto* ev = app.add_subcommand("evolve", "evolve Klein-Gordon modes of the linearized product problem");
  model_options(ev, evolve.model);
  option(ev, "n", evolve.n, "spatial dimension of the non-compact factor");
  option(ev, "lambda", evolve.lambdas, "internal eigenvalues to evolve");
  option(ev, "t-start", evolve.t_start, "time of the initial data");
  option(ev, "t-end", evolve.t_end, "final time");
  option(ev, "dr", evolve.dr, "radial spacing");
  option(ev, "cfl", evolve.cfl, "dt / dr");
  option(ev, "r-max", evolve.r_max, "outer radius (0 picks t-end + radius + 8)");
  option(ev, "amplitude", evolve.amplitude, "amplitude of the bump data");
  option(ev, "radius", evolve.radius, "support radius of the bump data");
  option(ev, "history-every", evolve.history_every, "time between slices in the history dump");
  option(ev, "fit-from", evolve.fit_from, "first time used in decay fits");
  option(ev, "nonlinearity", evolve.nonlinearity, "linear or toy")->check(CLI::IsMember({"linear", "toy"}));
  option(ev, "epsilon", evolve.epsilon, "coupling of the quasilinear toy");
  option(ev, "epsilon-max", evolve.epsilon_max, "largest accepted epsilon");

  EnergyOptions energy;
  auto* en = app.add_subcommand("energy", "hyperboloidal energies, boosted energies and estimate constants");
  model_options(en, energy.model);
  option(en, "n", energy.n, "spatial dimension of the non-compact factor");
  option(en, "lambda", energy.lambda, "internal eigenvalue of the mode");
  option(en, "s-min", energy.s_min, "first hyperboloid");
  option(en, "s-max", energy.s_max, "last hyperboloid");
  option(en, "s-step", energy.s_step, "spacing of the hyperboloids");
  option(en, "dr", energy.dr, "radial spacing");
  option(en, "cfl", energy.cfl, "dt / dr");
  option(en, "amplitude", energy.amplitude, "amplitude of the bump data");
  option(en, "radius", energy.radius, "support radius of the bump data");
  option(en, "boost-order", energy.boost_order, "highest boosted energy E_k");
  option(en, "estimates", energy.estimates, "evaluate the Hardy and Sobolev ratios");

  SchwarzschildOptions schw;
  auto* sc = app.add_subcommand("schwarzschild", "decay of the harmonic-gauge Schwarzschild metric");
  option(sc, "n", schw.n, "spatial dimension");
  option(sc, "c-s", schw.c_s, "mass parameter");
  option(sc, "variant", schw.variant, "harmonic or literal")->check(CLI::IsMember({"harmonic", "literal"}));
  option(sc, "order", schw.order, "series order of the harmonic chart");
  option(sc, "r-min", schw.r_min, "smallest sample radius");
  option(sc, "r-max", schw.r_max, "largest sample radius");
  option(sc, "points", schw.points, "number of log-spaced radii");

  GeodesicCliOptions geo;
  auto* gd = app.add_subcommand("geodesic", "radial null geodesics in harmonic Schwarzschild");
  option(gd, "n", geo.n, "spatial dimension");
  option(gd, "c-s", geo.c_s, "mass parameter");
  option(gd, "order", geo.order, "series order of the harmonic chart");
  option(gd, "r0", geo.r0, "launch radii");
  option(gd, "t0", geo.t0, "launch time");
  option(gd, "stop-radius", geo.stop_radius, "stop once |x| reaches this radius");
  option(gd, "lambda-end", geo.lambda_end, "largest affine parameter");
  flag(gd, "perturbed", geo.perturbed, "request the perturbed metric (not supported)");

  VerifyOptions verify;
  auto* vf = app.add_subcommand("verify", "run a verification suite");
  option(vf, "suite", verify.suite, "trivial or acceptance");
  option(vf, "only", verify.only, "check ids to run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  global.output = output.empty() ? "kkstab-out/" + sub->get_name() : output;
  try {
    const OutputDir out(global.output);
    out.write("config.ini", [&](std::ostream& os) {
      os << "output=\"" << global.output << "\"\n";
      os << "workers=" << global.workers << '\n';
      os << "seed=" << global.seed << '\n';
      os << '[' << sub->get_name() << "]\n";
      os << app.get_config_formatter_base()->to_config(sub, true, false, "");
    });
    out.write("VERSION", [&](std::ostream& os) { os << "kkstab " << KKSTAB_VERSION << '\n'; });
    int code = 0;
    const std::string name = sub->get_name();
    if (name == "spectrum") code = run_spectrum(global, spectrum, out);
    if (name == "evolve") code = run_evolve(global, evolve, out);
    if (name == "energy") code = run_energy(global, energy, out);
    if (name == "schwarzschild") code = run_schwarzschild(global, schw, out);
    if (name == "geodesic") code = run_geodesic(global, geo, out);
    if (name == "verify") code = run_verify(global, verify, out, std::cout);
    std::cout << fmt::format("kkstab {}: artifacts in {}\n", name, out.root().string());
    return code;
  } catch (const kkstab::SpectrumError& e) {
    std::cerr << "kkstab: error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "kkstab: error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "kkstab: error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "kkstab: failure: " << e.what() << '\n';
    return 1;
  }
}
