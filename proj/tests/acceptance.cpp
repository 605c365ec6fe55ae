// Runs the acceptance suite and prints one PASS/FAIL line per criterion.
// Usage: kkstab_acceptance [check-id ...]

#include <cstdio>
#include <exception>

#include "suites.hpp"

int main(int argc, char** argv) {
  kkstab::verify::SuiteOptions opt;
  for (int i = 1; i < argc; ++i) opt.only.emplace_back(argv[i]);
  try {
    const auto results = kkstab::verify::run_suite("acceptance", opt);
    int failed = 0;
    for (const auto& r : results) {
      std::printf("%s (%.1f s)\n", kkstab::verify::format_result(r).c_str(), r.seconds);
      std::fflush(stdout);
      if (!r.passed) ++failed;
    }
    std::printf("%zu criteria, %d failed\n", results.size(), failed);
    return failed == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kkstab_acceptance: %s\n", e.what());
    return 2;
  }
}
