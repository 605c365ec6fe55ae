#pragma once

// Named verification suites shared by `kkstab verify` and the acceptance
// test binary.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace kkstab::verify {

struct SuiteOptions {
  int workers = 1;
  std::uint64_t seed = 1;
  /// Check ids to run; empty runs every check of the suite.
  std::vector<std::string> only;
};

struct CheckResult {
  std::string id;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;  ///< wall time; kept out of written artifacts
  std::vector<std::pair<std::string, double>> metrics;
};

/// "trivial" and "acceptance".
std::vector<std::string> suite_names();
bool has_suite(const std::string& name);

/// Ids and titles of the checks in a suite, in run order.
std::vector<std::pair<std::string, std::string>> suite_checks(const std::string& suite);

/// Runs the selected checks. Exceptions inside a check turn into a failed
/// result carrying the message. Throws std::invalid_argument for an unknown
/// suite or check id.
std::vector<CheckResult> run_suite(const std::string& suite, const SuiteOptions& opt);

/// "PASS c07 title: detail" style line (no timing).
std::string format_result(const CheckResult& r);

}  // namespace kkstab::verify
