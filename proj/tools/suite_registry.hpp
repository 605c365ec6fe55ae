#pragma once

#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "suites.hpp"

namespace kkstab::verify {

/// Collects expectations and metrics while a check runs.
class Check {
 public:
  /// Records a failed expectation; the first failures go into the detail line.
  bool expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
    return ok;
  }
  template <class... Args>
  void note(fmt::format_string<Args...> f, Args&&... args) {
    notes_.push_back(fmt::format(f, std::forward<Args>(args)...));
  }
  void metric(const std::string& name, double value) { metrics_.emplace_back(name, value); }

  bool ok() const noexcept { return failures_.empty(); }
  std::string detail() const;
  const std::vector<std::pair<std::string, double>>& metrics() const noexcept { return metrics_; }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
  std::vector<std::pair<std::string, double>> metrics_;
};

struct CheckDef {
  std::string id;
  std::string title;
  std::function<void(Check&, const SuiteOptions&)> run;
};

std::vector<CheckDef> trivial_checks();
std::vector<CheckDef> acceptance_checks();

}  // namespace kkstab::verify
