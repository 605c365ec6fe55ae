#include <algorithm>
#include <chrono>
#include <exception>
#include <stdexcept>

#include "kkstab/evolve.hpp"
#include "suite_registry.hpp"

namespace kkstab::verify {

std::string Check::detail() const {
  std::string out;
  auto append = [&](const std::string& s) {
    if (!out.empty()) out += "; ";
    out += s;
  };
  for (const auto& f : failures_) append("FAILED " + f);
  for (const auto& n : notes_) append(n);
  return out;
}

namespace {

std::vector<CheckDef> checks_of(const std::string& suite) {
  if (suite == "trivial") return trivial_checks();
  if (suite == "acceptance") return acceptance_checks();
  throw std::invalid_argument("unknown suite '" + suite + "' (expected trivial or acceptance)");
}

}  // namespace

std::vector<std::string> suite_names() { return {"trivial", "acceptance"}; }

bool has_suite(const std::string& name) {
  const auto names = suite_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::vector<std::pair<std::string, std::string>> suite_checks(const std::string& suite) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& c : checks_of(suite)) out.emplace_back(c.id, c.title);
  return out;
}

std::vector<CheckResult> run_suite(const std::string& suite, const SuiteOptions& opt) {
  const auto all = checks_of(suite);
  std::vector<const CheckDef*> selected;
  for (const auto& id : opt.only) {
    const bool known = std::any_of(all.begin(), all.end(), [&](const CheckDef& c) { return c.id == id; });
    if (!known) throw std::invalid_argument("suite '" + suite + "' has no check '" + id + "'");
  }
  for (const auto& c : all) {
    if (opt.only.empty() || std::find(opt.only.begin(), opt.only.end(), c.id) != opt.only.end())
      selected.push_back(&c);
  }

  std::vector<CheckResult> results(selected.size());
  // With several workers the checks themselves share the pool and each
  // check runs its inner work serially, so the thread count stays bounded.
  SuiteOptions inner = opt;
  if (selected.size() > 1 && opt.workers > 1) inner.workers = 1;
  parallel_for(static_cast<int>(selected.size()), selected.size() > 1 ? opt.workers : 1, [&](int i) {
    const auto& def = *selected[static_cast<std::size_t>(i)];
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    bool threw = false;
    std::string message;
    try {
      def.run(check, inner);
    } catch (const std::exception& e) {
      threw = true;
      message = e.what();
    }
    auto& r = results[static_cast<std::size_t>(i)];
    r.id = def.id;
    r.title = def.title;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.passed = !threw && check.ok();
    r.detail = threw ? "exception: " + message : check.detail();
    r.metrics = check.metrics();
  });
  return results;
}

std::string format_result(const CheckResult& r) {
  return fmt::format("{} {} {}: {}", r.passed ? "PASS" : "FAIL", r.id, r.title, r.detail);
}

}  // namespace kkstab::verify
