// Acceptance suite: one PASS/FAIL line per criterion, tolerances from the shared table.
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include "mellin_radon/selftest.hpp"

using namespace mellin_radon;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const char* kTitles[] = {
    "",
    "CES closed form vs quadrature",
    "projection identity for R_q",
    "profit identity and d2/dp0^2 check",
    "coarea and kernel factorization residuals",
    "norm estimates for r = 1, 2, inf and the extremal case",
    "inversion round trips (radon, profit)",
    "analytic value (R_q f)(I) = 4 e^-2, both schemes",
    "diagnostics: nested CES certified, kernel zero at s = 1",
    "selftest runtimes (quick, full)",
};

}  // namespace

int main() {
  CheckList all;
  auto stage = [&](const char* name, CheckList (*fn)()) {
    const auto t0 = Clock::now();
    std::cerr << "running " << name << " ..." << std::flush;
    auto part = fn();
    const double s = since(t0);
    std::cerr << " " << s << " s\n";
    all.insert(all.end(), part.begin(), part.end());
    return s;
  };
  double quick = 0.0;
  quick += stage("closed form", check_closed_form);
  quick += stage("projection identities", check_projection);
  quick += stage("coarea and factorization", check_coarea_factorization);
  quick += stage("norm estimates", check_norm_estimates);
  quick += stage("analytic value", check_analytic_value);
  double full = quick;
  full += stage("inversion roundtrip", check_roundtrip);
  full += stage("diagnostics", check_diagnostics);

  const double tq = tolerance("quick_runtime"), tf = tolerance("full_runtime");
  all.push_back({9, "selftest quick runtime (s)", quick, tq, quick <= tq, "criteria 1-5, 7"});
  all.push_back({9, "selftest full runtime (s)", full, tf, full <= tf, "criteria 1-8"});

  std::cout << "checks\n";
  print_checks(all, std::cout);

  std::map<int, std::pair<bool, int>> crit;
  for (const auto& c : all) {
    auto& [ok, count] = crit.try_emplace(c.criterion, true, 0).first->second;
    ok = ok && c.pass;
    ++count;
  }
  std::cout << "\ncriteria\n";
  int failed = 0;
  for (int k = 1; k <= 9; ++k) {
    const auto it = crit.find(k);
    const bool ok = it != crit.end() && it->second.first;
    const int count = it == crit.end() ? 0 : it->second.second;
    if (!ok) ++failed;
    std::printf("%s  criterion %d  %-56s (%d checks)\n", ok ? "PASS" : "FAIL", k, kTitles[k], count);
  }
  std::printf("\n%d/9 criteria pass\n", 9 - failed);
  return failed == 0 ? 0 : 1;
}
