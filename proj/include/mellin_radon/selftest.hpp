#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mellin_radon {

/// The tolerance table (data/tolerances.json, compiled in).
const nlohmann::json& tolerance_table();
/// Throws Argument for unknown ids.
double tolerance(std::string_view id);

struct CheckResult {
  int criterion = 0;
  std::string identity;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

using CheckList = std::vector<CheckResult>;

CheckList check_closed_form();             // 1
CheckList check_projection();              // 2 and 3
CheckList check_coarea_factorization();    // 4
CheckList check_norm_estimates();          // 5
CheckList check_roundtrip();               // 6
CheckList check_analytic_value();          // 7
CheckList check_diagnostics();             // 8

enum class SelftestLevel { Quick, Full };

/// Runs criteria 1-5 and 7 (quick) or 1-8 (full), plus the suite runtime.
/// Progress lines go to `log` when given.
CheckList run_selftest(SelftestLevel level, std::ostream* log = nullptr);

/// One line per check: PASS/FAIL, criterion, identity, residual, tolerance.
void print_checks(const CheckList& checks, std::ostream& os);

}  // namespace mellin_radon
