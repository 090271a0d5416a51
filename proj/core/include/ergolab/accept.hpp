#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ergolab {

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;      // measured quantity, or worst normalized ratio
  double tolerance = 0.0;  // threshold the value is held against
};

std::string check_line(const CheckResult& r);

/// Runs the full acceptance battery. Writes artifact files under out_dir
/// (two sub-runs for the determinism check), streams one CHECK line per
/// criterion to `log`, and returns all results.
std::vector<CheckResult> run_acceptance(const std::string& out_dir, std::ostream& log);

}  // namespace ergolab
