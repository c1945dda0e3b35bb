#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xtrace::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

/// Runs the command line `args` (without the program name). Machine-readable
/// output goes to `out` unless --out names a file; summaries go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  bool monte_carlo = false;
  long long samples = 100000;
  unsigned long long seed = 0;
  bool inject_coefficient_bug = false;
};

std::vector<SuiteResult> run_checks(const CheckOptions& options);

}  // namespace xtrace::cli
