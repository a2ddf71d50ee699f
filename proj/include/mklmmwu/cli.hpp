#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mklmmwu {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

struct RunReport {
  std::string dataset;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t m = 0;
  double eps = 0.0;
  double C = 0.0;
  std::string margin;
  std::size_t iterations = 0;
  double seconds = 0.0;
  double train_error = -1.0;  // negative when not measured
  double test_error = -1.0;
  std::size_t mu_active = 0;  // kernels with mu > 1e-6

  /// Space-separated key=value pairs.
  std::string to_line() const;
  static std::string csv_header();
  std::string to_csv() const;
};

/// Entry point behind the `mklmmwu` executable. `args` excludes the program
/// name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mklmmwu
