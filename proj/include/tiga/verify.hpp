#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tiga::verify {

struct SuiteResult {
  std::string name;
  bool passed = true;
  int checks = 0;
  std::string detail;  ///< first failure, if any
  double seconds = 0;
};

SuiteResult spline_basis();
SuiteResult two_scale();
SuiteResult thb_partition_of_unity();
SuiteResult admissible_refinement();
SuiteResult cut_quadrature();
SuiteResult estimator_scalings();
SuiteResult doerfler_fraction();
SuiteResult ghost_sets();

/// Runs every suite, printing one line each when `log` is given.
std::vector<SuiteResult> run_all(std::ostream* log = nullptr);

}  // namespace tiga::verify
