#pragma once

#include <string>
#include <vector>

#include "warpgeo/autodiff.hpp"

namespace warpgeo {

struct SuiteEntry {
  std::string name;
  GradCheckReport report;
};

struct SuiteResult {
  std::vector<SuiteEntry> entries;
  bool pass = false;
  double seconds = 0.0;

  std::string table() const;
};

// Canonical gradient verification shared by the `gradcheck` subcommand and
// the acceptance tests: every differentiable operation is checked against
// central differences at step 1e-5 / tol 1e-4 on seeded random fixtures, and
// the full multi-scale objective on a random 8x12 scene at tol 1e-3.
SuiteResult run_gradcheck_suite(uint64_t seed = 7);

}  // namespace warpgeo
