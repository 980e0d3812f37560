#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace warpgeo {

// A named view over an optimized quantity: the mutable values f() reads, and
// the analytic gradient of f at the CURRENT values (filled by the caller
// before the check). Shapes must match element-for-element.
struct DiffVariable {
  std::string name;
  double* values = nullptr;
  const double* grads = nullptr;
  size_t size = 0;
};

struct VarCheck {
  std::string name;
  double max_rel_err = 0.0;
  size_t worst_index = 0;
  double analytic = 0.0, numeric = 0.0;  // at the worst coordinate
  size_t checked = 0;
  bool pass = false;
  bool non_finite = false;
};

struct GradCheckReport {
  double step = 0.0, tol = 0.0;
  std::vector<VarCheck> vars;
  bool pass = false;

  std::string to_table() const;  // fixed-width text table
};

// Central-difference verification of analytic gradients: for each variable,
// up to max_coords coordinates (all of them when the field is small; a
// fixed-seed subsample otherwise) are perturbed by +-step and compared with
// relative error |a - n| / max(|a|, |n|, 1e-8). Any non-finite value or
// gradient fails the check and is reported with its location. f must be
// pure: two calls on the same values must return the same bits.
GradCheckReport finite_diff_check(const std::function<double()>& f,
                                  std::vector<DiffVariable>& vars, double step,
                                  double tol, uint64_t seed = 0,
                                  size_t max_coords = 500);

}  // namespace warpgeo
