#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pedcast/tensor.hpp"

namespace pedcast::ad {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_parameter;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Relative error with an absolute floor: |a - n| / max(1, |a|, |n|).
double grad_rel_error(double analytic, double numeric);

// Compares analytic gradients against central finite differences of f.
// f must be a deterministic scalar function of the parameter values and
// must not retain gradient state between calls; the analytic gradients
// are taken from the grad buffers as populated by the caller before the
// check (they are preserved and restored around the probing).
GradCheckReport finite_diff_check(
    const std::function<double(const ParameterSet&)>& f, ParameterSet& params,
    double step, double tol);

}  // namespace pedcast::ad
