#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "flowid/parameters.hpp"

namespace flowid {

/// Scalar objective over a parameter store. When `with_grad` is set the
/// function must also add its analytic gradient into store's gradient slots
/// (they are zeroed beforehand).
using Objective = std::function<double(ParameterStore& store, bool with_grad)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Upper bound on coordinates probed per tensor (evenly strided); 0 = all.
  std::size_t max_coords_per_tensor = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
  bool passed = false;
};

/// Compares analytic gradients to central differences (f(θ+h) − f(θ−h)) / 2h
/// per coordinate. Throws NumericError if the objective is non-finite.
GradCheckReport grad_check(const Objective& objective, ParameterStore& store,
                           const GradCheckOptions& options = {});

}  // namespace flowid
