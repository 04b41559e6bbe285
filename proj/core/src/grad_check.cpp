#include "flowid/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "flowid/error.hpp"

namespace flowid {

namespace {

double evaluate(const Objective& objective, ParameterStore& store) {
  const double value = objective(store, false);
  if (!std::isfinite(value)) throw NumericError("grad_check: objective is not finite");
  return value;
}

}  // namespace

GradCheckReport grad_check(const Objective& objective, ParameterStore& store,
                           const GradCheckOptions& options) {
  store.zero_grad();
  const double base = objective(store, true);
  if (!std::isfinite(base)) throw NumericError("grad_check: objective is not finite");

  GradCheckReport report;
  for (const auto& name : store.names()) {
    const Tensor analytic = store.grad(name);
    Tensor& value = store.value(name);
    const std::size_t count = value.size();
    std::size_t stride = 1;
    if (options.max_coords_per_tensor && count > options.max_coords_per_tensor) {
      stride = (count + options.max_coords_per_tensor - 1) / options.max_coords_per_tensor;
    }
    for (std::size_t i = 0; i < count; i += stride) {
      const double original = value[i];
      value[i] = original + options.step;
      const double plus = evaluate(objective, store);
      value[i] = original - options.step;
      const double minus = evaluate(objective, store);
      value[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates_checked;
      if (rel > report.max_relative_error || report.worst_parameter.empty()) {
        report.max_relative_error = rel;
        report.worst_parameter = name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace flowid
