#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "facetts/diffcore/layers.hpp"
#include "facetts/diffcore/tensor.hpp"

namespace facetts::dc {

struct GradCheckReport {
  std::vector<double> rel_errors;  // per probed element
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Probe at most this many elements (evenly strided); 0 probes all.
  std::size_t max_probes = 0;
};

/// Compares the analytic gradient of scalar f at x with central differences.
/// Throws EvaluationError if f produces a non-finite value.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           GradCheckOptions options = {});

/// Same check, perturbing trainable parameters in place through f's closure.
GradCheckReport grad_check_params(const std::function<Tensor()>& f, const ParamList& params,
                                  GradCheckOptions options = {});

}  // namespace facetts::dc
