#include "facetts/diffcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "facetts/common/errors.hpp"

namespace facetts::dc {

namespace {

double eval_checked(const std::function<Tensor()>& f) {
  NoGradGuard guard;
  const double v = f().item();
  if (!std::isfinite(v)) throw EvaluationError("grad_check: function value is not finite");
  return v;
}

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t max_probes) {
  std::vector<std::size_t> idx;
  if (max_probes == 0 || max_probes >= n) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
  } else {
    for (std::size_t k = 0; k < max_probes; ++k) idx.push_back(k * n / max_probes);
  }
  return idx;
}

void record(GradCheckReport& r, double analytic, double numeric, double floor, std::size_t flat_index) {
  const double abs_err = std::abs(analytic - numeric);
  const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), floor});
  r.rel_errors.push_back(rel);
  r.max_abs_error = std::max(r.max_abs_error, abs_err);
  if (rel > r.max_rel_error || r.rel_errors.size() == 1) {
    r.max_rel_error = std::max(r.max_rel_error, rel);
    r.worst_index = flat_index;
  }
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           GradCheckOptions options) {
  if (!(options.eps > 0.0)) throw ContractViolation("grad_check: eps must be positive");
  Tensor probe = Tensor::from_data(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
  ParamList params{{"x", probe}};
  return grad_check_params([&] { return f(probe); }, params, options);
}

GradCheckReport grad_check_params(const std::function<Tensor()>& f, const ParamList& params,
                                  GradCheckOptions options) {
  if (!(options.eps > 0.0)) throw ContractViolation("grad_check: eps must be positive");
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.clear_grad();
  }
  eval_checked(f);
  Tensor loss = f();
  if (loss.requires_grad()) backward(loss);

  GradCheckReport report;
  std::size_t base = 0;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    const std::vector<double> analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                      : std::vector<double>(t.size(), 0.0);
    auto values = t.mutable_data();
    for (std::size_t i : probe_indices(values.size(), options.max_probes)) {
      const double orig = values[i];
      values[i] = orig + options.eps;
      const double up = eval_checked(f);
      values[i] = orig - options.eps;
      const double down = eval_checked(f);
      values[i] = orig;
      record(report, analytic[i], (up - down) / (2.0 * options.eps), options.floor, base + i);
    }
    base += values.size();
    t.clear_grad();
  }
  return report;
}

}  // namespace facetts::dc
