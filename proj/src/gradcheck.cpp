#include "pedcast/gradcheck.hpp"

#include <cmath>
#include <unordered_map>

namespace pedcast::ad {

double grad_rel_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

GradCheckReport finite_diff_check(
    const std::function<double(const ParameterSet&)>& f, ParameterSet& params,
    double step, double tol) {
  // analytic gradients: f is expected to run forward + backward
  params.zero_grads();
  (void)f(params);
  std::unordered_map<std::string, std::vector<double>> analytic;
  for (const auto& name : params.names())
    analytic[name] = params.get(name)->grad;

  GradCheckReport report;
  report.tolerance = tol;
  for (const auto& name : params.names()) {
    TensorPtr p = params.get(name);
    GradCheckEntry entry{name, 0.0};
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      params.zero_grads();
      const double f_plus = f(params);
      p->value[i] = saved - step;
      params.zero_grads();
      const double f_minus = f(params);
      p->value[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * step);
      entry.max_rel_error =
          std::max(entry.max_rel_error, grad_rel_error(analytic[name][i], numeric));
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.per_parameter.push_back(std::move(entry));
  }
  // leave the analytic gradients in place for the caller
  for (const auto& name : params.names()) params.get(name)->grad = analytic[name];
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace pedcast::ad
